#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace rlsfi {

// Bad user input or violated precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent file content. Carries the byte offset where the
// problem was detected when one is known.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what,
                       std::optional<std::uint64_t> byte_offset = std::nullopt);

  std::optional<std::uint64_t> byte_offset() const noexcept { return offset_; }

 private:
  std::optional<std::uint64_t> offset_;
};

// The requested WNG floor exceeds ||d||^2, so the constraint set is empty.
class FeasibilityError : public std::runtime_error {
 public:
  FeasibilityError(const std::string& what, double gamma_max)
      : std::runtime_error(what), gamma_max_(gamma_max) {}

  double gamma_max() const noexcept { return gamma_max_; }

 private:
  double gamma_max_;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rlsfi
