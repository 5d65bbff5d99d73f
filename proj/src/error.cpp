#include "rlsfi/error.hpp"

namespace rlsfi {

namespace {
std::string with_offset(const std::string& what, std::optional<std::uint64_t> off) {
  if (!off) return what;
  return what + " (at byte offset " + std::to_string(*off) + ")";
}
}  // namespace

FormatError::FormatError(const std::string& what, std::optional<std::uint64_t> byte_offset)
    : std::runtime_error(with_offset(what, byte_offset)), offset_(byte_offset) {}

}  // namespace rlsfi
