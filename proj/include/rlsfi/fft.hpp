#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace rlsfi {

// Length-n real DFT with the negative-exponent forward convention,
// X[q] = sum_k x[k] exp(-j 2 pi q k / n), q = 0..n/2. Backed by FFTW.
// An instance is not safe to use from several threads at once.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const noexcept { return n_; }
  std::size_t num_bins() const noexcept { return n_ / 2 + 1; }

  // in.size() <= n (zero-padded); out.size() == n/2 + 1.
  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  // Inverse including the 1/n factor. Imaginary parts of bin 0 (and n/2 for
  // even n) are ignored.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  struct Impl;
  std::size_t n_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rlsfi
