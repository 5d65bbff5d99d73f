#include "rlsfi/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

#include "rlsfi/error.hpp"

namespace rlsfi {

namespace {
// The FFTW planner is not thread-safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct RealFft::Impl {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  explicit Impl(std::size_t n) {
    std::lock_guard lock(planner_mutex());
    real = fftw_alloc_real(n);
    spec = fftw_alloc_complex(n / 2 + 1);
    const int ni = static_cast<int>(n);
    fwd = fftw_plan_dft_r2c_1d(ni, real, spec, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(ni, spec, real, FFTW_ESTIMATE);
  }
  ~Impl() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    fftw_free(real);
    fftw_free(spec);
  }
};

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n < 1) throw InvalidArgument("FFT length must be positive");
  impl_ = std::make_unique<Impl>(n);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
  if (in.size() > n_ || out.size() != num_bins()) throw InvalidArgument("FFT size mismatch");
  std::copy(in.begin(), in.end(), impl_->real);
  std::fill(impl_->real + in.size(), impl_->real + n_, 0.0);
  fftw_execute(impl_->fwd);
  for (std::size_t q = 0; q < out.size(); ++q) out[q] = {impl_->spec[q][0], impl_->spec[q][1]};
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
  if (in.size() != num_bins() || out.size() != n_) throw InvalidArgument("FFT size mismatch");
  for (std::size_t q = 0; q < in.size(); ++q) {
    impl_->spec[q][0] = in[q].real();
    impl_->spec[q][1] = in[q].imag();
  }
  impl_->spec[0][1] = 0.0;
  if (n_ % 2 == 0) impl_->spec[n_ / 2][1] = 0.0;
  fftw_execute(impl_->inv);
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t k = 0; k < n_; ++k) out[k] = impl_->real[k] * scale;
}

}  // namespace rlsfi
