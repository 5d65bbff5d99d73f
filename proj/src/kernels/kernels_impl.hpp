#pragma once

#include <complex>
#include <cstddef>

namespace rlsfi::kernels {

#if defined(RLSFI_BUILD_AVX2)
namespace avx2 {
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
std::complex<double> cdot(const std::complex<double>* a, const std::complex<double>* b,
                          std::size_t n);
std::complex<double> rcdot(const double* a, const std::complex<double>* b, std::size_t n);
}  // namespace avx2
#endif

#if defined(RLSFI_BUILD_NEON)
namespace neon {
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
std::complex<double> cdot(const std::complex<double>* a, const std::complex<double>* b,
                          std::size_t n);
std::complex<double> rcdot(const double* a, const std::complex<double>* b, std::size_t n);
}  // namespace neon
#endif

}  // namespace rlsfi::kernels
