#pragma once

// Data-parallel inner loops used by convolution, DTFT evaluation and
// beampattern accumulation. Every routine has a scalar reference version;
// vector versions are selected at runtime from what the CPU reports. The
// environment variable RLSFI_KERNELS=scalar|avx2|neon forces a choice.

#include <complex>
#include <cstddef>
#include <string_view>
#include <vector>

namespace rlsfi::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa) noexcept;

struct KernelTable {
  Isa isa;
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i a[i] * b[i], no conjugation
  std::complex<double> (*cdot)(const std::complex<double>* a, const std::complex<double>* b,
                               std::size_t n);
  // sum_i a[i] * b[i] with real a
  std::complex<double> (*rcdot)(const double* a, const std::complex<double>* b, std::size_t n);
};

// Implementations compiled into this binary and runnable on this CPU.
std::vector<Isa> available_isas();
bool is_available(Isa isa);

// Table for a specific ISA; throws InvalidArgument when unavailable.
const KernelTable& table(Isa isa);

// Table selected for this process (best available unless overridden).
const KernelTable& active();

namespace scalar {
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
std::complex<double> cdot(const std::complex<double>* a, const std::complex<double>* b,
                          std::size_t n);
std::complex<double> rcdot(const double* a, const std::complex<double>* b, std::size_t n);
}  // namespace scalar

}  // namespace rlsfi::kernels
