#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "rlsfi/error.hpp"
#include "rlsfi/kernels.hpp"

namespace rlsfi::kernels {

namespace {

constexpr KernelTable kScalar{Isa::Scalar, &scalar::axpy, &scalar::dot, &scalar::cdot,
                              &scalar::rcdot};
#if defined(RLSFI_BUILD_AVX2)
constexpr KernelTable kAvx2{Isa::Avx2, &avx2::axpy, &avx2::dot, &avx2::cdot, &avx2::rcdot};
#endif
#if defined(RLSFI_BUILD_NEON)
constexpr KernelTable kNeon{Isa::Neon, &neon::axpy, &neon::dot, &neon::cdot, &neon::rcdot};
#endif

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(RLSFI_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(RLSFI_BUILD_NEON)
      return true;  // mandatory on aarch64
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& select_active() {
  if (const char* env = std::getenv("RLSFI_KERNELS")) {
    const std::string want(env);
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
      if (want == isa_name(isa) && cpu_supports(isa)) return table(isa);
    }
  }
  if (cpu_supports(Isa::Avx2)) return table(Isa::Avx2);
  if (cpu_supports(Isa::Neon)) return table(Isa::Neon);
  return kScalar;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
    case Isa::Neon:
      return "neon";
  }
  return "unknown";
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
    if (cpu_supports(isa)) out.push_back(isa);
  }
  return out;
}

bool is_available(Isa isa) { return cpu_supports(isa); }

const KernelTable& table(Isa isa) {
  if (!cpu_supports(isa)) {
    throw InvalidArgument("kernel set '" + std::string(isa_name(isa)) +
                          "' is not available on this machine");
  }
  switch (isa) {
#if defined(RLSFI_BUILD_AVX2)
    case Isa::Avx2:
      return kAvx2;
#endif
#if defined(RLSFI_BUILD_NEON)
    case Isa::Neon:
      return kNeon;
#endif
    default:
      return kScalar;
  }
}

const KernelTable& active() {
  static const KernelTable& t = select_active();
  return t;
}

}  // namespace rlsfi::kernels
