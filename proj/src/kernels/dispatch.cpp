#include <cstdlib>
#include <string>

#include "fairproj/error.hpp"
#include "fairproj/kernels.hpp"

namespace fairproj::kernels {

namespace {

constexpr KernelTable kScalar{Isa::Scalar, scalar::dot, scalar::axpy, scalar::syr, scalar::gemv};
#if defined(FAIRPROJ_HAVE_AVX2)
constexpr KernelTable kAvx2{Isa::Avx2, avx2::dot, avx2::axpy, avx2::syr, avx2::gemv};
#endif
#if defined(FAIRPROJ_HAVE_NEON)
constexpr KernelTable kNeon{Isa::Neon, neon::dot, neon::axpy, neon::syr, neon::gemv};
#endif

const KernelTable& resolve() {
  if (const char* env = std::getenv("FAIRPROJ_ISA")) {
    const std::string want(env);
    if (want == "scalar") return kScalar;
    if (want == "avx2") return table(Isa::Avx2);
    if (want == "neon") return table(Isa::Neon);
    throw InvalidArgument("FAIRPROJ_ISA: unknown value '" + want + "'");
  }
  if (supported(Isa::Avx2)) return table(Isa::Avx2);
  if (supported(Isa::Neon)) return table(Isa::Neon);
  return kScalar;
}

}  // namespace

std::string_view isa_name(Isa isa) {
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

bool supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(FAIRPROJ_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(FAIRPROJ_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw InvalidArgument("kernels: ISA " + std::string(isa_name(isa)) + " not available");
  }
  switch (isa) {
#if defined(FAIRPROJ_HAVE_AVX2)
    case Isa::Avx2:
      return kAvx2;
#endif
#if defined(FAIRPROJ_HAVE_NEON)
    case Isa::Neon:
      return kNeon;
#endif
    default:
      return kScalar;
  }
}

const KernelTable& active() {
  static const KernelTable& t = resolve();
  return t;
}

}  // namespace fairproj::kernels
