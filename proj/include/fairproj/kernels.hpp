#pragma once

// Dense inner-loop kernels used by the ADMM solver and constraint builders.
//
// Every kernel has a scalar reference implementation; AVX2+FMA (x86-64) and
// NEON (aarch64) variants are compiled into separate translation units and
// selected once at runtime. Set FAIRPROJ_ISA=scalar to force the reference
// path. Vector variants may differ from the reference only by floating-point
// reassociation.

#include <cstddef>
#include <string_view>

namespace fairproj::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

/// Function table for one instruction set. All lengths are element counts;
/// matrices are row-major with leading dimension n.
struct KernelTable {
  Isa isa;
  /// sum_j x[j] * y[j]
  double (*dot)(const double* x, const double* y, std::size_t n);
  /// y[j] += alpha * x[j]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// a[r*n + j] += alpha * x[r] * x[j] for all r, j (full symmetric update)
  void (*syr)(double alpha, const double* x, double* a, std::size_t n);
  /// y[r] = sum_j a[r*n + j] * x[j] for r < m (m rows of length n)
  void (*gemv)(const double* a, const double* x, double* y, std::size_t m, std::size_t n);
};

/// True if the running CPU can execute `isa`.
bool supported(Isa isa);

/// Table for a specific ISA. Throws InvalidArgument if not compiled in or not
/// supported by the CPU.
const KernelTable& table(Isa isa);

/// Table selected for this process: the widest supported ISA unless
/// FAIRPROJ_ISA overrides it. Resolved on first call.
const KernelTable& active();

namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void syr(double alpha, const double* x, double* a, std::size_t n);
void gemv(const double* a, const double* x, double* y, std::size_t m, std::size_t n);
}  // namespace scalar

#if defined(FAIRPROJ_HAVE_AVX2)
namespace avx2 {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void syr(double alpha, const double* x, double* a, std::size_t n);
void gemv(const double* a, const double* x, double* y, std::size_t m, std::size_t n);
}  // namespace avx2
#endif

#if defined(FAIRPROJ_HAVE_NEON)
namespace neon {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void syr(double alpha, const double* x, double* a, std::size_t n);
void gemv(const double* a, const double* x, double* y, std::size_t m, std::size_t n);
}  // namespace neon
#endif

}  // namespace fairproj::kernels
