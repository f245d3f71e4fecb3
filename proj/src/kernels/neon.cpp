// NEON is baseline on aarch64, so no runtime check is needed beyond the build.
#include <arm_neon.h>

#include "fairproj/kernels.hpp"

namespace fairproj::kernels::neon {

double dot(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + j), vld1q_f64(y + j));
    acc1 = vfmaq_f64(acc1, vld1q_f64(x + j + 2), vld1q_f64(y + j + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; j < n; ++j) s += x[j] * y[j];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    vst1q_f64(y + j, vfmaq_f64(vld1q_f64(y + j), a, vld1q_f64(x + j)));
  }
  for (; j < n; ++j) y[j] += alpha * x[j];
}

void syr(double alpha, const double* x, double* a, std::size_t n) {
  for (std::size_t r = 0; r < n; ++r) {
    const double s = alpha * x[r];
    if (s == 0.0) continue;
    axpy(s, x, a + r * n, n);
  }
}

void gemv(const double* a, const double* x, double* y, std::size_t m, std::size_t n) {
  for (std::size_t r = 0; r < m; ++r) y[r] = dot(a + r * n, x, n);
}

}  // namespace fairproj::kernels::neon
