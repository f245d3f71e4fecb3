#pragma once

// f-divergences, their convex conjugates over the simplex, and the per-sample
// inner minimizers used by the ADMM v-update:
//
//   v* = argmin_v  conj(v, p) + xi * |v|^2 + a^T v,
//   conj(v, p)  = sup_{q in simplex} v^T q - D_f(q || p).
//
// KL (f(t) = t log t) has conj = log-sum-exp and is solved as a fixed point of
// a contraction; CE (f(t) = -log t) reduces to a scalar root; any other
// strictly convex f goes through the separable theta/q reduction.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace fairproj {

enum class DivergenceTag { KL, CE, GenericF };

/// Which f-divergence to project with. KL and CE also carry their handles so
/// the generic path can be cross-checked against the closed forms.
struct DivergenceKind {
  DivergenceTag tag = DivergenceTag::KL;
  std::function<double(double)> f;
  std::function<double(double)> fprime;
  /// (f')^{-1}; optional for GenericF.
  std::function<double(double)> phi;

  static DivergenceKind kl();
  static DivergenceKind ce();
  static DivergenceKind generic(std::function<double(double)> f,
                                std::function<double(double)> fprime,
                                std::function<double(double)> phi = {});

  /// "kl", "ce" or "generic".
  std::string name() const;
  /// Parses "kl" / "ce" (case-insensitive).
  static DivergenceKind from_name(const std::string& name);
};

/// Softmax with max-shift; throws InvalidArgument on non-finite input.
void softmax(std::span<const double> z, std::span<double> out);
std::vector<double> softmax(std::span<const double> z);

/// log sum_c p_c exp(v_c), computed with max-shift.
double kl_conj(std::span<const double> v, std::span<const double> p);

/// sup_q v^T q + sum_c p_c log(q_c / p_c); the maximizer is written to
/// `q_out` when it is non-empty.
double ce_conj(std::span<const double> v, std::span<const double> p,
               std::span<double> q_out = {});

/// D_f(q || p) = sum_c p_c f(q_c / p_c).
double divergence_value(const DivergenceKind& kind, std::span<const double> q,
                        std::span<const double> p);

/// conj(v, p) for any kind.
double conj_value(const DivergenceKind& kind, std::span<const double> v,
                  std::span<const double> p);

/**
 * Gradient of conj(., p) at v, i.e. argmax_{q in simplex} v^T q - D_f(q||p).
 * This is the tilt p_c * phi(v_c + gamma) with gamma fixed by normalization.
 * Returns gamma for CE; for KL the log-normalizer shift; NaN for GenericF.
 */
double conj_gradient(const DivergenceKind& kind, std::span<const double> v,
                     std::span<const double> p, std::span<double> q_out);

/// conj(v, p) + xi |v|^2 + a^T v.
double v_update_objective(const DivergenceKind& kind, std::span<const double> p,
                          std::span<const double> a, double xi,
                          std::span<const double> v);

struct KlUpdateStats {
  int iterations = 0;
  /// |softmax(v + log p) + 2 xi v + a|_inf at the returned v.
  double residual = 0.0;
};

/// Fixed-point iteration stop: |z_{t+1} - z_t|_inf below this.
inline constexpr double kKlStepTol = 1e-10;
inline constexpr int kKlMaxIters = 200;

/**
 * KL v-update. `v` holds the warm start on entry and the minimizer on exit.
 * Converges geometrically with factor 1/(4 xi); callers keep xi > 1/4.
 * Throws ConvergenceFailure after kKlMaxIters iterations.
 */
KlUpdateStats v_update_kl_inplace(std::span<const double> p, std::span<const double> a,
                                  double xi, std::span<double> v);
std::vector<double> v_update_kl(std::span<const double> p, std::span<const double> a,
                                double xi, std::span<const double> init);

struct CeUpdateStats {
  /// Root of the normalization function; reuse as the next warm start.
  double z = 0.0;
  int iterations = 0;
  /// g(z) at the returned root.
  double residual = 0.0;
};

/**
 * CE v-update. Finds z with
 *   g(z) = -1 + sum_c [sqrt((z + a_c/2)^2 + 2 p_c xi) - (z + a_c/2)] = 0
 * by Newton steps kept inside a bracket, then sets q_c to the bracketed term
 * and v = -(q + a) / (2 xi). `q_out` (optional) receives q.
 */
CeUpdateStats v_update_ce_inplace(std::span<const double> p, std::span<const double> a,
                                  double xi, double init_z, std::span<double> v,
                                  std::span<double> q_out = {});
std::vector<double> v_update_ce(std::span<const double> p, std::span<const double> a,
                                double xi, double init_z = 0.0);

/**
 * v-update for any strictly convex f through the separable reduction
 *   min_v ... = -sup_theta [ -theta + sum_c min_{q_c>=0} p_c f(q_c/p_c)
 *                            + (a_c + q_c)^2 / (4 xi) + theta q_c ],
 * returning v = -(q + a) / (2 xi). Uses only f'.
 */
std::vector<double> v_update_generic(const DivergenceKind& kind, std::span<const double> p,
                                     std::span<const double> a, double xi);

}  // namespace fairproj
