#pragma once

// ADMM solver for the regularized finite-sample dual
//
//   min_{lambda >= 0}  (1/N) sum_i conj(-G_i^T lambda, p_i)
//                      + (zeta/2) [ (1/N) sum_i |G_i^T lambda|^2 + |lambda|^2 ].
//
// Each outer iteration updates the per-sample v_i (data-parallel), solves a
// K x K nonnegative QP for lambda, and takes a scaled dual step on w_i.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fairproj/constraints.hpp"
#include "fairproj/divergence.hpp"
#include "fairproj/matrix.hpp"

namespace fairproj {

class WorkerPool;

enum class QpMethod { ActiveSet, CoordinateDescent };

struct SolverConfig {
  DivergenceKind divergence = DivergenceKind::kl();
  double rho = 2.0;
  /// Strong-convexity regularizer; unset means 1/sqrt(N).
  std::optional<double> zeta;
  /// Unset means max(500, ceil(10 log N)).
  std::optional<int> max_outer_iters;
  double residual_tol = 1e-6;
  std::size_t worker_count = 1;
  /// The solver is deterministic; the seed is carried through to outputs.
  std::uint64_t seed = 0;
  QpMethod qp_method = QpMethod::ActiveSet;

  double resolved_zeta(std::size_t samples) const;
  int resolved_max_iters(std::size_t samples) const;
  /// Throws InvalidArgument when rho/zeta are out of range for the divergence.
  void validate(std::size_t samples) const;
};

struct DualSolution {
  std::vector<double> lambda;
  int iterations = 0;
  bool converged = false;
  double zeta = 0.0;
  double rho = 0.0;
  /// sqrt((1/N) sum_i |v_i + G_i^T lambda|^2) after each iteration.
  std::vector<double> primal_residuals;
  /// |lambda^(t+1) - lambda^(t)|_2 after each iteration.
  std::vector<double> lambda_steps;
};

/// Q = (zeta/2) I + (rho / 2N) sum_i G_i G_i^T.
Matrix precompute_q(const ConstraintSet& cs, double rho, double zeta, WorkerPool* pool = nullptr);

struct QpStats {
  int iterations = 0;
  double kkt_residual = 0.0;
};

/// Largest KKT violation of min l^T Q l + q^T l over l >= 0 at x.
double qp_kkt_residual(const Matrix& Q, std::span<const double> q, std::span<const double> x);

inline constexpr double kQpKktTol = 1e-9;

/**
 * argmin_{l >= 0} l^T Q l + q^T l for symmetric positive-definite Q,
 * warm-started from `warm` (negative entries are clipped).
 * Throws ConvergenceFailure carrying the KKT residual if the iteration cap is
 * reached or the result misses kQpKktTol.
 */
std::vector<double> lambda_qp_solve(const Matrix& Q, std::span<const double> q,
                                    std::span<const double> warm,
                                    QpMethod method = QpMethod::ActiveSet,
                                    QpStats* stats = nullptr);

/// Runs ADMM until the primal residual drops below cfg.residual_tol or the
/// iteration cap is hit (DualSolution::converged tells which).
DualSolution admm_fit(const ScoreMatrix& scores, const ConstraintSet& cs, const SolverConfig& cfg);

/// The regularized dual objective above at lambda.
double dual_objective(const ScoreMatrix& scores, const ConstraintSet& cs,
                      const DivergenceKind& kind, double zeta, std::span<const double> lambda);

/**
 * Diagnostic bound on |lambda*|_1 for the unregularized dual, evaluated at
 * the uniform classifier h = 1/C:  D_f(h || h_base) / min_k (-mu_k(h)).
 * Throws InfeasibilityDiagnostic when the uniform classifier is not strictly
 * feasible.
 */
double lambda_max_bound(const ScoreMatrix& scores, const ConstraintSet& cs,
                        const DivergenceKind& kind);

}  // namespace fairproj
