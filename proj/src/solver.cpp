#include "fairproj/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fairproj/error.hpp"
#include "fairproj/kernels.hpp"
#include "fairproj/parallel.hpp"

namespace fairproj {

namespace {

// In-place Cholesky of the n x n leading block stored densely in `a`
// (row-major, leading dimension n). Returns false if not positive definite.
bool cholesky(std::vector<double>& a, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) return false;
    d = std::sqrt(d);
    a[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / d;
    }
  }
  return true;
}

void cholesky_solve(const std::vector<double>& l, std::size_t n, std::vector<double>& b) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * b[k];
    b[i] = s / l[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * b[k];
    b[ii] = s / l[ii * n + ii];
  }
}

// gradient of l^T Q l + q^T l
void qp_gradient(const Matrix& Q, std::span<const double> q, std::span<const double> x,
                 std::vector<double>& g) {
  const auto& kt = kernels::active();
  const std::size_t K = q.size();
  g.resize(K);
  for (std::size_t k = 0; k < K; ++k) g[k] = 2.0 * kt.dot(Q.row(k).data(), x.data(), K) + q[k];
}

/**
 * Primal active-set method on the free set F = {k : x_k > 0}: solve the
 * equality-constrained problem on F exactly, step back to feasibility if the
 * solution leaves the orthant, otherwise release the bound with the most
 * negative multiplier.
 */
std::vector<double> qp_active_set(const Matrix& Q, std::span<const double> q,
                                  std::span<const double> warm, QpStats& stats) {
  const std::size_t K = q.size();
  std::vector<double> x(K, 0.0);
  for (std::size_t k = 0; k < K && k < warm.size(); ++k) x[k] = std::max(warm[k], 0.0);
  std::vector<char> free(K, 0);
  for (std::size_t k = 0; k < K; ++k) free[k] = x[k] > 0.0;

  double scale = 1.0;
  for (double v : q) scale = std::max(scale, std::abs(v));
  const double release_tol = 1e-14 * scale;

  std::vector<std::size_t> idx;
  std::vector<double> chol, rhs, y, grad;
  const int cap = static_cast<int>(20 * K + 100);
  for (stats.iterations = 0; stats.iterations < cap; ++stats.iterations) {
    idx.clear();
    for (std::size_t k = 0; k < K; ++k) {
      if (free[k]) idx.push_back(k);
    }
    const std::size_t n = idx.size();
    if (n > 0) {
      chol.assign(n * n, 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) chol[r * n + c] = 2.0 * Q(idx[r], idx[c]);
      }
      if (!cholesky(chol, n)) {
        throw InvalidArgument("lambda_qp_solve: Q is not positive definite");
      }
      y.resize(n);
      for (std::size_t r = 0; r < n; ++r) y[r] = -q[idx[r]];
      cholesky_solve(chol, n, y);
      // One step of iterative refinement.
      rhs.resize(n);
      for (std::size_t r = 0; r < n; ++r) {
        double s = -q[idx[r]];
        for (std::size_t c = 0; c < n; ++c) s -= 2.0 * Q(idx[r], idx[c]) * y[c];
        rhs[r] = s;
      }
      cholesky_solve(chol, n, rhs);
      for (std::size_t r = 0; r < n; ++r) y[r] += rhs[r];

      bool inside = true;
      for (double v : y) inside = inside && v > 0.0;
      if (!inside) {
        // Largest step toward y that keeps x >= 0; the blocking coordinates
        // become bound.
        double t = 1.0;
        for (std::size_t r = 0; r < n; ++r) {
          const double xk = x[idx[r]];
          if (y[r] <= 0.0 && xk - y[r] > 0.0) t = std::min(t, xk / (xk - y[r]));
        }
        for (std::size_t r = 0; r < n; ++r) {
          const std::size_t k = idx[r];
          x[k] += t * (y[r] - x[k]);
          if (x[k] <= 0.0 || (y[r] <= 0.0 && x[k] <= 1e-300)) {
            x[k] = 0.0;
            free[k] = 0;
          }
        }
        continue;
      }
      for (std::size_t r = 0; r < n; ++r) x[idx[r]] = y[r];
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (!free[k]) x[k] = 0.0;
    }
    qp_gradient(Q, q, x, grad);
    std::size_t worst = K;
    double worst_g = -release_tol;
    for (std::size_t k = 0; k < K; ++k) {
      if (!free[k] && grad[k] < worst_g) {
        worst_g = grad[k];
        worst = k;
      }
    }
    if (worst == K) return x;
    free[worst] = 1;
  }
  throw ConvergenceFailure("lambda_qp_solve: active-set iteration cap reached",
                           qp_kkt_residual(Q, q, x));
}

std::vector<double> qp_coordinate_descent(const Matrix& Q, std::span<const double> q,
                                          std::span<const double> warm, QpStats& stats) {
  const std::size_t K = q.size();
  std::vector<double> x(K, 0.0);
  for (std::size_t k = 0; k < K && k < warm.size(); ++k) x[k] = std::max(warm[k], 0.0);
  const auto& kt = kernels::active();
  constexpr int kMaxSweeps = 1000000;
  for (stats.iterations = 0; stats.iterations < kMaxSweeps; ++stats.iterations) {
    double change = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double off = kt.dot(Q.row(k).data(), x.data(), K) - Q(k, k) * x[k];
      const double next = std::max(0.0, -(q[k] + 2.0 * off) / (2.0 * Q(k, k)));
      change = std::max(change, std::abs(next - x[k]));
      x[k] = next;
    }
    // Small steps on an ill-conditioned Q can still leave the KKT bound unmet.
    if (change <= 1e-10 && qp_kkt_residual(Q, q, x) <= 0.5 * kQpKktTol) return x;
  }
  throw ConvergenceFailure("lambda_qp_solve: coordinate descent sweep cap reached",
                           qp_kkt_residual(Q, q, x));
}

std::string at_iteration(int t) { return " (ADMM iteration " + std::to_string(t) + ")"; }

}  // namespace

double SolverConfig::resolved_zeta(std::size_t samples) const {
  if (zeta) return *zeta;
  return 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(samples, 1)));
}

int SolverConfig::resolved_max_iters(std::size_t samples) const {
  if (max_outer_iters) return *max_outer_iters;
  const double n = static_cast<double>(std::max<std::size_t>(samples, 1));
  return std::max(500, static_cast<int>(std::ceil(10.0 * std::log(n))));
}

void SolverConfig::validate(std::size_t samples) const {
  const double z = resolved_zeta(samples);
  if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidArgument("solver: rho must be positive");
  if (!(z > 0.0) || !std::isfinite(z)) throw InvalidArgument("solver: zeta must be positive");
  if (divergence.tag == DivergenceTag::KL && !(rho + z > 0.5)) {
    throw InvalidArgument("solver: KL needs rho + zeta > 1/2 for the fixed-point update");
  }
  if (!(residual_tol > 0.0)) throw InvalidArgument("solver: residual_tol must be positive");
  if (worker_count == 0) throw InvalidArgument("solver: worker_count must be >= 1");
  if (resolved_max_iters(samples) <= 0) throw InvalidArgument("solver: max_outer_iters must be positive");
}

Matrix precompute_q(const ConstraintSet& cs, double rho, double zeta, WorkerPool* pool) {
  const std::size_t K = cs.rows(), C = cs.classes(), N = cs.samples();
  WorkerPool local(1);
  WorkerPool& workers = pool ? *pool : local;
  const auto& kt = kernels::active();
  std::vector<double> sum(K * K, 0.0);
  ordered_reduce(
      workers, chunk_count(N), K * K,
      [&](std::size_t chunk, double* partial) {
        const std::size_t end = std::min(N, (chunk + 1) * kChunkSamples);
        for (std::size_t i = chunk * kChunkSamples; i < end; ++i) {
          auto gi = cs.sample(i);
          for (std::size_t c = 0; c < C; ++c) kt.syr(1.0, gi.data() + c * K, partial, K);
        }
      },
      sum.data());
  Matrix Q(K, K);
  const double scale = N > 0 ? rho / (2.0 * static_cast<double>(N)) : 0.0;
  for (std::size_t r = 0; r < K; ++r) {
    for (std::size_t c = 0; c < K; ++c) Q(r, c) = scale * sum[r * K + c];
    Q(r, r) += 0.5 * zeta;
  }
  // Symmetrize exactly; the syr kernels may round the two triangles differently.
  for (std::size_t r = 0; r < K; ++r) {
    for (std::size_t c = r + 1; c < K; ++c) {
      const double m = 0.5 * (Q(r, c) + Q(c, r));
      Q(r, c) = m;
      Q(c, r) = m;
    }
  }
  return Q;
}

double qp_kkt_residual(const Matrix& Q, std::span<const double> q, std::span<const double> x) {
  std::vector<double> g;
  qp_gradient(Q, q, x, g);
  double worst = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (x[k] < 0.0) {
      worst = std::max(worst, -x[k]);
    } else if (x[k] > 0.0) {
      worst = std::max(worst, std::abs(g[k]));
    } else {
      worst = std::max(worst, -g[k]);
    }
  }
  return worst;
}

std::vector<double> lambda_qp_solve(const Matrix& Q, std::span<const double> q,
                                    std::span<const double> warm, QpMethod method,
                                    QpStats* stats) {
  const std::size_t K = q.size();
  if (Q.rows() != K || Q.cols() != K) throw InvalidArgument("lambda_qp_solve: Q/q size mismatch");
  if (!warm.empty() && warm.size() != K) {
    throw InvalidArgument("lambda_qp_solve: warm start size mismatch");
  }
  QpStats local;
  QpStats& st = stats ? *stats : local;
  std::vector<double> x = method == QpMethod::ActiveSet ? qp_active_set(Q, q, warm, st)
                                                         : qp_coordinate_descent(Q, q, warm, st);
  st.kkt_residual = qp_kkt_residual(Q, q, x);
  if (!(st.kkt_residual <= kQpKktTol)) {
    throw ConvergenceFailure("lambda_qp_solve: KKT residual above tolerance", st.kkt_residual);
  }
  return x;
}

DualSolution admm_fit(const ScoreMatrix& scores, const ConstraintSet& cs, const SolverConfig& cfg) {
  const std::size_t N = scores.samples(), C = scores.classes(), K = cs.rows();
  if (cs.samples() != N || cs.classes() != C) {
    throw InvalidArgument("admm_fit: scores and constraints disagree on N or C");
  }
  if (N == 0) throw InvalidArgument("admm_fit: no samples");
  cfg.validate(N);

  DualSolution sol;
  sol.rho = cfg.rho;
  sol.zeta = cfg.resolved_zeta(N);
  const double rho = sol.rho;
  const double xi = 0.5 * (rho + sol.zeta);
  const int max_iters = cfg.resolved_max_iters(N);
  const DivergenceKind& kind = cfg.divergence;

  WorkerPool pool(cfg.worker_count);
  const auto& kt = kernels::active();
  const Matrix Q = precompute_q(cs, rho, sol.zeta, &pool);

  std::vector<double> lambda(K, 0.0);
  std::vector<double> v(N * C, 0.0), w(N * C, 0.0), u(N * C, 0.0), z_ce(N, 0.0);
  std::vector<double> q(K), a_buf, stats_buf;
  const std::size_t chunks = chunk_count(N);

  for (int t = 1; t <= max_iters; ++t) {
    // v-update and the q = (1/N) sum_i G_i (w_i + rho v_i) reduction.
    std::fill(q.begin(), q.end(), 0.0);
    try {
      ordered_reduce(
          pool, chunks, K,
          [&](std::size_t chunk, double* partial) {
            std::vector<double> a(C);
            const std::size_t end = std::min(N, (chunk + 1) * kChunkSamples);
            for (std::size_t i = chunk * kChunkSamples; i < end; ++i) {
              std::span<double> vi(v.data() + i * C, C);
              const double* wi = w.data() + i * C;
              const double* ui = u.data() + i * C;
              for (std::size_t c = 0; c < C; ++c) a[c] = wi[c] + rho * ui[c];
              try {
                switch (kind.tag) {
                  case DivergenceTag::KL:
                    v_update_kl_inplace(scores.row(i), a, xi, vi);
                    break;
                  case DivergenceTag::CE:
                    z_ce[i] = v_update_ce_inplace(scores.row(i), a, xi, z_ce[i], vi).z;
                    break;
                  case DivergenceTag::GenericF: {
                    auto next = v_update_generic(kind, scores.row(i), a, xi);
                    std::copy(next.begin(), next.end(), vi.begin());
                    break;
                  }
                }
              } catch (const ConvergenceFailure& e) {
                throw ConvergenceFailure(
                    std::string(e.what()) + " at sample " + std::to_string(i), e.residual());
              }
              auto gi = cs.sample(i);
              for (std::size_t c = 0; c < C; ++c) {
                kt.axpy(wi[c] + rho * vi[c], gi.data() + c * K, partial, K);
              }
            }
          },
          q.data());
    } catch (const ConvergenceFailure& e) {
      throw ConvergenceFailure(std::string(e.what()) + at_iteration(t), e.residual());
    }
    for (double& x : q) x /= static_cast<double>(N);

    std::vector<double> next;
    try {
      next = lambda_qp_solve(Q, q, lambda, cfg.qp_method);
    } catch (const ConvergenceFailure& e) {
      throw ConvergenceFailure(std::string(e.what()) + at_iteration(t), e.residual());
    }
    double step = 0.0;
    for (std::size_t k = 0; k < K; ++k) step += (next[k] - lambda[k]) * (next[k] - lambda[k]);
    lambda = std::move(next);

    // w-update; u_i = G_i^T lambda is reused by the next v-update.
    double sq = 0.0;
    ordered_reduce(
        pool, chunks, 1,
        [&](std::size_t chunk, double* partial) {
          const std::size_t end = std::min(N, (chunk + 1) * kChunkSamples);
          for (std::size_t i = chunk * kChunkSamples; i < end; ++i) {
            auto gi = cs.sample(i);
            for (std::size_t c = 0; c < C; ++c) {
              const double uc = kt.dot(gi.data() + c * K, lambda.data(), K);
              const double r = v[i * C + c] + uc;
              u[i * C + c] = uc;
              w[i * C + c] += rho * r;
              partial[0] += r * r;
            }
          }
        },
        &sq);
    const double residual = std::sqrt(sq / static_cast<double>(N));
    if (!std::isfinite(residual) || !std::isfinite(step)) {
      throw NumericBlowup("admm_fit: non-finite state" + at_iteration(t));
    }
    sol.primal_residuals.push_back(residual);
    sol.lambda_steps.push_back(std::sqrt(step));
    sol.iterations = t;
    if (residual <= cfg.residual_tol) {
      sol.converged = true;
      break;
    }
  }
  sol.lambda = std::move(lambda);
  return sol;
}

double dual_objective(const ScoreMatrix& scores, const ConstraintSet& cs,
                      const DivergenceKind& kind, double zeta, std::span<const double> lambda) {
  const std::size_t N = scores.samples(), C = scores.classes(), K = cs.rows();
  if (lambda.size() != K) throw InvalidArgument("dual_objective: lambda has wrong length");
  const auto& kt = kernels::active();
  std::vector<double> vv(C);
  double conj_sum = 0.0;
  double reg = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    auto gi = cs.sample(i);
    for (std::size_t c = 0; c < C; ++c) {
      const double uc = kt.dot(gi.data() + c * K, lambda.data(), K);
      vv[c] = -uc;
      reg += uc * uc;
    }
    conj_sum += conj_value(kind, vv, scores.row(i));
  }
  double l2 = 0.0;
  for (double x : lambda) l2 += x * x;
  const double n = static_cast<double>(N);
  return conj_sum / n + 0.5 * zeta * (reg / n + l2);
}

double lambda_max_bound(const ScoreMatrix& scores, const ConstraintSet& cs,
                        const DivergenceKind& kind) {
  const std::size_t N = scores.samples(), C = scores.classes();
  const Matrix uniform(N, C, 1.0 / static_cast<double>(C));
  const auto mu = cs.mean_constraint(uniform);
  double slack = std::numeric_limits<double>::infinity();
  for (double m : mu) slack = std::min(slack, -m);
  if (!(slack > 0.0)) {
    throw InfeasibilityDiagnostic("lambda_max_bound: uniform classifier is not strictly feasible "
                                  "(min_k -mu_k = " + std::to_string(slack) + ")");
  }
  double div = 0.0;
  for (std::size_t i = 0; i < N; ++i) div += divergence_value(kind, uniform.row(i), scores.row(i));
  return div / static_cast<double>(N) / slack;
}

}  // namespace fairproj
