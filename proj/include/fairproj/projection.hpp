#pragma once

// Multiplicative tilt of base scores by a fitted dual vector:
//
//   h_c(x) = p_c(x) * phi(v_c(x) + gamma(x)),   v(x) = -G(x)^T lambda,
//
// with gamma fixed by normalization. KL gives the closed-form reweighting
// p_c e^{v_c} / sum; CE solves a 1-D root for gamma.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fairproj/constraints.hpp"
#include "fairproj/divergence.hpp"
#include "fairproj/matrix.hpp"
#include "fairproj/solver.hpp"

namespace fairproj {

/// Everything needed to tilt scores of unseen samples.
struct ProjectedModel {
  std::vector<double> lambda;
  Metric metric = Metric::StatisticalParity;
  double alpha = 0.0;
  DivergenceKind divergence = DivergenceKind::kl();
  double eps_clip = kDefaultClip;
  std::size_t groups = 0;
  std::size_t classes = 0;
  /// Marginals frozen at fit time.
  std::vector<double> p_s;
  Matrix p_s_given_y;
  Matrix cell_counts;

  // Fit diagnostics carried along for reports.
  int iterations = 0;
  bool converged = false;
  double rho = 0.0;
  double zeta = 0.0;
  std::vector<double> primal_residuals;

  /// Group model for new samples: frozen marginals plus their s(x, c).
  GroupModel group_model(std::size_t samples, std::vector<double> group_probs) const;

  /// Checks lambda >= 0, eps_clip in (0, 1/C) and the lambda length; throws InvalidModel.
  void validate() const;
};

ProjectedModel make_projected_model(const DualSolution& sol, const ConstraintSet& cs,
                                    const GroupModel& gm, const DivergenceKind& kind,
                                    double eps_clip);

/// v = -g^T lambda for a class-major K x C block (entry (k, c) at c*K + k).
void tilt_argument(std::span<const double> g, std::span<const double> lambda,
                   std::span<double> v);

/// p_c e^{v_c} / sum_j p_j e^{v_j} with v = -g^T lambda.
void tilt_kl(std::span<const double> p, std::span<const double> g,
             std::span<const double> lambda, std::span<double> out);
std::vector<double> tilt_kl(std::span<const double> p, std::span<const double> g,
                            std::span<const double> lambda);

/// p_c / (-(gamma + v_c)) with gamma < min_c(-v_c) fixed so the result sums to 1.
/// Returns gamma.
double tilt_ce(std::span<const double> p, std::span<const double> g,
               std::span<const double> lambda, std::span<double> out);
std::vector<double> tilt_ce(std::span<const double> p, std::span<const double> g,
                            std::span<const double> lambda);

/// Dispatches on the divergence; GenericF goes through conj_gradient.
void tilt(const DivergenceKind& kind, std::span<const double> p, std::span<const double> g,
          std::span<const double> lambda, std::span<double> out);

/**
 * Tilt a batch. G is rebuilt per sample from the model's metric, alpha and
 * frozen marginals together with the batch's own group probabilities.
 * Throws InvalidModel on shape or metric mismatch.
 */
Matrix project_scores(const ProjectedModel& model, const ScoreMatrix& scores,
                      const GroupModel& gm_new, std::size_t workers = 1);

void save_projected_model(const ProjectedModel& model, const std::string& path);
ProjectedModel load_projected_model(const std::string& path);

}  // namespace fairproj
