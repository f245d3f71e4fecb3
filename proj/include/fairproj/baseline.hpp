#pragma once

// Multinomial logistic regression on standardized features, fit by
// deterministic full-batch gradient descent from zero weights. Serves as the
// base label classifier and as the group-membership classifier s(x, y).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairproj/matrix.hpp"

namespace fairproj {

struct LogRegOptions {
  double l2 = 1e-4;
  int epochs = 500;
  double lr = 0.1;
  /// Kept for interface symmetry; the fit itself uses no randomness.
  std::uint64_t seed = 0;
};

struct LinearModel {
  std::size_t features = 0;  // d
  std::size_t classes = 0;
  /// (d + 1) x C, last row is the bias. Rows of dropped features are zero.
  Matrix weights;
  std::vector<double> feature_means;
  /// Dropped (constant) features get std 1.
  std::vector<double> feature_stds;
  double final_grad_norm = 0.0;
  /// One line per dropped feature.
  std::vector<std::string> warnings;
};

/**
 * Mean cross-entropy plus (l2/2)|W|^2 (bias excluded) on already
 * standardized features z (N x d), weights (d+1) x C. Writes the gradient to
 * `grad` when it is non-empty.
 */
double logreg_objective(const Matrix& z, std::span<const int> labels, const Matrix& weights,
                        double l2, Matrix* grad);

LinearModel fit_logreg(const Matrix& features, std::span<const int> labels, std::size_t classes,
                       const LogRegOptions& opts = {});

/// softmax of affine scores, clipped to eps and renormalized.
ScoreMatrix predict_proba(const LinearModel& model, const Matrix& features,
                          double eps = kDefaultClip);

/// Predicts S from (X, Y): features augmented with a one-hot label block.
struct GroupPredictor {
  LinearModel model;
  std::size_t groups = 0;
  std::size_t classes = 0;

  /// s_a(x_i, c) for every sample and every candidate label c, laid out as
  /// GroupModel::group_probs.
  std::vector<double> group_probs(const Matrix& features) const;
};

GroupPredictor fit_group_model(const Matrix& features, std::span<const int> labels,
                               std::span<const int> groups, std::size_t classes,
                               std::size_t num_groups, const LogRegOptions& opts = {});

/// [features | one_hot(labels)] for the group classifier.
Matrix augment_with_labels(const Matrix& features, std::span<const int> labels,
                           std::size_t classes);

void save_linear_model(const LinearModel& model, const std::string& path);
LinearModel load_linear_model(const std::string& path);

}  // namespace fairproj
