#pragma once

// Per-sample constraint matrices G(x) in R^{K x C} for the group-fairness
// criteria, so that a classifier h is fair at tolerance alpha when
// E[G(X) h(X)] <= 0 row-wise.
//
//   statistical parity   |P(Yhat=c'|S=a) / P(Yhat=c') - 1| <= alpha        K = 2AC
//   equalized odds       |P(Yhat=c'|Y=c,S=a) / P(Yhat=c'|Y=c) - 1| <= alpha K = 2AC^2
//   overall accuracy eq. |P(Yhat=Y|S=a) / P(Yhat=Y) - 1| <= alpha          K = 2A
//
// Each two-sided bound becomes a pair of rows indexed by delta in {0, 1}.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairproj/matrix.hpp"

namespace fairproj {

enum class Metric { StatisticalParity, EqualizedOdds, OverallAccuracyEquality };

/// "sp", "eo" or "oae".
std::string metric_name(Metric m);
Metric metric_from_name(const std::string& name);

/// Group-membership probabilities s_a(x_i, c) plus the marginals the rows
/// divide by.
struct GroupModel {
  std::size_t samples = 0;
  std::size_t groups = 0;   // A
  std::size_t classes = 0;  // C
  /// s_a(x_i, c) at index (i * C + c) * A + a; each (i, c) slice sums to 1.
  std::vector<double> group_probs;
  /// P_S(a), length A.
  std::vector<double> p_s;
  /// P_{S|Y=c}(a), A x C; each column sums to 1.
  Matrix p_s_given_y;
  /// Raw (group, label) counts behind the marginals, A x C.
  Matrix cell_counts;

  double s(std::size_t i, std::size_t a, std::size_t c) const {
    return group_probs[(i * classes + c) * groups + a];
  }

  /// Same marginals, new samples: the shape used at test time.
  GroupModel with_probs(std::size_t samples, std::vector<double> probs) const;
};

/// Indicator tensor s_a(x_i, c) = 1{a = groups[i]}.
std::vector<double> indicator_group_probs(std::span<const int> groups, std::size_t num_groups,
                                          std::size_t classes);

/**
 * Empirical marginals from observed group ids; s is the indicator tensor.
 * Frequencies get an additive 1e-12 floor before renormalizing. With
 * `for_metric` = EqualizedOdds every (group, class) cell must be non-empty.
 */
GroupModel estimate_group_model(std::span<const int> groups, std::span<const int> labels,
                                std::size_t num_groups, std::size_t classes,
                                std::optional<Metric> for_metric = std::nullopt);

/// As above, but s comes from a fitted group classifier (layout as
/// GroupModel::group_probs) while the marginals still use the observed ids.
GroupModel estimate_group_model(std::vector<double> group_probs, std::span<const int> groups,
                                std::span<const int> labels, std::size_t num_groups,
                                std::size_t classes,
                                std::optional<Metric> for_metric = std::nullopt);

/// Label tuple of one constraint row; unused fields are -1.
struct RowLabel {
  int delta = 0;
  int group = -1;
  int label = -1;      // c (equalized odds only)
  int predicted = -1;  // c' (statistical parity, equalized odds)

  std::string to_string() const;
};

class ConstraintSet {
 public:
  ConstraintSet() = default;
  ConstraintSet(Metric metric, double alpha, std::size_t samples, std::size_t rows,
                std::size_t classes, std::vector<RowLabel> labels);

  Metric metric() const noexcept { return metric_; }
  double alpha() const noexcept { return alpha_; }
  std::size_t samples() const noexcept { return samples_; }
  std::size_t rows() const noexcept { return rows_; }  // K
  std::size_t classes() const noexcept { return classes_; }
  const std::vector<RowLabel>& row_labels() const noexcept { return labels_; }

  /// G_i stored class-major: entry (k, c) at [c * K + k].
  std::span<const double> sample(std::size_t i) const {
    return {g_.data() + i * classes_ * rows_, classes_ * rows_};
  }
  std::span<double> sample(std::size_t i) {
    return {g_.data() + i * classes_ * rows_, classes_ * rows_};
  }
  double g(std::size_t i, std::size_t k, std::size_t c) const {
    return g_[(i * classes_ + c) * rows_ + k];
  }

  /// mu_k = (1/N) sum_i (G_i h_i)_k for row-stochastic h (N x C).
  std::vector<double> mean_constraint(const Matrix& h) const;

 private:
  Metric metric_ = Metric::StatisticalParity;
  double alpha_ = 0.0;
  std::size_t samples_ = 0;
  std::size_t rows_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> g_;
  std::vector<RowLabel> labels_;
};

std::size_t constraint_rows(Metric metric, std::size_t groups, std::size_t classes);

ConstraintSet build_sp(const ScoreMatrix& scores, const GroupModel& gm, double alpha);
ConstraintSet build_eo(const ScoreMatrix& scores, const GroupModel& gm, double alpha);
ConstraintSet build_oae(const ScoreMatrix& scores, const GroupModel& gm, double alpha);
ConstraintSet build_constraints(Metric metric, const ScoreMatrix& scores, const GroupModel& gm,
                                double alpha);

}  // namespace fairproj
