#include "fairproj/constraints.hpp"

#include <algorithm>
#include <cmath>

#include "fairproj/error.hpp"

namespace fairproj {

namespace {

constexpr double kMarginalFloor = 1e-12;

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("constraints: alpha must be positive and finite");
  }
}

void check_shapes(const ScoreMatrix& scores, const GroupModel& gm) {
  if (scores.samples() != gm.samples || scores.classes() != gm.classes) {
    throw InvalidArgument("constraints: score matrix is " + std::to_string(scores.samples()) +
                          "x" + std::to_string(scores.classes()) + " but group model covers " +
                          std::to_string(gm.samples) + " samples and " +
                          std::to_string(gm.classes) + " classes");
  }
  if (gm.group_probs.size() != gm.samples * gm.classes * gm.groups) {
    throw InvalidArgument("constraints: group probability tensor has wrong size");
  }
}

void check_group_marginals(const GroupModel& gm) {
  for (std::size_t a = 0; a < gm.groups; ++a) {
    bool empty = gm.p_s[a] <= 10 * kMarginalFloor;
    if (!gm.cell_counts.empty()) {
      double n = 0.0;
      for (std::size_t c = 0; c < gm.classes; ++c) n += gm.cell_counts(a, c);
      empty = empty || n == 0.0;
    }
    if (empty) {
      throw DegenerateMarginal("P_S(" + std::to_string(a) + ") is zero: group " +
                               std::to_string(a) + " has no samples");
    }
  }
}

void check_cell_marginals(const GroupModel& gm) {
  for (std::size_t a = 0; a < gm.groups; ++a) {
    for (std::size_t c = 0; c < gm.classes; ++c) {
      const bool empty = gm.p_s_given_y(a, c) <= 10 * kMarginalFloor ||
                         (!gm.cell_counts.empty() && gm.cell_counts(a, c) == 0.0);
      if (empty) {
        throw DegenerateMarginal("P_{S|Y=" + std::to_string(c) + "}(" + std::to_string(a) +
                                 ") is zero: no samples with group " + std::to_string(a) +
                                 " and label " + std::to_string(c));
      }
    }
  }
}

GroupModel marginals_from_ids(std::span<const int> groups, std::span<const int> labels,
                              std::size_t num_groups, std::size_t classes) {
  if (groups.size() != labels.size()) {
    throw InvalidArgument("estimate_group_model: groups and labels differ in length");
  }
  if (num_groups == 0 || classes == 0) {
    throw InvalidArgument("estimate_group_model: need at least one group and one class");
  }
  GroupModel gm;
  gm.samples = groups.size();
  gm.groups = num_groups;
  gm.classes = classes;
  gm.cell_counts = Matrix(num_groups, classes);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const int a = groups[i];
    const int c = labels[i];
    if (a < 0 || static_cast<std::size_t>(a) >= num_groups) {
      throw InvalidArgument("estimate_group_model: group id " + std::to_string(a) +
                            " out of range at sample " + std::to_string(i));
    }
    if (c < 0 || static_cast<std::size_t>(c) >= classes) {
      throw InvalidArgument("estimate_group_model: label " + std::to_string(c) +
                            " out of range at sample " + std::to_string(i));
    }
    gm.cell_counts(a, c) += 1.0;
  }

  gm.p_s.assign(num_groups, 0.0);
  double total = 0.0;
  for (std::size_t a = 0; a < num_groups; ++a) {
    for (std::size_t c = 0; c < classes; ++c) gm.p_s[a] += gm.cell_counts(a, c);
    gm.p_s[a] += kMarginalFloor * std::max<double>(1.0, static_cast<double>(groups.size()));
    total += gm.p_s[a];
  }
  for (double& x : gm.p_s) x /= total;

  gm.p_s_given_y = Matrix(num_groups, classes);
  for (std::size_t c = 0; c < classes; ++c) {
    double col = 0.0;
    for (std::size_t a = 0; a < num_groups; ++a) {
      gm.p_s_given_y(a, c) =
          gm.cell_counts(a, c) +
          kMarginalFloor * std::max<double>(1.0, static_cast<double>(groups.size()));
      col += gm.p_s_given_y(a, c);
    }
    for (std::size_t a = 0; a < num_groups; ++a) gm.p_s_given_y(a, c) /= col;
  }
  return gm;
}

}  // namespace

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::StatisticalParity:
      return "sp";
    case Metric::EqualizedOdds:
      return "eo";
    case Metric::OverallAccuracyEquality:
      return "oae";
  }
  return "unknown";
}

Metric metric_from_name(const std::string& name) {
  if (name == "sp" || name == "SP") return Metric::StatisticalParity;
  if (name == "eo" || name == "EO" || name == "meo") return Metric::EqualizedOdds;
  if (name == "oae" || name == "OAE") return Metric::OverallAccuracyEquality;
  throw InvalidArgument("unknown metric '" + name + "' (expected sp, eo or oae)");
}

GroupModel GroupModel::with_probs(std::size_t n, std::vector<double> probs) const {
  if (probs.size() != n * classes * groups) {
    throw InvalidArgument("GroupModel::with_probs: tensor size does not match samples");
  }
  GroupModel out = *this;
  out.samples = n;
  out.group_probs = std::move(probs);
  return out;
}

std::vector<double> indicator_group_probs(std::span<const int> groups, std::size_t num_groups,
                                          std::size_t classes) {
  std::vector<double> probs(groups.size() * classes * num_groups, 0.0);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const int a = groups[i];
    if (a < 0 || static_cast<std::size_t>(a) >= num_groups) {
      throw InvalidArgument("group id " + std::to_string(a) + " out of range at sample " +
                            std::to_string(i));
    }
    for (std::size_t c = 0; c < classes; ++c) probs[(i * classes + c) * num_groups + a] = 1.0;
  }
  return probs;
}

GroupModel estimate_group_model(std::span<const int> groups, std::span<const int> labels,
                                std::size_t num_groups, std::size_t classes,
                                std::optional<Metric> for_metric) {
  GroupModel gm = marginals_from_ids(groups, labels, num_groups, classes);
  gm.group_probs = indicator_group_probs(groups, num_groups, classes);
  if (for_metric == Metric::EqualizedOdds) check_cell_marginals(gm);
  return gm;
}

GroupModel estimate_group_model(std::vector<double> group_probs, std::span<const int> groups,
                                std::span<const int> labels, std::size_t num_groups,
                                std::size_t classes, std::optional<Metric> for_metric) {
  GroupModel gm = marginals_from_ids(groups, labels, num_groups, classes);
  if (group_probs.size() != groups.size() * classes * num_groups) {
    throw InvalidArgument("estimate_group_model: group probability tensor has wrong size");
  }
  gm.group_probs = std::move(group_probs);
  if (for_metric == Metric::EqualizedOdds) check_cell_marginals(gm);
  return gm;
}

std::string RowLabel::to_string() const {
  std::string s = "(delta=" + std::to_string(delta) + ", a=" + std::to_string(group);
  if (label >= 0) s += ", c=" + std::to_string(label);
  if (predicted >= 0) s += ", c'=" + std::to_string(predicted);
  return s + ")";
}

ConstraintSet::ConstraintSet(Metric metric, double alpha, std::size_t samples, std::size_t rows,
                             std::size_t classes, std::vector<RowLabel> labels)
    : metric_(metric),
      alpha_(alpha),
      samples_(samples),
      rows_(rows),
      classes_(classes),
      g_(samples * rows * classes, 0.0),
      labels_(std::move(labels)) {
  if (labels_.size() != rows_) throw InvalidArgument("ConstraintSet: row label count mismatch");
}

std::vector<double> ConstraintSet::mean_constraint(const Matrix& h) const {
  if (h.rows() != samples_ || h.cols() != classes_) {
    throw InvalidArgument("mean_constraint: classifier output has wrong shape");
  }
  std::vector<double> mu(rows_, 0.0);
  for (std::size_t i = 0; i < samples_; ++i) {
    auto gi = sample(i);
    for (std::size_t c = 0; c < classes_; ++c) {
      const double hc = h(i, c);
      for (std::size_t k = 0; k < rows_; ++k) mu[k] += gi[c * rows_ + k] * hc;
    }
  }
  for (double& x : mu) x /= static_cast<double>(samples_);
  return mu;
}

std::size_t constraint_rows(Metric metric, std::size_t groups, std::size_t classes) {
  switch (metric) {
    case Metric::StatisticalParity:
      return 2 * groups * classes;
    case Metric::EqualizedOdds:
      return 2 * groups * classes * classes;
    case Metric::OverallAccuracyEquality:
      return 2 * groups;
  }
  return 0;
}

ConstraintSet build_sp(const ScoreMatrix& scores, const GroupModel& gm, double alpha) {
  check_alpha(alpha);
  check_shapes(scores, gm);
  check_group_marginals(gm);
  const std::size_t A = gm.groups, C = gm.classes, N = gm.samples;
  const std::size_t K = constraint_rows(Metric::StatisticalParity, A, C);

  std::vector<RowLabel> labels;
  labels.reserve(K);
  for (int delta = 0; delta < 2; ++delta) {
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t cp = 0; cp < C; ++cp) {
        labels.push_back({delta, static_cast<int>(a), -1, static_cast<int>(cp)});
      }
    }
  }
  ConstraintSet cs(Metric::StatisticalParity, alpha, N, K, C, std::move(labels));
  std::vector<double> weight(A);
  for (std::size_t i = 0; i < N; ++i) {
    auto h = scores.row(i);
    for (std::size_t a = 0; a < A; ++a) {
      double w = 0.0;
      for (std::size_t c = 0; c < C; ++c) w += gm.s(i, a, c) * h[c];
      weight[a] = w / gm.p_s[a];
    }
    auto gi = cs.sample(i);
    for (int delta = 0; delta < 2; ++delta) {
      const double sign = delta == 0 ? 1.0 : -1.0;
      for (std::size_t a = 0; a < A; ++a) {
        const double value = sign * weight[a] - (alpha + sign);
        for (std::size_t cp = 0; cp < C; ++cp) {
          const std::size_t k = (delta * A + a) * C + cp;
          gi[cp * K + k] = value;
        }
      }
    }
  }
  return cs;
}

ConstraintSet build_eo(const ScoreMatrix& scores, const GroupModel& gm, double alpha) {
  check_alpha(alpha);
  check_shapes(scores, gm);
  check_cell_marginals(gm);
  const std::size_t A = gm.groups, C = gm.classes, N = gm.samples;
  const std::size_t K = constraint_rows(Metric::EqualizedOdds, A, C);

  std::vector<RowLabel> labels;
  labels.reserve(K);
  for (int delta = 0; delta < 2; ++delta) {
    for (std::size_t a = 0; a < A; ++a) {
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t cp = 0; cp < C; ++cp) {
          labels.push_back(
              {delta, static_cast<int>(a), static_cast<int>(c), static_cast<int>(cp)});
        }
      }
    }
  }
  ConstraintSet cs(Metric::EqualizedOdds, alpha, N, K, C, std::move(labels));
  for (std::size_t i = 0; i < N; ++i) {
    auto h = scores.row(i);
    auto gi = cs.sample(i);
    for (int delta = 0; delta < 2; ++delta) {
      const double sign = delta == 0 ? 1.0 : -1.0;
      for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t c = 0; c < C; ++c) {
          const double value =
              sign * gm.s(i, a, c) * h[c] / gm.p_s_given_y(a, c) - (alpha + sign) * h[c];
          for (std::size_t cp = 0; cp < C; ++cp) {
            const std::size_t k = ((delta * A + a) * C + c) * C + cp;
            gi[cp * K + k] = value;
          }
        }
      }
    }
  }
  return cs;
}

ConstraintSet build_oae(const ScoreMatrix& scores, const GroupModel& gm, double alpha) {
  check_alpha(alpha);
  check_shapes(scores, gm);
  check_group_marginals(gm);
  const std::size_t A = gm.groups, C = gm.classes, N = gm.samples;
  const std::size_t K = constraint_rows(Metric::OverallAccuracyEquality, A, C);

  std::vector<RowLabel> labels;
  labels.reserve(K);
  for (int delta = 0; delta < 2; ++delta) {
    for (std::size_t a = 0; a < A; ++a) labels.push_back({delta, static_cast<int>(a), -1, -1});
  }
  ConstraintSet cs(Metric::OverallAccuracyEquality, alpha, N, K, C, std::move(labels));
  for (std::size_t i = 0; i < N; ++i) {
    auto h = scores.row(i);
    auto gi = cs.sample(i);
    for (int delta = 0; delta < 2; ++delta) {
      const double sign = delta == 0 ? 1.0 : -1.0;
      for (std::size_t a = 0; a < A; ++a) {
        const std::size_t k = delta * A + a;
        for (std::size_t c = 0; c < C; ++c) {
          gi[c * K + k] = sign * gm.s(i, a, c) * h[c] / gm.p_s[a] - (alpha + sign) * h[c];
        }
      }
    }
  }
  return cs;
}

ConstraintSet build_constraints(Metric metric, const ScoreMatrix& scores, const GroupModel& gm,
                                double alpha) {
  switch (metric) {
    case Metric::StatisticalParity:
      return build_sp(scores, gm, alpha);
    case Metric::EqualizedOdds:
      return build_eo(scores, gm, alpha);
    case Metric::OverallAccuracyEquality:
      return build_oae(scores, gm, alpha);
  }
  throw InvalidArgument("build_constraints: unknown metric");
}

}  // namespace fairproj
