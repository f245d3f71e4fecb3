#include "fairproj/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fairproj/error.hpp"

namespace fairproj {

namespace {

void check_ids(std::span<const int> ids, std::size_t bound, const char* what) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= bound) {
      throw InvalidArgument(std::string("evaluate: ") + what + " " + std::to_string(ids[i]) +
                            " out of range at sample " + std::to_string(i));
    }
  }
}

double max_pair_gap(const Matrix& m, std::size_t col) {
  double lo = m(0, col), hi = m(0, col);
  for (std::size_t a = 1; a < m.rows(); ++a) {
    lo = std::min(lo, m(a, col));
    hi = std::max(hi, m(a, col));
  }
  return hi - lo;
}

double ratio_gap(double num, double den, double ref_num, double ref_den) {
  if (den <= 0.0 || ref_den <= 0.0 || ref_num <= 0.0) return 0.0;
  return std::abs((num / den) / (ref_num / ref_den) - 1.0);
}

}  // namespace

EvaluationReport evaluate(std::span<const int> pred, std::span<const int> labels,
                          std::span<const int> groups, std::size_t classes,
                          std::size_t num_groups) {
  const std::size_t N = pred.size();
  if (labels.size() != N || groups.size() != N) {
    throw InvalidArgument("evaluate: pred, labels and groups differ in length");
  }
  if (N == 0 || classes == 0 || num_groups == 0) throw InvalidArgument("evaluate: empty input");
  check_ids(pred, classes, "prediction");
  check_ids(labels, classes, "label");
  check_ids(groups, num_groups, "group");

  const std::size_t A = num_groups, C = classes;
  // cell(a, y) counts, and hits(a, y, yhat) flattened.
  Matrix cell(A, C);
  std::vector<double> hits(A * C * C, 0.0);
  std::vector<double> group_size(A, 0.0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < N; ++i) {
    cell(groups[i], labels[i]) += 1.0;
    hits[(groups[i] * C + labels[i]) * C + pred[i]] += 1.0;
    group_size[groups[i]] += 1.0;
    correct += pred[i] == labels[i];
  }
  for (std::size_t a = 0; a < A; ++a) {
    if (group_size[a] == 0.0) {
      throw UndefinedRate("evaluate: group " + std::to_string(a) + " has no samples");
    }
  }

  EvaluationReport r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(N);
  r.tpr = Matrix(A, C);
  r.fpr = Matrix(A, C);
  r.rate = Matrix(A, C);
  for (std::size_t a = 0; a < A; ++a) {
    for (std::size_t i = 0; i < C; ++i) {
      double predicted_i = 0.0, tp = 0.0, fp = 0.0;
      for (std::size_t y = 0; y < C; ++y) {
        const double n = hits[(a * C + y) * C + i];
        predicted_i += n;
        (y == i ? tp : fp) += n;
      }
      const double pos = cell(a, i);
      const double neg = group_size[a] - pos;
      r.rate(a, i) = predicted_i / group_size[a];
      if (A > 1) {
        if (pos == 0.0) {
          throw UndefinedRate("evaluate: TPR undefined, no samples with group " +
                              std::to_string(a) + " and label " + std::to_string(i));
        }
        if (neg == 0.0) {
          throw UndefinedRate("evaluate: FPR undefined, no samples with group " +
                              std::to_string(a) + " and label != " + std::to_string(i));
        }
      }
      r.tpr(a, i) = pos > 0.0 ? tp / pos : 0.0;
      r.fpr(a, i) = neg > 0.0 ? fp / neg : 0.0;
    }
  }
  if (A > 1) {
    for (std::size_t i = 0; i < C; ++i) {
      // Over pairs the max of |dTPR| + |dFPR| need not pair the extremes of
      // each, so enumerate.
      for (std::size_t s1 = 0; s1 < A; ++s1) {
        for (std::size_t s2 = s1 + 1; s2 < A; ++s2) {
          const double eo = 0.5 * (std::abs(r.tpr(s1, i) - r.tpr(s2, i)) +
                                   std::abs(r.fpr(s1, i) - r.fpr(s2, i)));
          r.meo = std::max(r.meo, eo);
        }
      }
      r.statistical_parity = std::max(r.statistical_parity, max_pair_gap(r.rate, i));
    }
  }
  return r;
}

std::vector<int> decide(const Matrix& scores) {
  std::vector<int> out(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    auto row = scores.row(i);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

std::vector<int> decide(const ScoreMatrix& scores) { return decide(scores.matrix()); }

Matrix one_hot(std::span<const int> labels, std::size_t classes) {
  Matrix m(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw InvalidArgument("one_hot: label out of range at sample " + std::to_string(i));
    }
    m(i, labels[i]) = 1.0;
  }
  return m;
}

double criterion_value(Metric metric, const Matrix& h, const Matrix& y,
                       std::span<const double> group_probs, std::size_t num_groups) {
  const std::size_t N = h.rows(), C = h.cols(), A = num_groups;
  if (y.rows() != N || y.cols() != C || group_probs.size() != N * C * A) {
    throw InvalidArgument("criterion_value: shapes disagree");
  }
  auto s = [&](std::size_t i, std::size_t a, std::size_t c) {
    return group_probs[(i * C + c) * A + a];
  };
  double worst = 0.0;
  switch (metric) {
    case Metric::StatisticalParity: {
      // Group weight of x is sum_c s_a(x, c) y_c.
      Matrix joint(A, C);
      std::vector<double> pa(A, 0.0), pc(C, 0.0);
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t a = 0; a < A; ++a) {
          double w = 0.0;
          for (std::size_t c = 0; c < C; ++c) w += s(i, a, c) * y(i, c);
          pa[a] += w;
          for (std::size_t cp = 0; cp < C; ++cp) joint(a, cp) += w * h(i, cp);
        }
        for (std::size_t cp = 0; cp < C; ++cp) pc[cp] += h(i, cp);
      }
      for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t cp = 0; cp < C; ++cp) {
          worst = std::max(worst, ratio_gap(joint(a, cp), pa[a], pc[cp], double(N)));
        }
      }
      break;
    }
    case Metric::EqualizedOdds: {
      // (a, c, c') joint and (a, c) weights, plus the (c, c') reference.
      std::vector<double> joint(A * C * C, 0.0), cell(A * C, 0.0), ref(C * C, 0.0), yc(C, 0.0);
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t c = 0; c < C; ++c) {
          yc[c] += y(i, c);
          for (std::size_t cp = 0; cp < C; ++cp) ref[c * C + cp] += y(i, c) * h(i, cp);
          for (std::size_t a = 0; a < A; ++a) {
            const double w = s(i, a, c) * y(i, c);
            cell[a * C + c] += w;
            for (std::size_t cp = 0; cp < C; ++cp) joint[(a * C + c) * C + cp] += w * h(i, cp);
          }
        }
      }
      for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t cp = 0; cp < C; ++cp) {
            worst = std::max(worst, ratio_gap(joint[(a * C + c) * C + cp], cell[a * C + c],
                                              ref[c * C + cp], yc[c]));
          }
        }
      }
      break;
    }
    case Metric::OverallAccuracyEquality: {
      std::vector<double> hit(A, 0.0), pa(A, 0.0);
      double total_hit = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t c = 0; c < C; ++c) {
          const double agree = y(i, c) * h(i, c);
          total_hit += agree;
          for (std::size_t a = 0; a < A; ++a) {
            hit[a] += s(i, a, c) * agree;
            pa[a] += s(i, a, c) * y(i, c);
          }
        }
      }
      for (std::size_t a = 0; a < A; ++a) {
        worst = std::max(worst, ratio_gap(hit[a], pa[a], total_hit, double(N)));
      }
      break;
    }
  }
  return worst;
}

}  // namespace fairproj
