#pragma once

// Accuracy and multi-class group-fairness metrics on hard decisions.
//
//   MEO = max_i max_{s1,s2} (|TPR_i(s1) - TPR_i(s2)| + |FPR_i(s1) - FPR_i(s2)|) / 2
//   SP  = max_i max_{s1,s2} |Rate_i(s1) - Rate_i(s2)|
//
// with TPR_i(s) = P(Yhat=i | Y=i, S=s), FPR_i(s) = P(Yhat=i | Y!=i, S=s) and
// Rate_i(s) = P(Yhat=i | S=s).

#include <cstddef>
#include <span>
#include <vector>

#include "fairproj/constraints.hpp"
#include "fairproj/matrix.hpp"

namespace fairproj {

struct EvaluationReport {
  double accuracy = 0.0;
  double meo = 0.0;
  double statistical_parity = 0.0;
  /// A x C matrices indexed (group, class).
  Matrix tpr;
  Matrix fpr;
  Matrix rate;
};

/**
 * Metrics of hard predictions. Every group must be non-empty. A TPR (FPR)
 * whose conditioning cell is empty raises UndefinedRate naming the cell.
 * With a single group MEO and SP are 0.
 */
EvaluationReport evaluate(std::span<const int> pred, std::span<const int> labels,
                          std::span<const int> groups, std::size_t classes,
                          std::size_t num_groups);

/// Row-wise argmax; ties go to the lowest class index.
std::vector<int> decide(const Matrix& scores);
std::vector<int> decide(const ScoreMatrix& scores);

/**
 * Ratio form of the Table-1 style criterion for a randomized classifier h
 * (N x C rows of P(Yhat = . | x)):
 *   sp   max_{a,c'}   |P(Yhat=c'|S=a) / P(Yhat=c') - 1|
 *   eo   max_{a,c,c'} |P(Yhat=c'|Y=c,S=a) / P(Yhat=c'|Y=c) - 1|
 *   oae  max_a        |P(Yhat=Y|S=a) / P(Yhat=Y) - 1|
 * Labels enter as weights y (N x C, one-hot for observed labels or base
 * scores as a proxy) and groups as s_a(x, c) in GroupModel layout. Events
 * with zero reference probability are skipped. The classifier satisfies the
 * criterion at alpha iff the value is <= alpha.
 */
double criterion_value(Metric metric, const Matrix& h, const Matrix& y,
                       std::span<const double> group_probs, std::size_t num_groups);

/// One-hot N x C matrix of labels.
Matrix one_hot(std::span<const int> labels, std::size_t classes);

}  // namespace fairproj
