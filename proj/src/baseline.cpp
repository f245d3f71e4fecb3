#include "fairproj/baseline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fairproj/divergence.hpp"
#include "fairproj/error.hpp"

namespace fairproj {

namespace {

constexpr const char* kHeader = "fairproj-linmodel v1";

Matrix standardize(const Matrix& x, const std::vector<double>& mean,
                   const std::vector<double>& sd) {
  Matrix z(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) z(i, j) = (x(i, j) - mean[j]) / sd[j];
  }
  return z;
}

// logits for one standardized row
void affine(const Matrix& w, std::span<const double> z, std::span<double> out) {
  const std::size_t d = z.size(), C = w.cols();
  for (std::size_t c = 0; c < C; ++c) out[c] = w(d, c);
  for (std::size_t j = 0; j < d; ++j) {
    const double zj = z[j];
    if (zj == 0.0) continue;
    auto wr = w.row(j);
    for (std::size_t c = 0; c < C; ++c) out[c] += zj * wr[c];
  }
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

double logreg_objective(const Matrix& z, std::span<const int> labels, const Matrix& weights,
                        double l2, Matrix* grad) {
  const std::size_t N = z.rows(), d = z.cols(), C = weights.cols();
  if (weights.rows() != d + 1 || labels.size() != N) {
    throw InvalidArgument("logreg_objective: shape mismatch");
  }
  if (grad) *grad = Matrix(d + 1, C);
  std::vector<double> logit(C), prob(C);
  double loss = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    auto zi = z.row(i);
    affine(weights, zi, logit);
    double m = logit[0];
    for (double v : logit) m = std::max(m, v);
    double s = 0.0;
    for (double v : logit) s += std::exp(v - m);
    const int y = labels[i];
    loss += m + std::log(s) - logit[y];
    if (grad) {
      for (std::size_t c = 0; c < C; ++c) prob[c] = std::exp(logit[c] - m) / s;
      prob[y] -= 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double zj = zi[j];
        if (zj == 0.0) continue;
        auto gr = grad->row(j);
        for (std::size_t c = 0; c < C; ++c) gr[c] += zj * prob[c];
      }
      auto gb = grad->row(d);
      for (std::size_t c = 0; c < C; ++c) gb[c] += prob[c];
    }
  }
  const double n = static_cast<double>(N);
  loss /= n;
  double reg = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t c = 0; c < C; ++c) reg += weights(j, c) * weights(j, c);
  }
  loss += 0.5 * l2 * reg;
  if (grad) {
    for (double& g : grad->data()) g /= n;
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t c = 0; c < C; ++c) (*grad)(j, c) += l2 * weights(j, c);
    }
  }
  return loss;
}

LinearModel fit_logreg(const Matrix& features, std::span<const int> labels, std::size_t classes,
                       const LogRegOptions& opts) {
  const std::size_t N = features.rows(), d = features.cols(), C = classes;
  if (labels.size() != N) throw InvalidArgument("fit_logreg: labels and features differ in length");
  if (C == 0 || N < C) throw InvalidArgument("fit_logreg: need N >= C >= 1");
  if (!(opts.lr > 0.0) || opts.epochs < 0 || !(opts.l2 >= 0.0)) {
    throw InvalidArgument("fit_logreg: lr must be positive, epochs and l2 nonnegative");
  }
  for (std::size_t i = 0; i < N; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= C) {
      throw InvalidArgument("fit_logreg: label out of range at sample " + std::to_string(i));
    }
  }
  for (double x : features.data()) {
    if (!std::isfinite(x)) throw InvalidArgument("fit_logreg: non-finite feature value");
  }

  LinearModel m;
  m.features = d;
  m.classes = C;
  m.feature_means.assign(d, 0.0);
  m.feature_stds.assign(d, 1.0);
  std::vector<std::size_t> dropped;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < N; ++i) mean += features(i, j);
    mean /= static_cast<double>(N);
    double var = 0.0;
    for (std::size_t i = 0; i < N; ++i) var += (features(i, j) - mean) * (features(i, j) - mean);
    var /= static_cast<double>(N);
    m.feature_means[j] = mean;
    if (var > 1e-24 * std::max(1.0, mean * mean)) {
      m.feature_stds[j] = std::sqrt(var);
    } else {
      dropped.push_back(j);
      m.warnings.push_back("feature " + std::to_string(j) + " has zero variance; dropped");
    }
  }
  Matrix z = standardize(features, m.feature_means, m.feature_stds);
  for (std::size_t j : dropped) {
    for (std::size_t i = 0; i < N; ++i) z(i, j) = 0.0;
  }

  m.weights = Matrix(d + 1, C);
  Matrix grad;
  // Gradient step on the loss, then the exact proximal step for the ridge
  // term, which stays stable for any l2.
  const double shrink = 1.0 / (1.0 + opts.lr * opts.l2);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    logreg_objective(z, labels, m.weights, 0.0, &grad);
    for (std::size_t j = 0; j <= d; ++j) {
      for (std::size_t c = 0; c < C; ++c) {
        double w = m.weights(j, c) - opts.lr * grad(j, c);
        if (j < d) w *= shrink;
        m.weights(j, c) = w;
      }
    }
  }
  logreg_objective(z, labels, m.weights, opts.l2, &grad);
  double g2 = 0.0;
  for (double g : grad.data()) g2 += g * g;
  m.final_grad_norm = std::sqrt(g2);
  for (double w : m.weights.data()) {
    if (!std::isfinite(w)) throw NumericBlowup("fit_logreg: weights became non-finite");
  }
  return m;
}

ScoreMatrix predict_proba(const LinearModel& model, const Matrix& features, double eps) {
  if (features.cols() != model.features) {
    throw InvalidArgument("predict_proba: model expects " + std::to_string(model.features) +
                          " features, got " + std::to_string(features.cols()));
  }
  const std::size_t N = features.rows(), d = model.features, C = model.classes;
  Matrix out(N, C);
  std::vector<double> z(d), logit(C);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      z[j] = (features(i, j) - model.feature_means[j]) / model.feature_stds[j];
    }
    affine(model.weights, z, logit);
    softmax(logit, out.row(i));
  }
  return ScoreMatrix::clipped(std::move(out), eps);
}

Matrix augment_with_labels(const Matrix& features, std::span<const int> labels,
                           std::size_t classes) {
  const std::size_t N = features.rows(), d = features.cols();
  if (labels.size() != N) throw InvalidArgument("augment_with_labels: length mismatch");
  Matrix out(N, d + classes);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < d; ++j) out(i, j) = features(i, j);
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw InvalidArgument("augment_with_labels: label out of range at sample " +
                            std::to_string(i));
    }
    out(i, d + labels[i]) = 1.0;
  }
  return out;
}

GroupPredictor fit_group_model(const Matrix& features, std::span<const int> labels,
                               std::span<const int> groups, std::size_t classes,
                               std::size_t num_groups, const LogRegOptions& opts) {
  GroupPredictor g;
  g.groups = num_groups;
  g.classes = classes;
  g.model = fit_logreg(augment_with_labels(features, labels, classes), groups, num_groups, opts);
  return g;
}

std::vector<double> GroupPredictor::group_probs(const Matrix& features) const {
  const std::size_t N = features.rows(), A = groups, C = classes;
  std::vector<double> out(N * C * A);
  std::vector<int> fixed(N);
  for (std::size_t c = 0; c < C; ++c) {
    std::fill(fixed.begin(), fixed.end(), static_cast<int>(c));
    const ScoreMatrix s = predict_proba(model, augment_with_labels(features, fixed, C));
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t a = 0; a < A; ++a) out[(i * C + c) * A + a] = s(i, a);
    }
  }
  return out;
}

void save_linear_model(const LinearModel& model, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  const std::size_t d = model.features, C = model.classes;
  f << kHeader << '\n' << d << ' ' << C << '\n';
  for (std::size_t j = 0; j <= d; ++j) {
    for (std::size_t c = 0; c < C; ++c) f << (c ? " " : "") << fmt(model.weights(j, c));
    f << '\n';
  }
  for (std::size_t j = 0; j < d; ++j) f << (j ? " " : "") << fmt(model.feature_means[j]);
  f << '\n';
  for (std::size_t j = 0; j < d; ++j) f << (j ? " " : "") << fmt(model.feature_stds[j]);
  f << '\n';
  if (!f) throw Error("write failed: " + path);
}

LinearModel load_linear_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  std::string header;
  std::getline(f, header);
  if (header != kHeader) throw InvalidModel(path + ": expected header '" + kHeader + "'");
  LinearModel m;
  if (!(f >> m.features >> m.classes) || m.classes == 0) {
    throw InvalidModel(path + ": bad dimensions");
  }
  const std::size_t d = m.features, C = m.classes;
  m.weights = Matrix(d + 1, C);
  for (double& w : m.weights.data()) {
    if (!(f >> w)) throw InvalidModel(path + ": truncated weights");
  }
  m.feature_means.resize(d);
  m.feature_stds.resize(d);
  for (double& x : m.feature_means) {
    if (!(f >> x)) throw InvalidModel(path + ": truncated means");
  }
  for (double& x : m.feature_stds) {
    if (!(f >> x) || !(x > 0.0)) throw InvalidModel(path + ": bad standard deviations");
  }
  return m;
}

}  // namespace fairproj
