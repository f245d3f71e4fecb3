#include "fairproj/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fairproj/error.hpp"

namespace fairproj {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InvalidArgument("Matrix: data size " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(rows_) + "x" +
                          std::to_string(cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool clip_to_simplex(std::span<double> p, double eps) {
  const std::size_t n = p.size();
  bool clipped = false;
  double total = 0.0;
  for (double& x : p) {
    if (x < eps) {
      x = std::max(x, 0.0);
      clipped = true;
    }
    x = std::min(x, 1.0);
    total += x;
  }
  if (!(total > 0.0)) throw InvalidArgument("clip_to_simplex: row has no mass");
  if (!clipped) {
    for (double& x : p) x /= total;
    if (std::all_of(p.begin(), p.end(), [eps](double x) { return x >= eps; })) {
      return false;
    }
    clipped = true;
  }

  // Pin the smallest entries to eps until the proportional rescale of the
  // rest keeps them all >= eps. At most n passes.
  std::vector<char> pinned(n, 0);
  for (std::size_t pass = 0; pass <= n; ++pass) {
    double free_mass = 0.0;
    std::size_t n_pinned = 0;
    for (std::size_t c = 0; c < n; ++c) {
      if (pinned[c]) {
        ++n_pinned;
      } else {
        free_mass += p[c];
      }
    }
    const double budget = 1.0 - eps * static_cast<double>(n_pinned);
    bool changed = false;
    for (std::size_t c = 0; c < n; ++c) {
      if (pinned[c]) continue;
      const double scaled = free_mass > 0.0 ? p[c] * budget / free_mass : 0.0;
      if (scaled < eps) {
        pinned[c] = 1;
        changed = true;
      }
    }
    if (!changed) {
      for (std::size_t c = 0; c < n; ++c) {
        p[c] = pinned[c] ? eps : p[c] * budget / free_mass;
      }
      return true;
    }
  }
  // Only reachable when every entry is pinned, i.e. eps * n >= 1.
  throw InvalidArgument("clip_to_simplex: eps too large for row length");
}

ScoreMatrix ScoreMatrix::clipped(Matrix raw, double eps, ClipReport* report) {
  if (raw.cols() == 0) throw InvalidArgument("ScoreMatrix: zero classes");
  if (!(eps > 0.0) || eps * static_cast<double>(raw.cols()) >= 1.0) {
    throw InvalidArgument("ScoreMatrix: eps_clip must lie in (0, 1/C)");
  }
  ClipReport local;
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    auto r = raw.row(i);
    double sum = 0.0;
    for (double x : r) {
      if (!std::isfinite(x)) {
        throw InvalidArgument("ScoreMatrix: non-finite score in row " + std::to_string(i));
      }
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) ++local.renormalized_rows;
    for (double x : r) local.clipped_entries += (x < eps) ? 1 : 0;
    clip_to_simplex(r, eps);
  }
  if (report) *report = local;
  return ScoreMatrix(std::move(raw), eps);
}

ScoreMatrix ScoreMatrix::select(std::span<const std::size_t> rows) const {
  Matrix out(rows.size(), classes());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    auto src = m_.row(rows[j]);
    std::copy(src.begin(), src.end(), out.row(j).begin());
  }
  return ScoreMatrix(std::move(out), eps_);
}

}  // namespace fairproj
