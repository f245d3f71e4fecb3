#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fairproj {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  static Matrix identity(std::size_t n);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Floor applied to base scores before projection.
inline constexpr double kDefaultClip = 1e-6;

/// What clipping did to a batch of rows.
struct ClipReport {
  std::size_t clipped_entries = 0;
  std::size_t renormalized_rows = 0;
};

/**
 * Clip a score vector to [eps, 1] and renormalize in place.
 *
 * Entries that fall below eps after rescaling are pinned to eps and the
 * remaining mass is redistributed proportionally, so the result is a simplex
 * vector with every entry >= eps. Negative inputs are treated as zero.
 * Returns true if any entry was clipped.
 */
bool clip_to_simplex(std::span<double> p, double eps = kDefaultClip);

/**
 * N x C row-stochastic matrix of base-classifier outputs with every entry
 * bounded away from zero.
 */
class ScoreMatrix {
 public:
  ScoreMatrix() = default;

  /// Clips and renormalizes each row of `raw`. Throws InvalidArgument on
  /// non-finite entries, an all-zero row, or eps outside (0, 1/C).
  static ScoreMatrix clipped(Matrix raw, double eps = kDefaultClip,
                             ClipReport* report = nullptr);

  std::size_t samples() const noexcept { return m_.rows(); }
  std::size_t classes() const noexcept { return m_.cols(); }
  std::span<const double> row(std::size_t i) const { return m_.row(i); }
  double operator()(std::size_t i, std::size_t c) const { return m_(i, c); }
  const Matrix& matrix() const noexcept { return m_; }
  double eps() const noexcept { return eps_; }

  /// Row subset in the given order.
  ScoreMatrix select(std::span<const std::size_t> rows) const;

 private:
  explicit ScoreMatrix(Matrix m, double eps) : m_(std::move(m)), eps_(eps) {}
  Matrix m_;
  double eps_ = kDefaultClip;
};

}  // namespace fairproj
