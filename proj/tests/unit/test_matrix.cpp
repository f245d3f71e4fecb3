#include <doctest.h>

#include <cmath>

#include "fairproj/error.hpp"
#include "fairproj/matrix.hpp"

using namespace fairproj;

TEST_CASE("matrix basics") {
  Matrix m(2, 3, 1.5);
  m(1, 2) = 4.0;
  CHECK(m.row(1)[2] == 4.0);
  CHECK(Matrix::identity(2) == Matrix(2, 2, {1.0, 0.0, 0.0, 1.0}));
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1.0}), InvalidArgument);
}

TEST_CASE("clip_to_simplex pins small entries at eps") {
  std::vector<double> p{0.0, 0.3, 0.7};
  CHECK(clip_to_simplex(p, 1e-3));
  CHECK(p[0] == 1e-3);
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p[1] / p[2] == doctest::Approx(0.3 / 0.7));

  std::vector<double> q{0.25, 0.75};
  CHECK_FALSE(clip_to_simplex(q));
  CHECK(q == std::vector<double>{0.25, 0.75});
}

TEST_CASE("clipped score matrix validates input") {
  ClipReport report;
  auto s = ScoreMatrix::clipped(Matrix(2, 2, {0.49, 0.49, 1.0, 0.0}), 1e-6, &report);
  CHECK(s(0, 0) == doctest::Approx(0.5));
  CHECK(s(1, 1) == 1e-6);
  CHECK(report.clipped_entries == 1);
  CHECK_THROWS_AS(ScoreMatrix::clipped(Matrix(1, 2, {NAN, 1.0})), InvalidArgument);
  CHECK_THROWS_AS(ScoreMatrix::clipped(Matrix(1, 2, {0.0, 0.0})), InvalidArgument);
  CHECK_THROWS_AS(ScoreMatrix::clipped(Matrix(1, 2, {0.5, 0.5}), 0.6), InvalidArgument);
}

TEST_CASE("select keeps the requested rows in order") {
  auto s = ScoreMatrix::clipped(Matrix(3, 2, {0.1, 0.9, 0.2, 0.8, 0.3, 0.7}));
  const std::vector<std::size_t> rows{2, 0};
  auto t = s.select(rows);
  CHECK(t.samples() == 2);
  CHECK(t(0, 0) == doctest::Approx(0.3));
  CHECK(t(1, 0) == doctest::Approx(0.1));
}
