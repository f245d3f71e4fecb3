#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fairproj/constraints.hpp"
#include "fairproj/data.hpp"
#include "fairproj/error.hpp"
#include "fairproj/metrics.hpp"

using namespace fairproj;

namespace {

ScoreMatrix random_scores(std::mt19937_64& rng, std::size_t n, std::size_t c) {
  std::gamma_distribution<double> g(1.0, 1.0);
  Matrix m(n, c);
  for (double& x : m.data()) x = g(rng) + 1e-3;
  return ScoreMatrix::clipped(std::move(m));
}

// Marginals computed from the base scores standing in for labels, the
// quantities the constraint rows divide by.
GroupModel proxy_model(const ScoreMatrix& h, std::vector<double> probs, std::size_t A) {
  const std::size_t N = h.samples(), C = h.classes();
  GroupModel gm;
  gm.samples = N;
  gm.groups = A;
  gm.classes = C;
  gm.group_probs = std::move(probs);
  gm.p_s.assign(A, 0.0);
  gm.p_s_given_y = Matrix(A, C);
  std::vector<double> yc(C, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      yc[c] += h(i, c);
      for (std::size_t a = 0; a < A; ++a) {
        const double w = gm.s(i, a, c) * h(i, c);
        gm.p_s[a] += w / N;
        gm.p_s_given_y(a, c) += w;
      }
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t a = 0; a < A; ++a) gm.p_s_given_y(a, c) /= yc[c];
  }
  return gm;
}

double max_mean(const ConstraintSet& cs, const ScoreMatrix& h) {
  auto mu = cs.mean_constraint(h.matrix());
  return *std::max_element(mu.begin(), mu.end());
}

}  // namespace

TEST_CASE("group model marginals") {
  const std::vector<int> groups{0, 0, 1, 1}, labels{0, 1, 0, 1};
  auto gm = estimate_group_model(groups, labels, 2, 2);
  CHECK(gm.p_s[0] == doctest::Approx(0.5));
  CHECK(gm.p_s[1] == doctest::Approx(0.5));
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t c = 0; c < 2; ++c) CHECK(gm.p_s_given_y(a, c) == doctest::Approx(0.5));
  }
  CHECK(gm.s(2, 1, 0) == 1.0);
  CHECK(gm.s(2, 0, 1) == 0.0);

  const std::vector<int> one{0, 0, 0};
  auto g1 = estimate_group_model(one, std::vector<int>{0, 1, 1}, 1, 2);
  CHECK(g1.p_s[0] == 1.0);
  CHECK(g1.p_s_given_y(0, 0) == 1.0);
  CHECK(g1.p_s_given_y(0, 1) == 1.0);
}

TEST_CASE("group model marginals match the generator at large N") {
  auto spec = biased_spec(100000, 2, 2, 3);
  auto ds = generate_synth(spec);
  auto gm = estimate_group_model(ds.groups, ds.labels, 2, 2);
  CHECK(std::abs(gm.p_s[0] - 0.5) < 0.01);
  // P(S=0 | Y=0) = 0.5*0.8 / (0.5*0.8 + 0.5*0.4) = 2/3.
  CHECK(std::abs(gm.p_s_given_y(0, 0) - 2.0 / 3.0) < 0.01);
  CHECK(std::abs(gm.p_s_given_y(0, 1) - 0.25) < 0.01);
}

TEST_CASE("empty cell under equalized odds is degenerate") {
  const std::vector<int> groups{0, 0, 1}, labels{0, 1, 0};
  CHECK_THROWS_AS(estimate_group_model(groups, labels, 2, 2, Metric::EqualizedOdds),
                  DegenerateMarginal);
  CHECK_NOTHROW(estimate_group_model(groups, labels, 2, 2, Metric::StatisticalParity));
  CHECK_THROWS_AS(estimate_group_model(groups, std::vector<int>{0, 2, 0}, 2, 2), InvalidArgument);
}

TEST_CASE("row counts") {
  CHECK(constraint_rows(Metric::StatisticalParity, 2, 2) == 8);
  CHECK(constraint_rows(Metric::EqualizedOdds, 2, 3) == 36);
  CHECK(constraint_rows(Metric::OverallAccuracyEquality, 5, 4) == 10);
  CHECK(constraint_rows(Metric::EqualizedOdds, 5, 5) == 250);
  CHECK(metric_from_name("eo") == Metric::EqualizedOdds);
  CHECK(metric_name(Metric::OverallAccuracyEquality) == "oae");
  CHECK_THROWS_AS(metric_from_name("xyz"), InvalidArgument);
}

TEST_CASE("statistical parity rows by hand") {
  const double alpha = 0.1;
  auto scores = ScoreMatrix::clipped(Matrix(2, 2, {0.6, 0.4, 0.3, 0.7}));
  auto gm = estimate_group_model(std::vector<int>{0, 1}, std::vector<int>{0, 1}, 2, 2);
  auto cs = build_sp(scores, gm, alpha);
  REQUIRE(cs.rows() == 8);
  // Sample 0 is in the first group; rows indexed (delta * A + a) * C + c'.
  const std::size_t k_d0_a0_c0 = 0, k_d1_a0_c0 = 4, k_d0_a1_c0 = 2;
  CHECK(cs.g(0, k_d0_a0_c0, 0) == doctest::Approx(1.0 - alpha));
  CHECK(cs.g(0, k_d0_a0_c0, 1) == 0.0);
  CHECK(cs.g(0, k_d1_a0_c0, 0) == doctest::Approx(-1.0 - alpha));
  CHECK(cs.g(0, k_d0_a1_c0, 0) == doctest::Approx(-1.0 - alpha));
  CHECK(cs.row_labels()[k_d1_a0_c0].delta == 1);
  CHECK(cs.row_labels()[k_d0_a1_c0].group == 1);
}

TEST_CASE("single group constraints are strictly slack") {
  std::mt19937_64 rng(5);
  auto h = random_scores(rng, 40, 3);
  std::vector<int> groups(40, 0), labels(40);
  for (std::size_t i = 0; i < 40; ++i) labels[i] = static_cast<int>(i % 3);
  auto gm = estimate_group_model(groups, labels, 1, 3);
  const double alpha = 0.07;

  auto sp = build_sp(h, gm, alpha);
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t k = 0; k < sp.rows(); ++k) {
      const auto cp = static_cast<std::size_t>(sp.row_labels()[k].predicted);
      for (std::size_t c = 0; c < 3; ++c) {
        CHECK(sp.g(i, k, c) == doctest::Approx(c == cp ? -alpha : 0.0).epsilon(1e-12));
      }
    }
  }

  auto eo = build_eo(h, gm, alpha);
  CHECK(eo.rows() == 18);
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t k = 0; k < eo.rows(); ++k) {
      const auto& l = eo.row_labels()[k];
      for (std::size_t c = 0; c < 3; ++c) {
        const double expect = c == static_cast<std::size_t>(l.predicted) ? -alpha * h(i, l.label) : 0.0;
        CHECK(std::abs(eo.g(i, k, c) - expect) <= 1e-12);
      }
    }
  }

  auto oae = build_oae(h, gm, alpha);
  CHECK(oae.rows() == 2);
  for (double mu : oae.mean_constraint(h.matrix())) {
    double expect = 0.0;
    for (std::size_t i = 0; i < 40; ++i) {
      for (std::size_t c = 0; c < 3; ++c) expect -= alpha * h(i, c) * h(i, c) / 40.0;
    }
    CHECK(mu == doctest::Approx(expect).epsilon(1e-12));
    CHECK(mu < 0.0);
  }
  for (double mu : sp.mean_constraint(h.matrix())) CHECK(mu < 0.0);
  for (double mu : eo.mean_constraint(h.matrix())) CHECK(mu < 0.0);
}

TEST_CASE("mean constraint agrees with the ratio criterion") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int checked = 0, satisfied = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t N = 30 + trial * 7, C = 2 + trial % 3, A = 2 + trial % 2;
    auto h = random_scores(rng, N, C);
    std::vector<int> groups(N);
    for (std::size_t i = 0; i < N; ++i) groups[i] = static_cast<int>(rng() % A);
    // Soft group probabilities on odd trials.
    std::vector<double> probs = indicator_group_probs(groups, A, C);
    if (trial % 2 == 1) {
      for (std::size_t i = 0; i < N * C; ++i) {
        double sum = 0.0;
        for (std::size_t a = 0; a < A; ++a) sum += (probs[i * A + a] += 0.3 * unif(rng));
        for (std::size_t a = 0; a < A; ++a) probs[i * A + a] /= sum;
      }
    }
    auto gm = proxy_model(h, probs, A);
    for (Metric m : {Metric::StatisticalParity, Metric::EqualizedOdds,
                     Metric::OverallAccuracyEquality}) {
      const double crit = criterion_value(m, h.matrix(), h.matrix(), gm.group_probs, A);
      for (double alpha : {0.5 * crit, crit * 1.5 + 1e-3, 0.01 + unif(rng) * 0.5}) {
        if (alpha <= 0.0 || std::abs(alpha - crit) < 1e-9) continue;
        auto cs = build_constraints(m, h, gm, alpha);
        const bool fair = max_mean(cs, h) <= 1e-13;
        CAPTURE(metric_name(m));
        CAPTURE(crit);
        CAPTURE(alpha);
        CHECK(fair == (crit <= alpha));
        ++checked;
        satisfied += fair ? 1 : 0;
      }
    }
  }
  CHECK(checked > 100);
  CHECK(satisfied > 0);
  CHECK(satisfied < checked);
}

TEST_CASE("zero group marginal is degenerate") {
  auto h = ScoreMatrix::clipped(Matrix(2, 2, {0.5, 0.5, 0.5, 0.5}));
  auto gm = estimate_group_model(std::vector<int>{0, 0}, std::vector<int>{0, 1}, 2, 2);
  gm.p_s = {1.0, 0.0};
  CHECK_THROWS_AS(build_sp(h, gm, 0.1), DegenerateMarginal);
  CHECK_THROWS_AS(build_oae(h, gm, 0.1), DegenerateMarginal);
  CHECK_THROWS_AS(build_sp(h, estimate_group_model(std::vector<int>{0, 1}, std::vector<int>{0, 1}, 2, 2), 0.0),
                  InvalidArgument);
}

TEST_CASE("all entries are finite and layout is class-major") {
  std::mt19937_64 rng(2);
  auto h = random_scores(rng, 10, 3);
  std::vector<int> groups{0, 1, 2, 0, 1, 2, 0, 1, 2, 0}, labels{0, 1, 2, 1, 2, 0, 2, 0, 1, 0};
  auto gm = estimate_group_model(groups, labels, 3, 3);
  auto cs = build_eo(h, gm, 0.2);
  for (std::size_t i = 0; i < 10; ++i) {
    auto gi = cs.sample(i);
    for (std::size_t k = 0; k < cs.rows(); ++k) {
      for (std::size_t c = 0; c < 3; ++c) {
        CHECK(std::isfinite(gi[c * cs.rows() + k]));
        CHECK(gi[c * cs.rows() + k] == cs.g(i, k, c));
      }
    }
  }
}
