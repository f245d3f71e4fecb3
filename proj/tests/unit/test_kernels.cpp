#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fairproj/kernels.hpp"

using namespace fairproj::kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

std::vector<Isa> vector_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::Avx2, Isa::Neon}) {
    if (supported(isa)) out.push_back(isa);
  }
  return out;
}

}  // namespace

TEST_CASE("scalar kernels on hand values") {
  const std::vector<double> x{1.0, 2.0, 3.0}, y{4.0, -5.0, 6.0};
  CHECK(scalar::dot(x.data(), y.data(), 3) == 12.0);
  std::vector<double> z = y;
  scalar::axpy(2.0, x.data(), z.data(), 3);
  CHECK(z == std::vector<double>{6.0, -1.0, 12.0});
  std::vector<double> a(9, 0.0);
  scalar::syr(1.0, x.data(), a.data(), 3);
  CHECK(a == std::vector<double>{1, 2, 3, 2, 4, 6, 3, 6, 9});
  std::vector<double> out(3);
  scalar::gemv(a.data(), x.data(), out.data(), 3, 3);
  CHECK(out == std::vector<double>{14, 28, 42});
}

TEST_CASE("vector kernels agree with the scalar reference") {
  std::mt19937_64 rng(11);
  for (Isa isa : vector_isas()) {
    const KernelTable& t = table(isa);
    CAPTURE(isa_name(isa));
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 15u, 16u, 33u, 250u}) {
      auto x = random_vec(rng, n), y = random_vec(rng, n);
      const double ref = scalar::dot(x.data(), y.data(), n);
      CHECK(std::abs(t.dot(x.data(), y.data(), n) - ref) <= 1e-13 * (1.0 + std::abs(ref) + n));

      auto z1 = y, z2 = y;
      scalar::axpy(0.37, x.data(), z1.data(), n);
      t.axpy(0.37, x.data(), z2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(z1[i] - z2[i]) <= 1e-15 * (1.0 + std::abs(z1[i])));

      std::vector<double> a1(n * n, 0.5), a2(n * n, 0.5);
      scalar::syr(-1.25, x.data(), a1.data(), n);
      t.syr(-1.25, x.data(), a2.data(), n);
      for (std::size_t i = 0; i < n * n; ++i) CHECK(std::abs(a1[i] - a2[i]) <= 1e-14);

      std::vector<double> g1(n), g2(n);
      scalar::gemv(a1.data(), x.data(), g1.data(), n, n);
      t.gemv(a1.data(), x.data(), g2.data(), n, n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(g1[i] - g2[i]) <= 1e-12 * (1.0 + n));
    }
  }
}

TEST_CASE("dispatch reports a usable table") {
  const KernelTable& t = active();
  CHECK(supported(t.isa));
  CHECK(supported(Isa::Scalar));
  CHECK(table(Isa::Scalar).dot == &scalar::dot);
  const std::vector<double> x{1.0, 1.0};
  CHECK(t.dot(x.data(), x.data(), 2) == 2.0);
}
