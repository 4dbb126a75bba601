#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "pmcmc/measures.hpp"
#include "pmcmc/rng.hpp"

using namespace pmcmc;

TEST_CASE("normalize and Boltzmann-Gibbs") {
  FiniteMeasure mu(Eigen::Vector3d(1.0, 2.0, 1.0));
  const FiniteMeasure p = normalize(mu);
  CHECK(p.mass() == doctest::Approx(1.0));
  CHECK(p[1] == doctest::Approx(0.5));
  const Eigen::VectorXd G = Eigen::Vector3d(2.0, 0.0, 1.0);
  const FiniteMeasure psi = boltzmann_gibbs(G, p);
  CHECK(psi[0] == doctest::Approx(0.5 / 0.75));
  CHECK(psi[1] == 0.0);
  CHECK(psi[2] == doctest::Approx(0.25 / 0.75));
  CHECK_THROWS_AS(boltzmann_gibbs(Eigen::VectorXd(Eigen::Vector3d(0, 0, 0)), p), ZeroMass);
  CHECK_THROWS_AS(boltzmann_gibbs(Eigen::VectorXd(Eigen::Vector3d(-1, 1, 1)), p), InvalidPotential);
  CHECK_THROWS_AS(normalize(FiniteMeasure(Eigen::Vector3d::Zero())), ZeroMass);
}

TEST_CASE("measure construction rejects bad input") {
  CHECK_THROWS_AS(FiniteMeasure(Eigen::Vector2d(1.0, -0.5)), InvalidSpec);
  CHECK_NOTHROW(SignedFiniteMeasure(Eigen::Vector2d(1.0, -0.5)));
  CHECK_THROWS_AS(FiniteMeasure({3, 3}, Eigen::Vector2d(0.5, 0.5)), DimensionMismatch);
  CHECK_THROWS_AS(FiniteMeasure({1}, Eigen::Vector2d(0.5, 0.5)), DimensionMismatch);
  const FiniteMeasure m({7, 2, 5}, Eigen::Vector3d(0.1, 0.2, 0.7));
  CHECK(m.support() == std::vector<StateId>{2, 5, 7});
  CHECK(m.weight_of(7) == doctest::Approx(0.1));
  CHECK(m.weight_of(4) == 0.0);
}

TEST_CASE("total variation on aligned and sparse supports") {
  const FiniteMeasure a({0, 1}, Eigen::Vector2d(0.5, 0.5));
  const FiniteMeasure b({1, 2}, Eigen::Vector2d(0.25, 0.75));
  CHECK(tv_distance(a, b) == doctest::Approx(0.5 + 0.25 + 0.75));
  CHECK(tv_distance(a, a) == 0.0);
}

TEST_CASE("dobrushin coefficient of a two-state kernel") {
  for (double s : {0.1, 0.5, 0.9})
    for (double t : {0.2, 0.7}) {
      Eigen::Matrix2d K;
      K << s, 1 - s, t, 1 - t;
      CHECK(dobrushin(FiniteKernel::markov(K)) == doctest::Approx(std::abs(s - t)));
    }
  CHECK(dobrushin(FiniteKernel(Eigen::Matrix3d::Identity())) == doctest::Approx(1.0));
  CHECK(dobrushin(FiniteKernel(Eigen::Matrix3d::Constant(1.0 / 3))) == doctest::Approx(0.0));
  CHECK_THROWS_AS(FiniteKernel::markov(Eigen::Matrix2d::Constant(0.4)), InvalidSpec);
}

TEST_CASE("kernel composition and action") {
  Eigen::Matrix2d A, B;
  A << 0.9, 0.1, 0.3, 0.7;
  B << 0.5, 0.5, 0.2, 0.8;
  const FiniteKernel KA(A), KB(B);
  const FiniteMeasure mu(Eigen::Vector2d(0.4, 0.6));
  const auto lhs = kernel_apply(kernel_apply(mu, KA), KB);
  const auto rhs = kernel_apply(mu, kernel_compose(KA, KB));
  CHECK(tv_distance(lhs, rhs) < 1e-15);
  CHECK(lhs.mass() == doctest::Approx(1.0));
}

TEST_CASE("tensor powers index the first coordinate most significantly") {
  Eigen::Matrix2d A;
  A << 0.9, 0.1, 0.3, 0.7;
  const FiniteKernel K2 = tensor_power(FiniteKernel(A), 2);
  for (int x0 = 0; x0 < 2; ++x0)
    for (int x1 = 0; x1 < 2; ++x1)
      for (int y0 = 0; y0 < 2; ++y0)
        for (int y1 = 0; y1 < 2; ++y1) CHECK(K2.matrix()(x0 * 2 + x1, y0 * 2 + y1) == doctest::Approx(A(x0, y0) * A(x1, y1)));
  const FiniteMeasure mu(Eigen::Vector2d(0.25, 0.75));
  const auto m3 = tensor_power(mu, 3);
  CHECK(m3.size() == 8);
  CHECK(m3[1] == doctest::Approx(0.25 * 0.25 * 0.75));
  CHECK(m3.mass() == doctest::Approx(1.0));
}

TEST_CASE("philox generator is reproducible and stream-separated") {
  // Philox4x32-10 known-answer vector from the Random123 distribution
  const auto out = philox4x32_10({0, 0, 0, 0}, {0, 0});
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);
  Rng a(42, 0), b(42, 0), c(42, 1);
  std::set<std::uint64_t> seen;
  bool differ = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a(), y = b(), z = c();
    CHECK(x == y);
    differ = differ || x != z;
    seen.insert(x);
  }
  CHECK(differ);
  CHECK(seen.size() == 100);
}

TEST_CASE("uniform, normal and categorical moments") {
  Rng rng(7);
  const int n = 200000;
  double s = 0, s2 = 0, g = 0, g2 = 0;
  Eigen::Vector3d w(1.0, 2.0, 5.0), freq = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    s += u;
    s2 += u * u;
    const double z = rng.normal();
    g += z;
    g2 += z * z;
    freq(rng.categorical(w)) += 1.0 / n;
  }
  CHECK(std::abs(s / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(s2 / n - 1.0 / 3) < 0.005);
  CHECK(std::abs(g / n) < 5 / std::sqrt(n));
  CHECK(std::abs(g2 / n - 1.0) < 0.02);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(freq(k) - w(k) / 8) < 0.005);
  CHECK(rng.categorical(Eigen::Vector3d(0, 0, 1)) == 2);
}
