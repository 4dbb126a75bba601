#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "pmcmc/fkmodel.hpp"
#include "pmcmc/refmodels.hpp"
#include "pmcmc/scenarios.hpp"

using namespace pmcmc;

namespace {

// forward recursion on unnormalized measures: u_0 = eta_0, u_{k+1} = (u_k G_k) M_{k+1}
std::vector<Eigen::VectorXd> forward(const FiniteFace& f, int n) {
  std::vector<Eigen::VectorXd> u{f.initial};
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd w = u.back().cwiseProduct(f.potential[static_cast<std::size_t>(k)]);
    u.push_back(f.mutation[static_cast<std::size_t>(k + 1)].transpose() * w);
  }
  return u;
}

double path_weight(const FiniteFace& f, const std::vector<int>& x) {
  const int n = static_cast<int>(x.size()) - 1;
  double w = f.initial(x[0]);
  for (int k = 1; k <= n; ++k) w *= f.potential[static_cast<std::size_t>(k - 1)](x[static_cast<std::size_t>(k - 1)]) *
                                     f.mutation[static_cast<std::size_t>(k)](x[static_cast<std::size_t>(k - 1)], x[static_cast<std::size_t>(k)]);
  return w;
}

}  // namespace

TEST_CASE("exact flow matches the forward recursion") {
  for (int n : {0, 1, 3, 5}) {
    const FeynmanKacModel m = reference_hmm3(n);
    const FlowResult flow = exact_flow(m, n);
    const auto u = forward(m.finite(), n);
    for (int k = 0; k <= n; ++k) {
      const double mass = u[static_cast<std::size_t>(k)].sum();
      CHECK(flow.gamma_mass[static_cast<std::size_t>(k)] == doctest::Approx(mass).epsilon(1e-13));
      CHECK(std::exp(flow.log_gamma_mass[static_cast<std::size_t>(k)]) == doctest::Approx(mass).epsilon(1e-12));
      CHECK(tv_distance(flow.eta[static_cast<std::size_t>(k)].weights(), u[static_cast<std::size_t>(k)] / mass) < 1e-14);
    }
  }
}

TEST_CASE("path measure matches brute-force path weights") {
  const int n = 3;
  const FeynmanKacModel m = reference_hmm2(n);
  const PathMeasure pm = path_measure(m, n);
  const PathMeasure direct = path_measure_direct(m, n);
  CHECK(pm.space.size() == 16);
  double z = 0;
  for (std::int64_t c = 0; c < pm.space.size(); ++c) z += path_weight(m.finite(), pm.space.decode(c));
  for (std::int64_t c = 0; c < pm.space.size(); ++c) {
    const double w = path_weight(m.finite(), pm.space.decode(c)) / z;
    CHECK(pm.measure.weight_of(c) == doctest::Approx(w).epsilon(1e-13));
    CHECK(direct.measure.weight_of(c) == doctest::Approx(w).epsilon(1e-13));
  }
}

TEST_CASE("trajectory codes round trip with level 0 most significant") {
  const TrajectorySpace s({2, 3, 2});
  CHECK(s.size() == 12);
  CHECK(s.encode({1, 0, 0}) == 6);
  CHECK(s.encode({0, 2, 1}) == 5);
  for (std::int64_t c = 0; c < s.size(); ++c) CHECK(s.encode(s.decode(c)) == c);
}

TEST_CASE("normalized semigroup transports eta_p to eta_n") {
  const int n = 4;
  const FeynmanKacModel m = reference_hmm3(n);
  const FlowResult flow = exact_flow(m, n);
  for (int p = 0; p <= n; ++p) {
    const FiniteKernel Q = normalized_semigroup(m, flow, p, n);
    const Eigen::VectorXd pushed = Q.matrix().transpose() * flow.eta[static_cast<std::size_t>(p)].weights();
    CHECK(tv_distance(pushed, flow.eta[static_cast<std::size_t>(n)].weights()) < 1e-13);
  }
  CHECK(semigroup_dobrushin(m, n, n) == doctest::Approx(1.0));
  CHECK(semigroup_dobrushin(m, 0, n) < 1.0);
}

TEST_CASE("historical lift carries the path measure") {
  const int n = 2;
  const FeynmanKacModel m = reference_hmm2(n);
  const FeynmanKacModel h = historical(m, n);
  const FlowResult fh = exact_flow(h, n);
  const PathMeasure pm = path_measure(m, n);
  CHECK(tv_distance(fh.eta[static_cast<std::size_t>(n)].weights(), pm.measure.weights()) < 1e-14);
  CHECK(exact_flow(m, n).gamma_mass[static_cast<std::size_t>(n)] == doctest::Approx(fh.gamma_mass[static_cast<std::size_t>(n)]));
  const std::vector<int> x{1, 0, 1};
  CHECK(prefix_code(m.finite(), x, 2) == pm.space.encode(x));
  CHECK(prefix_code(m.finite(), x, 0) == 1);
}

TEST_CASE("backward kernel reverses the flow") {
  const int n = 3;
  const FeynmanKacModel m = reference_hmm3(n);
  const FlowResult flow = exact_flow(m, n);
  for (int k = 0; k < n; ++k) {
    const FiniteKernel L = backward_kernel(m, k, flow.eta[static_cast<std::size_t>(k)]);
    CHECK(L.is_markov());
    // eta_{k+1} L = Psi_{G_k}(eta_k)
    const Eigen::VectorXd lhs = L.matrix().transpose() * flow.eta[static_cast<std::size_t>(k + 1)].weights();
    const FiniteMeasure psi = boltzmann_gibbs(m.finite().potential[static_cast<std::size_t>(k)], flow.eta[static_cast<std::size_t>(k)]);
    CHECK(tv_distance(lhs, psi.weights()) < 1e-13);
  }
}

TEST_CASE("face validation and budgets") {
  FiniteFace f;
  f.initial = Eigen::Vector2d(0.5, 0.5);
  f.potential = {Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 1)};
  f.mutation = {Eigen::MatrixXd(), Eigen::MatrixXd::Constant(2, 3, 1.0 / 3)};
  CHECK_THROWS_AS(FeynmanKacModel::from_finite(f), Error);
  f.mutation[1] = Eigen::MatrixXd::Constant(2, 2, 0.7);
  CHECK_THROWS_AS(FeynmanKacModel::from_finite(f), Error);
  CHECK_THROWS_AS(path_measure(reference_hmm2(10), 10, 100), BudgetExceeded);
  setenv("PMCMCLAB_BUDGET", "1234", 1);
  CHECK(enumeration_budget() == 1234);
  unsetenv("PMCMCLAB_BUDGET");
  CHECK(enumeration_budget() == kDefaultEnumerationBudget);
}

TEST_CASE("zero total mass is reported") {
  FiniteFace f;
  f.initial = Eigen::Vector2d(1.0, 0.0);
  f.potential = {Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(1, 1)};
  f.mutation = {Eigen::MatrixXd(), Eigen::Matrix2d::Identity()};
  const FeynmanKacModel m = FeynmanKacModel::from_finite(f);
  CHECK_THROWS_AS(exact_flow(m, 1), ZeroMass);
}
