#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "pmcmc/fkmodel.hpp"
#include "pmcmc/refmodels.hpp"
#include "pmcmc/scenarios.hpp"
#include "pmcmc/smc.hpp"

using namespace pmcmc;

namespace {

struct Stats {
  double mean = 0, se = 0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  for (double x : v) s.mean += x / static_cast<double>(v.size());
  double q = 0;
  for (double x : v) q += (x - s.mean) * (x - s.mean);
  s.se = std::sqrt(q / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return s;
}

}  // namespace

TEST_CASE("particle run shapes and reproducibility") {
  const FeynmanKacModel m = reference_hmm3(4);
  Rng a(3, 1), b(3, 1);
  const ParticleRun r1 = run_smc(m, 7, 4, a), r2 = run_smc(m, 7, 4, b);
  CHECK(r1.population.size() == 5);
  CHECK(r1.ancestor[0].empty());
  for (int k = 1; k <= 4; ++k) CHECK(r1.ancestor[static_cast<std::size_t>(k)] == r2.ancestor[static_cast<std::size_t>(k)]);
  for (int k = 0; k <= 4; ++k)
    for (int i = 0; i < 7; ++i)
      CHECK(r1.population[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] == r2.population[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]);
  std::ostringstream os;
  write_run(os, r1);
  CHECK(os.str().rfind("# rng=philox4x32-10 seed=3 stream=1 N=7 n=4\nlevel,particle,ancestor,state,potential\n", 0) == 0);
  CHECK_THROWS_AS(run_smc(m, 0, 2, a), InvalidSpec);
  CHECK_THROWS_AS(run_smc(m, 3, 9, a), DimensionMismatch);
}

TEST_CASE("both estimators are unbiased on a small HMM") {
  const int n = 3, N = 4, R = 40000;
  const FeynmanKacModel m = reference_hmm2(n);
  // forward recursion oracle for gamma_n(1) and gamma_n(f) with f terminal
  const FiniteFace& f = m.finite();
  Eigen::VectorXd u = f.initial;
  for (int k = 0; k < n; ++k) u = f.mutation[static_cast<std::size_t>(k + 1)].transpose() * u.cwiseProduct(f.potential[static_cast<std::size_t>(k)]);
  const Eigen::Vector2d g(2.0, -1.0);
  LevelFunction path = [](int k, const State& x) { return 1.0 + 0.5 * (std::lround(x(0)) == k % 2); };
  const PathMeasure pm = path_measure(m, n);
  double refF = 0;
  for (std::int64_t c = 0; c < pm.space.size(); ++c) {
    const auto x = pm.space.decode(c);
    double v = 1;
    for (int k = 0; k <= n; ++k) v *= 1.0 + 0.5 * (x[static_cast<std::size_t>(k)] == k % 2);
    refF += pm.measure.weight_of(c) * v;
  }
  refF *= u.sum();
  std::vector<double> e1, e2, t1, p1, p2;
  for (int r = 0; r < R; ++r) {
    Rng rng(11, static_cast<std::uint64_t>(r));
    const ParticleRun run = run_smc(m, N, n, rng);
    e1.push_back(gamma_estimate_1(run, unit_function()));
    e2.push_back(gamma_estimate_2(m, run, unit_function()));
    t1.push_back(gamma_estimate_1(run, terminal([&](const State& x) { return g(std::lround(x(0))); }, n)));
    p1.push_back(gamma_estimate_1(run, path));
    p2.push_back(gamma_estimate_2(m, run, path));
    CHECK(e1.back() == doctest::Approx(e2.back()).epsilon(1e-12));
  }
  auto within = [](const Stats& s, double ref) { return std::abs(s.mean - ref) <= 4 * s.se; };
  CHECK(within(stats(e1), u.sum()));
  CHECK(within(stats(t1), u.dot(g)));
  CHECK(within(stats(p1), refF));
  CHECK(within(stats(p2), refF));
}

TEST_CASE("estimators on the linear-Gaussian sampler face") {
  LinearGaussianSpec s;
  s.drift = ScalarMap::affine(0.0, 0.9);
  s.sigma_w = 0.8;
  s.sigma_v = 0.6;
  s.observations = {0.3, -0.4, 0.8};
  const FeynmanKacModel m = lg_model(s);
  const int n = 2;
  const double ref = std::exp(kalman_oracle(s).log_gamma[static_cast<std::size_t>(n)]);
  std::vector<double> e2;
  for (int r = 0; r < 6000; ++r) {
    Rng rng(5, static_cast<std::uint64_t>(r));
    const ParticleRun run = run_smc(m, 20, n, rng);
    e2.push_back(gamma_estimate_2(m, run, unit_function()));
  }
  const Stats st = stats(e2);
  CHECK(std::abs(st.mean - ref) <= 4 * st.se);
}

TEST_CASE("ancestral and backward line samplers") {
  const int n = 2, N = 3;
  const FeynmanKacModel m = reference_hmm2(n);
  Rng rng(9);
  const ParticleRun run = run_smc(m, N, n, rng);
  const Trajectory a = sample_ancestral_line(run, rng);
  const Trajectory b = sample_backward_line(m, run, rng);
  CHECK(a.size() == 3);
  CHECK(b.size() == 3);
  for (int k = 0; k <= n; ++k) {
    bool in_pop = false;
    for (const auto& x : run.population[static_cast<std::size_t>(k)]) in_pop = in_pop || x == b[static_cast<std::size_t>(k)];
    CHECK(in_pop);
  }
  const Eigen::MatrixXd W = backward_weights(m, run.population[0], run.population[1], 0);
  CHECK(W.rows() == N);
  CHECK(W.cols() == N);
}
