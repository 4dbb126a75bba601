#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "pmcmc/csmc.hpp"
#include "pmcmc/exactpg.hpp"
#include "pmcmc/refmodels.hpp"
#include "pmcmc/scenarios.hpp"

using namespace pmcmc;

TEST_CASE("dual particle system pins particle 0") {
  const int n = 3, N = 5;
  const FeynmanKacModel m = reference_hmm3(n);
  const Trajectory z = trajectory_states(m.finite(), {2, 0, 1, 1});
  Rng rng(1);
  const FrozenRun run = run_csmc(m, z, N, n, rng);
  for (int k = 0; k <= n; ++k) {
    CHECK(run.population[static_cast<std::size_t>(k)][0] == z[static_cast<std::size_t>(k)]);
    if (k > 0) CHECK(run.ancestor[static_cast<std::size_t>(k)][0] == 0);
  }
  CHECK(run.line(0) == z);
  CHECK(frozen_normalizer(run) == doctest::Approx(run.normalizer()));
}

TEST_CASE("particle Gibbs chains target the path measure") {
  const int n = 2, N = 3, steps = 60000;
  const FeynmanKacModel m = reference_hmm2(n);
  const PathMeasure pm = path_measure(m, n);
  const Trajectory z0 = trajectory_states(m.finite(), {0, 0, 0});
  for (auto v : {PgVariant::Ancestral, PgVariant::Backward}) {
    Rng rng(21, v == PgVariant::Ancestral ? 0 : 1);
    const auto chain = pg_chain(m, z0, N, steps, v, rng);
    CHECK(chain.size() == static_cast<std::size_t>(steps + 1));
    Eigen::VectorXd freq = Eigen::VectorXd::Zero(pm.space.size());
    for (std::size_t s = 1; s < chain.size(); ++s) freq(pm.space.encode(trajectory_indices(m.finite(), chain[s]))) += 1.0 / steps;
    CHECK(tv_distance(freq, pm.measure.weights()) < 0.03);
  }
}

TEST_CASE("minorization bound values") {
  // unit potentials: tau_n = 1
  const FeynmanKacModel u = sticky_chain(3, 0.8);
  CHECK(minorization_bound(u, 4, 3) == doctest::Approx(1 - std::pow(0.75, 3)));
  CHECK(minorization_bound(u, 4, 3, 4) == doctest::Approx(1 - std::pow(0.75, 4)));
  CHECK(minorization_bound(u, 4, 0) == doctest::Approx(0.0));
  const FeynmanKacModel h = reference_hmm2(2);
  // tau_2 = (0.3 / 0.8) (0.2 / 0.7) for the alternating observations
  CHECK(minorization_bound(h, 2, 2) == doctest::Approx(1 - (0.3 / 0.8) * (0.2 / 0.7) * 0.25));
  LinearGaussianSpec s;
  s.observations = {0.0, 1.0};
  CHECK_THROWS_AS(minorization_bound(lg_model(s), 2, 1), UnboundedPotential);
}

TEST_CASE("stated contraction exponent fails on a sticky chain") {
  // M = I and G = 1: the chain keeps its path with probability (1 - 1/N)^{n+1}
  for (int n : {0, 1, 2}) {
    const FeynmanKacModel m = sticky_chain(n);
    const EnumeratedKernel K = enumerate_pg_kernel(m, 2, n, PgVariant::Ancestral);
    const double beta = dobrushin(K.matrix());
    CHECK(beta == doctest::Approx(1 - std::pow(0.5, n + 1)).epsilon(1e-12));
    CHECK(beta > minorization_bound(m, 2, n) + 0.1);
    CHECK(beta <= minorization_bound(m, 2, n, n + 1) + 1e-12);
  }
}

TEST_CASE("avoiding chain is a stub") {
  const FeynmanKacModel m = reference_hmm2(1);
  Rng rng(0);
  CHECK_THROWS_AS(pg_avoiding_step(m, trajectory_states(m.finite(), {0, 1}), 2, rng), NotImplemented);
}

TEST_CASE("chain output records the rng") {
  const FeynmanKacModel m = reference_hmm2(1);
  Rng rng(77, 3);
  const auto chain = pg_chain(m, trajectory_states(m.finite(), {0, 1}), 2, 2, PgVariant::Ancestral, rng);
  std::ostringstream os;
  write_chain(os, chain, RngRecord{Rng::algorithm(), 77, 3});
  CHECK(os.str().rfind("# rng=philox4x32-10 seed=77 stream=3\nstep,level,state\n", 0) == 0);
}
