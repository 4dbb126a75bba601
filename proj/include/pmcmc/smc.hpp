#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pmcmc/fkmodel.hpp"
#include "pmcmc/rng.hpp"

namespace pmcmc {

struct RngRecord {
  std::string algorithm = Rng::algorithm();
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

struct ParticleRun {
  int N = 0, n = 0;
  std::vector<std::vector<State>> population;  // population[k][i]
  std::vector<std::vector<int>> ancestor;      // ancestor[k][i] at level k-1; ancestor[0] empty
  std::vector<std::vector<double>> potential;  // G_k(population[k][i])
  std::vector<double> mean_potential;          // m(xi_k)(G_k)
  RngRecord rng;

  double normalizer() const;  // prod_{p<n} m(xi_p)(G_p)
  Trajectory line(int i) const;
  std::vector<int> line_indices(int i) const;
};

ParticleRun run_smc(const FeynmanKacModel& model, int N, int n, Rng& rng);

// Product-form path function f(x) = prod_k f(k, x_k); terminal functions
// return 1 below level n.
using LevelFunction = std::function<double(int k, const State& x)>;
using PathFunction = std::function<double(const Trajectory& x)>;

LevelFunction terminal(std::function<double(const State&)> f, int n);
LevelFunction unit_function();

double gamma_estimate_1(const ParticleRun& run, const LevelFunction& f);
double gamma_estimate_1(const ParticleRun& run, const PathFunction& f);
double gamma_estimate_2(const FeynmanKacModel& model, const ParticleRun& run, const LevelFunction& f);

Trajectory sample_ancestral_line(const ParticleRun& run, Rng& rng);
Trajectory sample_backward_line(const FeynmanKacModel& model, const ParticleRun& run, Rng& rng);

// Backward transition weights from particle j at level k+1 to level k.
Eigen::MatrixXd backward_weights(const FeynmanKacModel& model, const std::vector<State>& from, const std::vector<State>& to, int k);

// CSV: level,particle,ancestor,state,potential; preceded by a comment line
// carrying the rng algorithm and seed.
void write_run(std::ostream& os, const ParticleRun& run);

}  // namespace pmcmc
