#pragma once

#include <functional>
#include <vector>

#include "pmcmc/csmc.hpp"
#include "pmcmc/fkmodel.hpp"

namespace pmcmc {

// Island model: a level-k state is the multiset of N' inner particles,
// stored as their inner states concatenated in sorted order. G'_k is the
// empirical mean of the inner potential and M'_{k} draws N' particles
// from Phi_k of the previous island.
FeynmanKacModel lift_model(const FeynmanKacModel& inner, int n_inner);

// inner components of an island state
std::vector<State> island_members(const State& island, int inner_dim);

// m(X')(f) for an island state
double island_mean(const State& island, int inner_dim, const std::function<double(const State&)>& f);

struct IslandChain {
  std::vector<Trajectory> chain;
  std::vector<double> terminal_means;  // m(X'_n)(f) along the chain
  double average = 0.0;                // ergodic average, the first step excluded
};

IslandChain island_pg(const FeynmanKacModel& inner, int n_inner, int N, int m_steps, PgVariant variant,
                      const std::function<double(const State&)>& f, Rng& rng);

}  // namespace pmcmc
