#pragma once

#include <iosfwd>
#include <vector>

#include "pmcmc/smc.hpp"

namespace pmcmc {

// Dual particle system: particle 0 is pinned to the frozen trajectory at
// every level; ancestor[k][0] = 0.
struct FrozenRun : ParticleRun {
  Trajectory frozen;
};

FrozenRun run_csmc(const FeynmanKacModel& model, const Trajectory& frozen, int N, int n, Rng& rng);

enum class PgVariant { Ancestral, Backward };

Trajectory pg_ancestral_step(const FeynmanKacModel& model, const Trajectory& z, int N, Rng& rng);
Trajectory pg_backward_step(const FeynmanKacModel& model, const Trajectory& z, int N, Rng& rng);
Trajectory pg_step(const FeynmanKacModel& model, const Trajectory& z, int N, PgVariant variant, Rng& rng);

// Chain history z_0, ..., z_{m_steps}.
std::vector<Trajectory> pg_chain(const FeynmanKacModel& model, const Trajectory& z0, int N, int m_steps, PgVariant variant,
                                 Rng& rng);

// prod_{p<n} m(X_p)(G_p) over the dual populations
double frozen_normalizer(const FrozenRun& run);

// 1 - tau_n (1 - 1/N)^n, tau_n = 1 / prod_{p<n} sup G_p / inf G_p
double minorization_bound(const FeynmanKacModel& model, int N, int n);
// Same with (1 - 1/N)^exponent; exponent n + 1 also holds at n = 0.
double minorization_bound(const FeynmanKacModel& model, int N, int n, int exponent);

// Chain that avoids the last frozen state. Not defined precisely enough to
// implement; always throws NotImplemented.
Trajectory pg_avoiding_step(const FeynmanKacModel& model, const Trajectory& z, int N, Rng& rng);

// CSV: step,level,state
void write_chain(std::ostream& os, const std::vector<Trajectory>& chain, const RngRecord& rng);

}  // namespace pmcmc
