#include "pmcmc/csmc.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace pmcmc {

namespace {

int draw(const std::vector<double>& cum, Rng& rng) {
  const double u = rng.uniform() * cum.back();
  const auto it = std::upper_bound(cum.begin(), cum.end(), u);
  if (it == cum.end()) {
    for (std::size_t i = cum.size(); i-- > 0;)
      if (i == 0 || cum[i] > cum[i - 1]) return static_cast<int>(i);
  }
  return static_cast<int>(it - cum.begin());
}

}  // namespace

FrozenRun run_csmc(const FeynmanKacModel& model, const Trajectory& frozen, int N, int n, Rng& rng) {
  if (N < 1) throw InvalidSpec("N must be >= 1");
  if (n < 0 || n > model.horizon) throw DimensionMismatch("horizon beyond model");
  if (static_cast<int>(frozen.size()) != n + 1) throw DimensionMismatch("frozen trajectory length differs from n+1");
  for (const auto& s : frozen)
    if (model.homogeneous_state_dim && s.size() != model.state_dim) throw DimensionMismatch("frozen state dimension");
  FrozenRun r;
  r.frozen = frozen;
  r.N = N;
  r.n = n;
  r.rng.seed = rng.seed();
  r.rng.stream = rng.stream();
  r.population.resize(static_cast<std::size_t>(n + 1));
  r.ancestor.resize(static_cast<std::size_t>(n + 1));
  r.potential.resize(static_cast<std::size_t>(n + 1));
  auto& pop0 = r.population[0];
  pop0.reserve(static_cast<std::size_t>(N));
  pop0.push_back(frozen[0]);
  for (int i = 1; i < N; ++i) pop0.push_back(model.sampler.initial(rng));
  std::vector<double> cum(static_cast<std::size_t>(N));
  for (int k = 0; k <= n; ++k) {
    const auto& pop = r.population[static_cast<std::size_t>(k)];
    auto& pot = r.potential[static_cast<std::size_t>(k)];
    pot.resize(static_cast<std::size_t>(N));
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
      pot[static_cast<std::size_t>(i)] = model.sampler.potential(k, pop[static_cast<std::size_t>(i)]);
      acc += pot[static_cast<std::size_t>(i)];
      cum[static_cast<std::size_t>(i)] = acc;
    }
    r.mean_potential.push_back(acc / N);
    if (k == n) break;
    if (!(acc > 0.0)) throw Extinction("mean potential vanished at level " + std::to_string(k));
    auto& next = r.population[static_cast<std::size_t>(k + 1)];
    auto& anc = r.ancestor[static_cast<std::size_t>(k + 1)];
    next.reserve(static_cast<std::size_t>(N));
    anc.assign(static_cast<std::size_t>(N), 0);
    next.push_back(frozen[static_cast<std::size_t>(k + 1)]);
    for (int i = 1; i < N; ++i) {
      const int a = draw(cum, rng);
      anc[static_cast<std::size_t>(i)] = a;
      next.push_back(model.sampler.mutation(k + 1, pop[static_cast<std::size_t>(a)], rng));
    }
  }
  return r;
}

Trajectory pg_ancestral_step(const FeynmanKacModel& model, const Trajectory& z, int N, Rng& rng) {
  const int n = static_cast<int>(z.size()) - 1;
  const FrozenRun run = run_csmc(model, z, N, n, rng);
  return sample_ancestral_line(run, rng);
}

Trajectory pg_backward_step(const FeynmanKacModel& model, const Trajectory& z, int N, Rng& rng) {
  if (!model.has_density()) throw MissingDensity(model.name);
  const int n = static_cast<int>(z.size()) - 1;
  const FrozenRun run = run_csmc(model, z, N, n, rng);
  return sample_backward_line(model, run, rng);
}

Trajectory pg_step(const FeynmanKacModel& model, const Trajectory& z, int N, PgVariant variant, Rng& rng) {
  return variant == PgVariant::Ancestral ? pg_ancestral_step(model, z, N, rng) : pg_backward_step(model, z, N, rng);
}

std::vector<Trajectory> pg_chain(const FeynmanKacModel& model, const Trajectory& z0, int N, int m_steps, PgVariant variant,
                                 Rng& rng) {
  if (m_steps < 0) throw InvalidSpec("negative step count");
  std::vector<Trajectory> chain;
  chain.reserve(static_cast<std::size_t>(m_steps + 1));
  chain.push_back(z0);
  for (int s = 0; s < m_steps; ++s) chain.push_back(pg_step(model, chain.back(), N, variant, rng));
  return chain;
}

double frozen_normalizer(const FrozenRun& run) { return run.normalizer(); }

double minorization_bound(const FeynmanKacModel& model, int N, int n) { return minorization_bound(model, N, n, n); }

double minorization_bound(const FeynmanKacModel& model, int N, int n, int exponent) {
  if (N < 1) throw InvalidSpec("N must be >= 1");
  double tau = 1.0;
  for (int p = 0; p < n; ++p) {
    if (!model.has_finite() && !model.bounded_potential) throw UnboundedPotential(model.name);
    const auto [lo, hi] = model.bounds(p);
    if (!(lo > 0.0) || !std::isfinite(hi)) throw UnboundedPotential(model.name + ": level " + std::to_string(p));
    tau *= lo / hi;
  }
  return 1.0 - tau * std::pow(1.0 - 1.0 / N, exponent);
}

Trajectory pg_avoiding_step(const FeynmanKacModel&, const Trajectory&, int, Rng&) {
  throw NotImplemented("particle Gibbs chain avoiding the last frozen state");
}

void write_chain(std::ostream& os, const std::vector<Trajectory>& chain, const RngRecord& rng) {
  os << "# rng=" << rng.algorithm << " seed=" << rng.seed << " stream=" << rng.stream << '\n';
  os << "step,level,state\n";
  for (std::size_t s = 0; s < chain.size(); ++s)
    for (std::size_t k = 0; k < chain[s].size(); ++k) os << s << ',' << k << ',' << encode_state(chain[s][k]) << '\n';
}

}  // namespace pmcmc
