#include "pmcmc/islands.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace pmcmc {

namespace {

bool state_less(const State& a, const State& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

State join_sorted(std::vector<State> members) {
  std::sort(members.begin(), members.end(), state_less);
  Eigen::Index len = 0;
  for (const auto& m : members) len += m.size();
  State out(len);
  Eigen::Index at = 0;
  for (const auto& m : members) {
    out.segment(at, m.size()) = m;
    at += m.size();
  }
  return out;
}

// compositions of n into d parts, lexicographic
void compositions(int n, int d, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == d - 1) {
    cur.push_back(n);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int x = n; x >= 0; --x) {
    cur.push_back(x);
    compositions(n - x, d, cur, out);
    cur.pop_back();
  }
}

double multinomial_pmf(const std::vector<int>& c, const Eigen::VectorXd& p) {
  int n = 0;
  double lg = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    n += c[i];
    if (c[i] == 0) continue;
    if (p(static_cast<Eigen::Index>(i)) <= 0.0) return 0.0;
    lg += c[i] * std::log(p(static_cast<Eigen::Index>(i))) - std::lgamma(c[i] + 1.0);
  }
  return std::exp(lg + std::lgamma(n + 1.0));
}

FeynmanKacModel lift_finite(const FeynmanKacModel& inner, int Np) {
  const FiniteFace& f = inner.finite();
  const int n = f.horizon();
  std::vector<std::vector<std::vector<int>>> comps(static_cast<std::size_t>(n + 1));
  FiniteFace g;
  g.potential.resize(static_cast<std::size_t>(n + 1));
  g.mutation.resize(static_cast<std::size_t>(n + 1));
  g.labels.resize(static_cast<std::size_t>(n + 1));
  for (int k = 0; k <= n; ++k) {
    std::vector<int> cur;
    compositions(Np, f.dim(k), cur, comps[static_cast<std::size_t>(k)]);
    const auto& ck = comps[static_cast<std::size_t>(k)];
    Eigen::VectorXd G(static_cast<Eigen::Index>(ck.size()));
    for (std::size_t s = 0; s < ck.size(); ++s) {
      std::vector<State> members;
      double acc = 0.0;
      for (int i = 0; i < f.dim(k); ++i)
        for (int r = 0; r < ck[s][static_cast<std::size_t>(i)]; ++r) {
          members.push_back(f.label(k, i));
          acc += f.potential[static_cast<std::size_t>(k)](i);
        }
      G(static_cast<Eigen::Index>(s)) = acc / Np;
      g.labels[static_cast<std::size_t>(k)].push_back(join_sorted(std::move(members)));
    }
    g.potential[static_cast<std::size_t>(k)] = G;
  }
  auto measure_of = [&](const std::vector<int>& c) {
    Eigen::VectorXd m(static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) m(static_cast<Eigen::Index>(i)) = static_cast<double>(c[i]) / Np;
    return m;
  };
  g.initial.resize(static_cast<Eigen::Index>(comps[0].size()));
  for (std::size_t s = 0; s < comps[0].size(); ++s) g.initial(static_cast<Eigen::Index>(s)) = multinomial_pmf(comps[0][s], f.initial);
  for (int k = 1; k <= n; ++k) {
    const auto& prev = comps[static_cast<std::size_t>(k - 1)];
    const auto& here = comps[static_cast<std::size_t>(k)];
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(prev.size()), static_cast<Eigen::Index>(here.size()));
    for (std::size_t s = 0; s < prev.size(); ++s) {
      const Eigen::VectorXd m = measure_of(prev[s]);
      const Eigen::VectorXd w = m.cwiseProduct(f.potential[static_cast<std::size_t>(k - 1)]);
      if (!(w.sum() > 0.0)) {
        // unreachable under the potential; any Markov row keeps the face valid
        M(static_cast<Eigen::Index>(s), 0) = 1.0;
        continue;
      }
      const Eigen::VectorXd p = f.mutation[static_cast<std::size_t>(k)].transpose() * w / w.sum();
      for (std::size_t t = 0; t < here.size(); ++t) M(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) = multinomial_pmf(here[t], p);
    }
    g.mutation[static_cast<std::size_t>(k)] = std::move(M);
  }
  FeynmanKacModel out = FeynmanKacModel::from_finite(std::move(g), "island(" + inner.name + ")");
  out.state_dim = inner.state_dim * Np;
  return out;
}

}  // namespace

std::vector<State> island_members(const State& island, int inner_dim) {
  if (inner_dim < 1 || island.size() % inner_dim != 0) throw DimensionMismatch("island state not a multiple of the inner dimension");
  std::vector<State> out;
  for (Eigen::Index i = 0; i < island.size(); i += inner_dim) out.push_back(island.segment(i, inner_dim));
  return out;
}

double island_mean(const State& island, int inner_dim, const std::function<double(const State&)>& f) {
  const auto members = island_members(island, inner_dim);
  double acc = 0.0;
  for (const auto& m : members) acc += f(m);
  return acc / static_cast<double>(members.size());
}

FeynmanKacModel lift_model(const FeynmanKacModel& inner, int n_inner) {
  if (n_inner < 1) throw InvalidSpec("island size must be >= 1");
  if (inner.lift_depth > 0) throw InvalidSpec("nested island lifts are not supported");
  if (!inner.homogeneous_state_dim) throw InvalidSpec("island lift needs a fixed inner state dimension");
  FeynmanKacModel out;
  if (inner.has_finite()) {
    out = lift_finite(inner, n_inner);
  } else {
    out.name = "island(" + inner.name + ")";
    out.horizon = inner.horizon;
    out.state_dim = inner.state_dim * n_inner;
    const SamplerFace s = inner.sampler;
    const int dim = inner.state_dim, Np = n_inner;
    out.sampler.initial = [s, Np](Rng& rng) {
      std::vector<State> m;
      for (int i = 0; i < Np; ++i) m.push_back(s.initial(rng));
      return join_sorted(std::move(m));
    };
    out.sampler.mutation = [s, dim, Np](int k, const State& x, Rng& rng) {
      const auto members = island_members(x, dim);
      Eigen::VectorXd w(Np);
      for (int i = 0; i < Np; ++i) w(i) = s.potential(k - 1, members[static_cast<std::size_t>(i)]);
      if (!(w.sum() > 0.0)) throw Extinction("island with zero inner potential");
      std::vector<State> next;
      for (int i = 0; i < Np; ++i) next.push_back(s.mutation(k, members[static_cast<std::size_t>(rng.categorical(w))], rng));
      return join_sorted(std::move(next));
    };
    out.sampler.potential = [s, dim](int k, const State& x) {
      const auto members = island_members(x, dim);
      double acc = 0.0;
      for (const auto& m : members) acc += s.potential(k, m);
      return acc / static_cast<double>(members.size());
    };
    if (s.density) {
      out.sampler.density = [s, dim](int k, const State& x, const State& y) {
        const auto from = island_members(x, dim), to = island_members(y, dim);
        double g = 0.0;
        for (const auto& a : from) g += s.potential(k - 1, a);
        if (!(g > 0.0)) return 0.0;
        double d = g / static_cast<double>(from.size());
        for (const auto& b : to) {
          double h = 0.0;
          for (const auto& a : from) h += s.density(k, a, b);
          d *= h / g;
        }
        return d;
      };
    }
  }
  out.bounded_potential = inner.bounded_potential;
  out.potential_bounds = inner.potential_bounds;
  out.lift_depth = inner.lift_depth + 1;
  out.homogeneous_state_dim = true;
  return out;
}

IslandChain island_pg(const FeynmanKacModel& inner, int n_inner, int N, int m_steps, PgVariant variant,
                      const std::function<double(const State&)>& f, Rng& rng) {
  if (m_steps < 1) throw InvalidSpec("island chain needs at least one step");
  const FeynmanKacModel lifted = lift_model(inner, n_inner);
  const int n = lifted.horizon;
  Trajectory z0;
  z0.push_back(lifted.sampler.initial(rng));
  for (int k = 1; k <= n; ++k) z0.push_back(lifted.sampler.mutation(k, z0.back(), rng));
  IslandChain out;
  out.chain = pg_chain(lifted, z0, N, m_steps, variant, rng);
  double acc = 0.0;
  for (std::size_t s = 0; s < out.chain.size(); ++s) {
    const double v = island_mean(out.chain[s].back(), inner.state_dim, f);
    out.terminal_means.push_back(v);
    if (s > 0) acc += v;
  }
  out.average = acc / static_cast<double>(out.chain.size() - 1);
  return out;
}

}  // namespace pmcmc
