#include "pmcmc/smc.hpp"

#include <algorithm>
#include <ostream>

namespace pmcmc {

double ParticleRun::normalizer() const {
  double z = 1.0;
  for (int p = 0; p < n; ++p) z *= mean_potential[static_cast<std::size_t>(p)];
  return z;
}

std::vector<int> ParticleRun::line_indices(int i) const {
  std::vector<int> idx(static_cast<std::size_t>(n + 1));
  for (int k = n; k >= 0; --k) {
    idx[static_cast<std::size_t>(k)] = i;
    if (k > 0) i = ancestor[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
  }
  return idx;
}

Trajectory ParticleRun::line(int i) const {
  const auto idx = line_indices(i);
  Trajectory x(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) x[k] = population[k][static_cast<std::size_t>(idx[k])];
  return x;
}

namespace {

int draw_from_cumulative(const std::vector<double>& cum, Rng& rng) {
  const double u = rng.uniform() * cum.back();
  const auto it = std::upper_bound(cum.begin(), cum.end(), u);
  if (it == cum.end()) {
    // u hit the total through rounding; take the last positive atom
    for (std::size_t i = cum.size(); i-- > 0;)
      if (i == 0 || cum[i] > cum[i - 1]) return static_cast<int>(i);
  }
  return static_cast<int>(it - cum.begin());
}

}  // namespace

ParticleRun run_smc(const FeynmanKacModel& model, int N, int n, Rng& rng) {
  if (N < 1) throw InvalidSpec("N must be >= 1");
  if (n < 0 || n > model.horizon) throw DimensionMismatch("horizon beyond model");
  ParticleRun r;
  r.N = N;
  r.n = n;
  r.rng.seed = rng.seed();
  r.rng.stream = rng.stream();
  r.population.resize(static_cast<std::size_t>(n + 1));
  r.ancestor.resize(static_cast<std::size_t>(n + 1));
  r.potential.resize(static_cast<std::size_t>(n + 1));
  auto& pop0 = r.population[0];
  pop0.reserve(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) pop0.push_back(model.sampler.initial(rng));
  std::vector<double> cum(static_cast<std::size_t>(N));
  for (int k = 0; k <= n; ++k) {
    auto& pot = r.potential[static_cast<std::size_t>(k)];
    pot.resize(static_cast<std::size_t>(N));
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
      pot[static_cast<std::size_t>(i)] = model.sampler.potential(k, r.population[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]);
      acc += pot[static_cast<std::size_t>(i)];
      cum[static_cast<std::size_t>(i)] = acc;
    }
    r.mean_potential.push_back(acc / N);
    if (k == n) break;
    if (!(acc > 0.0)) throw Extinction("mean potential vanished at level " + std::to_string(k));
    auto& next = r.population[static_cast<std::size_t>(k + 1)];
    auto& anc = r.ancestor[static_cast<std::size_t>(k + 1)];
    next.reserve(static_cast<std::size_t>(N));
    anc.resize(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) {
      const int a = draw_from_cumulative(cum, rng);
      anc[static_cast<std::size_t>(i)] = a;
      next.push_back(model.sampler.mutation(k + 1, r.population[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)], rng));
    }
  }
  return r;
}

LevelFunction terminal(std::function<double(const State&)> f, int n) {
  return [f = std::move(f), n](int k, const State& x) { return k == n ? f(x) : 1.0; };
}

LevelFunction unit_function() {
  return [](int, const State&) { return 1.0; };
}

double gamma_estimate_1(const ParticleRun& run, const LevelFunction& f) {
  double acc = 0.0;
  for (int i = 0; i < run.N; ++i) {
    double v = 1.0;
    int j = i;
    for (int k = run.n; k >= 0 && v != 0.0; --k) {
      v *= f(k, run.population[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)]);
      if (k > 0) j = run.ancestor[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    }
    acc += v;
  }
  return run.normalizer() * acc / run.N;
}

double gamma_estimate_1(const ParticleRun& run, const PathFunction& f) {
  double acc = 0.0;
  for (int i = 0; i < run.N; ++i) acc += f(run.line(i));
  return run.normalizer() * acc / run.N;
}

Eigen::MatrixXd backward_weights(const FeynmanKacModel& model, const std::vector<State>& from, const std::vector<State>& to, int k) {
  if (!model.has_density()) throw MissingDensity(model.name);
  const auto nf = static_cast<Eigen::Index>(from.size()), nt = static_cast<Eigen::Index>(to.size());
  Eigen::MatrixXd W(nt, nf);
  if (model.has_finite()) {
    const FiniteFace& face = model.finite();
    const Eigen::VectorXd& G = face.potential[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd& M = face.mutation[static_cast<std::size_t>(k + 1)];
    std::vector<int> fi(from.size()), ti(to.size());
    for (std::size_t i = 0; i < from.size(); ++i) fi[i] = face.index(k, from[i]);
    for (std::size_t j = 0; j < to.size(); ++j) ti[j] = face.index(k + 1, to[j]);
    for (Eigen::Index j = 0; j < nt; ++j)
      for (Eigen::Index i = 0; i < nf; ++i) {
        const int a = fi[static_cast<std::size_t>(i)];
        W(j, i) = G(a) * M(a, ti[static_cast<std::size_t>(j)]);
      }
    return W;
  }
  for (Eigen::Index j = 0; j < nt; ++j)
    for (Eigen::Index i = 0; i < nf; ++i)
      W(j, i) = model.sampler.density(k + 1, from[static_cast<std::size_t>(i)], to[static_cast<std::size_t>(j)]);
  return W;
}

double gamma_estimate_2(const FeynmanKacModel& model, const ParticleRun& run, const LevelFunction& f) {
  if (!model.has_density()) throw MissingDensity(model.name);
  const int N = run.N;
  Eigen::VectorXd v(N);
  for (int j = 0; j < N; ++j) v(j) = f(run.n, run.population[static_cast<std::size_t>(run.n)][static_cast<std::size_t>(j)]) / N;
  for (int k = run.n - 1; k >= 0; --k) {
    Eigen::MatrixXd W = backward_weights(model, run.population[static_cast<std::size_t>(k)], run.population[static_cast<std::size_t>(k + 1)], k);
    Eigen::VectorXd next = Eigen::VectorXd::Zero(N);
    for (int j = 0; j < N; ++j) {
      if (v(j) == 0.0) continue;
      const double s = W.row(j).sum();
      if (!(s > 0.0)) throw ZeroMass("backward row at level " + std::to_string(k));
      next += (v(j) / s) * W.row(j).transpose();
    }
    for (int i = 0; i < N; ++i)
      if (next(i) != 0.0) next(i) *= f(k, run.population[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]);
    v = std::move(next);
  }
  return run.normalizer() * v.sum();
}

Trajectory sample_ancestral_line(const ParticleRun& run, Rng& rng) { return run.line(rng.uniform_int(run.N)); }

Trajectory sample_backward_line(const FeynmanKacModel& model, const ParticleRun& run, Rng& rng) {
  if (!model.has_density()) throw MissingDensity(model.name);
  Trajectory x(static_cast<std::size_t>(run.n + 1));
  int j = rng.uniform_int(run.N);
  x[static_cast<std::size_t>(run.n)] = run.population[static_cast<std::size_t>(run.n)][static_cast<std::size_t>(j)];
  for (int k = run.n - 1; k >= 0; --k) {
    const std::vector<State> target{x[static_cast<std::size_t>(k + 1)]};
    const Eigen::MatrixXd W = backward_weights(model, run.population[static_cast<std::size_t>(k)], target, k);
    const double s = W.row(0).sum();
    if (!(s > 0.0)) throw ZeroMass("backward row at level " + std::to_string(k));
    const Eigen::VectorXd w = W.row(0).transpose();
    j = rng.categorical(w);
    x[static_cast<std::size_t>(k)] = run.population[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
  }
  return x;
}

void write_run(std::ostream& os, const ParticleRun& run) {
  os << "# rng=" << run.rng.algorithm << " seed=" << run.rng.seed << " stream=" << run.rng.stream << " N=" << run.N
     << " n=" << run.n << '\n';
  os << "level,particle,ancestor,state,potential\n";
  const auto prec = os.precision(17);
  for (int k = 0; k <= run.n; ++k)
    for (int i = 0; i < run.N; ++i)
      os << k << ',' << i << ',' << (k == 0 ? -1 : run.ancestor[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]) << ','
         << encode_state(run.population[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]) << ','
         << run.potential[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] << '\n';
  os.precision(prec);
}

}  // namespace pmcmc
