#include "pmcmc/refmodels.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace pmcmc {

FeynmanKacModel hmm_model(const DiscreteHmmSpec& spec) {
  const Eigen::Index d = spec.transition.rows();
  if (spec.transition.cols() != d || spec.emission.rows() != d || spec.initial.size() != d)
    throw InvalidSpec("hmm dimensions disagree");
  if (spec.observations.empty()) throw InvalidSpec("hmm needs at least one observation");
  if (!FiniteKernel(spec.transition).is_markov()) throw InvalidSpec("hmm transition rows must be stochastic");
  if ((spec.emission.array() < 0).any()) throw InvalidSpec("negative emission weight");
  FiniteFace f;
  f.initial = spec.initial;
  const int n = static_cast<int>(spec.observations.size()) - 1;
  f.mutation.resize(static_cast<std::size_t>(n + 1));
  f.potential.resize(static_cast<std::size_t>(n + 1));
  for (int k = 0; k <= n; ++k) {
    const int y = spec.observations[static_cast<std::size_t>(k)];
    if (y < 0 || y >= spec.emission.cols()) throw InvalidSpec("observation symbol out of range");
    f.potential[static_cast<std::size_t>(k)] = spec.emission.col(y);
    if (f.potential[static_cast<std::size_t>(k)].maxCoeff() <= 0) throw InvalidSpec("observation with zero likelihood everywhere");
    if (k >= 1) f.mutation[static_cast<std::size_t>(k)] = spec.transition;
  }
  return FeynmanKacModel::from_finite(std::move(f), "hmm");
}

ScalarMap ScalarMap::affine(double offset, double slope) {
  ScalarMap m;
  m.offset = offset;
  m.slope = slope;
  return m;
}

ScalarMap ScalarMap::clamped(double offset, double slope, double lo, double hi) {
  ScalarMap m = affine(offset, slope);
  m.kind = Kind::ClampedAffine;
  m.lo = lo;
  m.hi = hi;
  return m;
}

ScalarMap ScalarMap::table(std::vector<double> knots, std::vector<double> values) {
  if (knots.size() != values.size() || knots.empty()) throw InvalidSpec("table knots and values differ");
  if (!std::is_sorted(knots.begin(), knots.end())) throw InvalidSpec("table knots must be increasing");
  ScalarMap m;
  m.kind = Kind::Tabulated;
  m.knots = std::move(knots);
  m.values = std::move(values);
  return m;
}

double ScalarMap::operator()(double x) const {
  switch (kind) {
    case Kind::Affine: return offset + slope * x;
    case Kind::ClampedAffine: return std::clamp(offset + slope * x, lo, hi);
    case Kind::Tabulated: {
      if (x <= knots.front()) return values.front();
      if (x >= knots.back()) return values.back();
      const auto it = std::upper_bound(knots.begin(), knots.end(), x);
      const std::size_t j = static_cast<std::size_t>(it - knots.begin());
      const double t = (x - knots[j - 1]) / (knots[j] - knots[j - 1]);
      return values[j - 1] + t * (values[j] - values[j - 1]);
    }
  }
  return 0.0;
}

double log_normal_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
}

FeynmanKacModel lg_model(const LinearGaussianSpec& spec) {
  if (!(spec.sigma_w > 0) || !(spec.sigma_v > 0) || !(spec.prior_sd > 0)) throw InvalidSpec("noise scales must be positive");
  if (spec.observations.empty()) throw InvalidSpec("linear-Gaussian model needs observations");
  auto s = std::make_shared<LinearGaussianSpec>(spec);
  const int n = static_cast<int>(spec.observations.size()) - 1;

  auto potential = [s](int k, double x) {
    return std::exp(log_normal_density(s->observations[static_cast<std::size_t>(k)], s->observe(x), s->sigma_v));
  };

  FeynmanKacModel m;
  if (spec.grid) {
    const GridSpec& g = *spec.grid;
    if (g.points < 2 || !(g.hi > g.lo)) throw InvalidSpec("grid needs two points and hi > lo");
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(g.points, g.lo, g.hi);
    FiniteFace f;
    f.initial.resize(g.points);
    for (int i = 0; i < g.points; ++i) f.initial(i) = std::exp(log_normal_density(x(i), spec.prior_mean, spec.prior_sd));
    f.initial /= f.initial.sum();
    Eigen::MatrixXd M(g.points, g.points);
    for (int i = 0; i < g.points; ++i) {
      const double mu = spec.drift(x(i));
      for (int j = 0; j < g.points; ++j) M(i, j) = std::exp(log_normal_density(x(j), mu, spec.sigma_w));
      const double r = M.row(i).sum();
      if (!(r > 0)) throw InvalidSpec("grid too narrow for the transition kernel");
      M.row(i) /= r;
    }
    f.mutation.assign(static_cast<std::size_t>(n + 1), M);
    f.mutation[0].resize(0, 0);
    f.labels.assign(static_cast<std::size_t>(n + 1), std::vector<State>());
    for (int k = 0; k <= n; ++k) {
      Eigen::VectorXd G(g.points);
      for (int i = 0; i < g.points; ++i) G(i) = potential(k, x(i));
      f.potential.push_back(G);
      for (int i = 0; i < g.points; ++i) f.labels[static_cast<std::size_t>(k)].push_back(State::Constant(1, x(i)));
    }
    m = FeynmanKacModel::from_finite(std::move(f), "lg");
  }
  m.name = "lg";
  m.horizon = n;
  m.state_dim = 1;
  m.bounded_potential = false;
  m.sampler.initial = [s](Rng& rng) { return State::Constant(1, s->prior_mean + s->prior_sd * rng.normal()); };
  m.sampler.mutation = [s](int, const State& x, Rng& rng) {
    return State::Constant(1, s->drift(x(0)) + s->sigma_w * rng.normal());
  };
  m.sampler.potential = [potential](int k, const State& x) { return potential(k, x(0)); };
  m.sampler.density = [s](int k, const State& x, const State& y) {
    const double lg = log_normal_density(s->observations[static_cast<std::size_t>(k - 1)], s->observe(x(0)), s->sigma_v) +
                      log_normal_density(y(0), s->drift(x(0)), s->sigma_w);
    return std::exp(lg);
  };
  return m;
}

KalmanResult kalman_oracle(const LinearGaussianSpec& spec) {
  if (!spec.drift.is_affine() || !spec.observe.is_affine()) throw NonAffine("kalman oracle needs affine drift and observation");
  KalmanResult r;
  double mean = spec.prior_mean, var = spec.prior_sd * spec.prior_sd, ll = 0.0;
  const double a0 = spec.drift.offset, a1 = spec.drift.slope;
  const double b0 = spec.observe.offset, b1 = spec.observe.slope;
  for (std::size_t k = 0; k < spec.observations.size(); ++k) {
    r.pred_mean.push_back(mean);
    r.pred_var.push_back(var);
    r.log_gamma.push_back(ll);
    const double S = b1 * b1 * var + spec.sigma_v * spec.sigma_v;
    const double y = spec.observations[k];
    ll += log_normal_density(y, b0 + b1 * mean, std::sqrt(S));
    const double gain = var * b1 / S;
    const double fm = mean + gain * (y - b0 - b1 * mean);
    const double fv = (1.0 - gain * b1) * var;
    r.filt_mean.push_back(fm);
    r.filt_var.push_back(fv);
    mean = a0 + a1 * fm;
    var = a1 * a1 * fv + spec.sigma_w * spec.sigma_w;
  }
  r.log_likelihood = ll;
  return r;
}

FeynmanKacModel absorption_model(const Eigen::MatrixXd& M, const Eigen::VectorXd& G, const Eigen::VectorXd& initial, int n) {
  if ((G.array() <= 0).any() || (G.array() > 1).any()) throw InvalidPotential("survival potential must lie in (0,1]");
  if (n < 0) throw InvalidSpec("negative horizon");
  FiniteFace f;
  f.initial = initial;
  f.potential.assign(static_cast<std::size_t>(n + 1), G);
  f.mutation.assign(static_cast<std::size_t>(n + 1), M);
  f.mutation[0].resize(0, 0);
  return FeynmanKacModel::from_finite(std::move(f), "absorption");
}

FeynmanKacModel pair_state_lift(const FeynmanKacModel& chain, const std::function<double(int, const State&)>& W) {
  if (chain.horizon < 1) throw InvalidSpec("pair-state lift needs a chain of horizon >= 1");
  const int n = chain.horizon - 1;
  const int dim = chain.state_dim;
  auto split = [dim](const State& x) { return std::make_pair(State(x.head(dim)), State(x.tail(dim))); };
  auto join = [](const State& a, const State& b) {
    State c(a.size() + b.size());
    c << a, b;
    return c;
  };

  FeynmanKacModel m;
  if (chain.has_finite()) {
    const FiniteFace& c = chain.finite();
    FiniteFace f;
    f.mutation.resize(static_cast<std::size_t>(n + 1));
    f.potential.resize(static_cast<std::size_t>(n + 1));
    f.labels.resize(static_cast<std::size_t>(n + 1));
    for (int k = 0; k <= n; ++k) {
      const int da = c.dim(k), db = c.dim(k + 1);
      Eigen::VectorXd G(da * db);
      for (int a = 0; a < da; ++a)
        for (int b = 0; b < db; ++b) {
          const State sa = c.label(k, a), sb = c.label(k + 1, b);
          const double wa = W(k, sa);
          G(a * db + b) = wa > 0 ? W(k + 1, sb) / wa : 0.0;
          f.labels[static_cast<std::size_t>(k)].push_back(join(sa, sb));
        }
      f.potential[static_cast<std::size_t>(k)] = G;
      if (k == 0) {
        f.initial.resize(da * db);
        for (int a = 0; a < da; ++a)
          for (int b = 0; b < db; ++b) f.initial(a * db + b) = c.initial(a) * c.mutation[1](a, b);
      } else {
        const int dp = c.dim(k - 1);
        Eigen::MatrixXd Mk = Eigen::MatrixXd::Zero(dp * da, da * db);
        for (int p = 0; p < dp; ++p)
          for (int a = 0; a < da; ++a)
            for (int b = 0; b < db; ++b) Mk(p * da + a, a * db + b) = c.mutation[static_cast<std::size_t>(k + 1)](a, b);
        f.mutation[static_cast<std::size_t>(k)] = std::move(Mk);
      }
    }
    m = FeynmanKacModel::from_finite(std::move(f), "pair(" + chain.name + ")");
    m.bounded_potential = m.bounded_potential && chain.bounded_potential;
    return m;
  }
  m.name = "pair(" + chain.name + ")";
  m.horizon = n;
  m.state_dim = 2 * dim;
  m.bounded_potential = false;
  const SamplerFace cs = chain.sampler;
  m.sampler.initial = [cs, join](Rng& rng) {
    const State a = cs.initial(rng);
    return join(a, cs.mutation(1, a, rng));
  };
  m.sampler.mutation = [cs, split, join](int k, const State& x, Rng& rng) {
    const State b = split(x).second;
    return join(b, cs.mutation(k + 1, b, rng));
  };
  m.sampler.potential = [W, split](int k, const State& x) {
    const auto [a, b] = split(x);
    const double wa = W(k, a);
    return wa > 0 ? W(k + 1, b) / wa : 0.0;
  };
  return m;
}

}  // namespace pmcmc
