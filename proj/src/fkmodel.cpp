#include "pmcmc/fkmodel.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

namespace pmcmc {

std::size_t enumeration_budget(std::size_t fallback) {
  if (const char* env = std::getenv("PMCMCLAB_BUDGET")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return fallback;
}

std::string encode_state(const State& x) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) os << ';';
    os << x(i);
  }
  return os.str();
}

State FiniteFace::label(int k, int i) const {
  if (!labels.empty()) return labels.at(static_cast<std::size_t>(k)).at(static_cast<std::size_t>(i));
  return State::Constant(1, static_cast<double>(i));
}

int FiniteFace::index(int k, const State& x) const {
  if (labels.empty()) {
    const int i = static_cast<int>(std::lround(x(0)));
    if (x.size() != 1 || i < 0 || i >= dim(k)) throw DimensionMismatch("state outside finite face at level " + std::to_string(k));
    return i;
  }
  if (lookup_.empty()) throw InvalidSpec("finite face labels not indexed");
  const auto& m = lookup_.at(static_cast<std::size_t>(k));
  auto it = m.find(std::vector<double>(x.data(), x.data() + x.size()));
  if (it == m.end()) throw DimensionMismatch("state " + encode_state(x) + " not in finite face at level " + std::to_string(k));
  return it->second;
}

void FiniteFace::build_lookup() {
  lookup_.clear();
  if (labels.empty()) return;
  lookup_.resize(labels.size());
  for (std::size_t k = 0; k < labels.size(); ++k)
    for (std::size_t i = 0; i < labels[k].size(); ++i) {
      const State& s = labels[k][i];
      lookup_[k][std::vector<double>(s.data(), s.data() + s.size())] = static_cast<int>(i);
    }
}

Eigen::MatrixXd FiniteFace::density(int k) const {
  if (k < 1 || k > horizon()) throw DimensionMismatch("density level out of range");
  return potential[static_cast<std::size_t>(k - 1)].asDiagonal() * mutation[static_cast<std::size_t>(k)];
}

void FiniteFace::validate() const {
  if (potential.empty()) throw InvalidSpec("finite face without levels");
  if (initial.size() != dim(0)) throw DimensionMismatch("initial law size differs from level-0 space");
  if ((initial.array() < 0).any() || std::abs(initial.sum() - 1.0) > kMarkovTol)
    throw InvalidSpec("initial law is not a probability");
  if (mutation.size() != potential.size()) throw InvalidSpec("mutation and potential level counts differ");
  for (int k = 1; k <= horizon(); ++k) {
    const auto& M = mutation[static_cast<std::size_t>(k)];
    if (M.rows() != dim(k - 1) || M.cols() != dim(k)) throw DimensionMismatch("mutation shape at level " + std::to_string(k));
    if (!FiniteKernel(M).is_markov()) throw InvalidSpec("mutation at level " + std::to_string(k) + " is not Markov");
  }
  for (const auto& G : potential)
    if (!G.allFinite() || (G.array() < 0).any()) throw InvalidPotential("potentials must be finite and non-negative");
  if (!labels.empty()) {
    if (labels.size() != potential.size()) throw InvalidSpec("label levels differ");
    for (int k = 0; k <= horizon(); ++k)
      if (static_cast<int>(labels[static_cast<std::size_t>(k)].size()) != dim(k)) throw InvalidSpec("label count differs");
  }
}

const FiniteFace& FeynmanKacModel::finite() const {
  if (!face) throw MissingFiniteFace(name);
  return *face;
}

std::pair<double, double> FeynmanKacModel::bounds(int k) const {
  if (face) {
    const auto& G = face->potential.at(static_cast<std::size_t>(k));
    return {G.minCoeff(), G.maxCoeff()};
  }
  if (static_cast<std::size_t>(k) < potential_bounds.size()) return potential_bounds[static_cast<std::size_t>(k)];
  throw UnboundedPotential(name + ": no potential bounds at level " + std::to_string(k));
}

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct CumTables {
  FiniteFace face;
  Eigen::VectorXd init;
  std::vector<RowMajor> cum;
};

int draw_cum(const double* cum, int n, Rng& rng) {
  const double u = rng.uniform() * cum[n - 1];
  int lo = 0, hi = n - 1;
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    if (cum[mid] > u) hi = mid; else lo = mid + 1;
  }
  return lo;
}

}  // namespace

FeynmanKacModel FeynmanKacModel::from_finite(FiniteFace f, std::string name) {
  f.validate();
  f.build_lookup();
  auto t = std::make_shared<CumTables>();
  t->face = f;
  t->init.resize(f.initial.size());
  std::partial_sum(f.initial.data(), f.initial.data() + f.initial.size(), t->init.data());
  t->cum.resize(f.mutation.size());
  for (int k = 1; k <= f.horizon(); ++k) {
    RowMajor c = f.mutation[static_cast<std::size_t>(k)];
    for (Eigen::Index r = 0; r < c.rows(); ++r)
      for (Eigen::Index j = 1; j < c.cols(); ++j) c(r, j) += c(r, j - 1);
    t->cum[static_cast<std::size_t>(k)] = std::move(c);
  }

  FeynmanKacModel m;
  m.name = std::move(name);
  m.horizon = f.horizon();
  m.state_dim = f.labels.empty() ? 1 : static_cast<int>(f.labels[0][0].size());
  m.bounded_potential = true;
  for (const auto& G : f.potential)
    if (G.minCoeff() <= 0) m.bounded_potential = false;
  m.sampler.initial = [t](Rng& rng) {
    return t->face.label(0, draw_cum(t->init.data(), static_cast<int>(t->init.size()), rng));
  };
  m.sampler.mutation = [t](int k, const State& x, Rng& rng) {
    const int i = t->face.index(k - 1, x);
    const RowMajor& c = t->cum.at(static_cast<std::size_t>(k));
    return t->face.label(k, draw_cum(c.data() + i * c.cols(), static_cast<int>(c.cols()), rng));
  };
  m.sampler.potential = [t](int k, const State& x) {
    return t->face.potential[static_cast<std::size_t>(k)](t->face.index(k, x));
  };
  m.sampler.density = [t](int k, const State& x, const State& y) {
    const int i = t->face.index(k - 1, x), j = t->face.index(k, y);
    return t->face.potential[static_cast<std::size_t>(k - 1)](i) * t->face.mutation[static_cast<std::size_t>(k)](i, j);
  };
  m.face = std::move(f);
  return m;
}

FlowResult exact_flow(const FeynmanKacModel& model, int n) {
  const FiniteFace& f = model.finite();
  if (n < 0 || n > f.horizon()) throw DimensionMismatch("flow horizon beyond model horizon");
  FlowResult r;
  Eigen::VectorXd eta = f.initial;
  double lg = 0.0;
  for (int p = 0; p <= n; ++p) {
    r.eta.emplace_back(eta);
    r.log_gamma_mass.push_back(lg);
    r.gamma_mass.push_back(std::exp(lg));
    const Eigen::VectorXd& G = f.potential[static_cast<std::size_t>(p)];
    const double mp = eta.dot(G);
    r.mean_potential.push_back(mp);
    if (p == n) break;
    if (!(mp > kMinMass)) throw ZeroMass("eta_" + std::to_string(p) + "(G) = 0");
    lg += std::log(mp);
    eta = f.mutation[static_cast<std::size_t>(p + 1)].transpose() * (G.cwiseProduct(eta) / mp);
  }
  return r;
}

FiniteKernel semigroup(const FeynmanKacModel& model, int p, int n) {
  const FiniteFace& f = model.finite();
  if (p < 0 || p > n || n > f.horizon()) throw DimensionMismatch("semigroup requires 0 <= p <= n <= horizon");
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(f.dim(p), f.dim(p));
  for (int k = p + 1; k <= n; ++k) Q = Q * f.density(k);
  return FiniteKernel(std::move(Q));
}

FiniteKernel normalized_semigroup(const FeynmanKacModel& model, const FlowResult& flow, int p, int n) {
  const FiniteFace& f = model.finite();
  if (p < 0 || p > n || n > f.horizon()) throw DimensionMismatch("semigroup requires 0 <= p <= n <= horizon");
  if (static_cast<int>(flow.mean_potential.size()) < n + 1) throw DimensionMismatch("flow too short");
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(f.dim(p), f.dim(p));
  for (int k = p + 1; k <= n; ++k) {
    const double z = flow.mean_potential[static_cast<std::size_t>(k - 1)];
    if (!(z > kMinMass)) throw ZeroMass("eta(G) = 0");
    Q = Q * ((f.potential[static_cast<std::size_t>(k - 1)] / z).asDiagonal() * f.mutation[static_cast<std::size_t>(k)]);
  }
  return FiniteKernel(std::move(Q));
}

FiniteKernel normalized_semigroup(const FeynmanKacModel& model, int p, int n) {
  return normalized_semigroup(model, exact_flow(model, n), p, n);
}

TrajectorySpace TrajectorySpace::of(const FiniteFace& face, int n) {
  std::vector<int> d;
  for (int k = 0; k <= n; ++k) d.push_back(face.dim(k));
  return TrajectorySpace(std::move(d));
}

std::int64_t TrajectorySpace::size() const {
  std::int64_t s = 1;
  for (int d : dims) {
    if (s > (std::int64_t{1} << 50) / std::max(d, 1)) return std::int64_t{1} << 50;
    s *= d;
  }
  return s;
}

std::int64_t TrajectorySpace::encode(const std::vector<int>& x) const {
  if (x.size() != dims.size()) throw DimensionMismatch("trajectory length");
  std::int64_t c = 0;
  for (std::size_t k = 0; k < dims.size(); ++k) c = c * dims[k] + x[k];
  return c;
}

std::vector<int> TrajectorySpace::decode(std::int64_t code) const {
  std::vector<int> x(dims.size());
  for (std::size_t k = dims.size(); k-- > 0;) {
    x[k] = static_cast<int>(code % dims[k]);
    code /= dims[k];
  }
  return x;
}

namespace {

Eigen::MatrixXd backward_matrix(const Eigen::MatrixXd& H, const Eigen::VectorXd& eta_prev, const Eigen::VectorXd* eta_next) {
  // rows: y in S'_{k+1}; columns: x in S'_k
  Eigen::MatrixXd L = (eta_prev.asDiagonal() * H).transpose();
  for (Eigen::Index y = 0; y < L.rows(); ++y) {
    const double s = L.row(y).sum();
    if (s > kMinMass) {
      L.row(y) /= s;
    } else if (eta_next && (*eta_next)(y) == 0.0) {
      L.row(y) = eta_prev.transpose();
    } else {
      throw ZeroMass("backward row " + std::to_string(y));
    }
  }
  return L;
}

void check_path_budget(const TrajectorySpace& s, std::size_t budget) {
  if (s.size() > static_cast<std::int64_t>(budget))
    throw BudgetExceeded("trajectory space of size " + std::to_string(s.size()) + " exceeds " + std::to_string(budget));
}

}  // namespace

FiniteKernel backward_kernel(const FeynmanKacModel& model, int k, const FiniteMeasure& eta_prev) {
  const FiniteFace& f = model.finite();
  if (eta_prev.size() != f.dim(k)) throw DimensionMismatch("eta_prev size");
  return FiniteKernel(backward_matrix(f.density(k + 1), eta_prev.weights(), nullptr));
}

PathMeasure path_measure(const FeynmanKacModel& model, int n, std::size_t budget) {
  const FiniteFace& f = model.finite();
  TrajectorySpace space = TrajectorySpace::of(f, n);
  check_path_budget(space, budget);
  const FlowResult flow = exact_flow(model, n);
  std::vector<Eigen::MatrixXd> L(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    L[static_cast<std::size_t>(k)] = backward_matrix(f.density(k + 1), flow.eta[static_cast<std::size_t>(k)].weights(),
                                                     &flow.eta[static_cast<std::size_t>(k + 1)].weights());
  Eigen::VectorXd w(space.size());
  for (std::int64_t c = 0; c < space.size(); ++c) {
    const auto x = space.decode(c);
    double v = flow.eta[static_cast<std::size_t>(n)][x[static_cast<std::size_t>(n)]];
    for (int k = n - 1; k >= 0 && v != 0.0; --k)
      v *= L[static_cast<std::size_t>(k)](x[static_cast<std::size_t>(k + 1)], x[static_cast<std::size_t>(k)]);
    w(c) = v;
  }
  return {std::move(space), FiniteMeasure(std::move(w))};
}

PathMeasure path_measure_direct(const FeynmanKacModel& model, int n, std::size_t budget) {
  const FiniteFace& f = model.finite();
  TrajectorySpace space = TrajectorySpace::of(f, n);
  check_path_budget(space, budget);
  Eigen::VectorXd w(space.size());
  for (std::int64_t c = 0; c < space.size(); ++c) {
    const auto x = space.decode(c);
    double v = f.initial(x[0]);
    for (int k = 1; k <= n; ++k)
      v *= f.potential[static_cast<std::size_t>(k - 1)](x[static_cast<std::size_t>(k - 1)]) *
           f.mutation[static_cast<std::size_t>(k)](x[static_cast<std::size_t>(k - 1)], x[static_cast<std::size_t>(k)]);
    w(c) = v;
  }
  return {std::move(space), normalize(FiniteMeasure(std::move(w)))};
}

double hprime_diagnostic(const FeynmanKacModel& model, int n) {
  const FlowResult flow = exact_flow(model, n);
  double g = 1.0;
  for (int p = 0; p <= n; ++p)
    for (int q = p + 1; q <= n; ++q) {
      const FiniteKernel Q = normalized_semigroup(model, flow, p, q);
      g = std::max(g, Q.matrix().rowwise().sum().maxCoeff());
    }
  return g;
}

double semigroup_dobrushin(const FeynmanKacModel& model, int p, int n) {
  Eigen::MatrixXd P = semigroup(model, p, n).matrix();
  for (Eigen::Index x = 0; x < P.rows(); ++x) {
    const double s = P.row(x).sum();
    if (!(s > kMinMass)) throw ZeroMass("Q_{p,n}(1) vanishes");
    P.row(x) /= s;
  }
  return dobrushin(P);
}

std::int64_t prefix_code(const FiniteFace& face, const std::vector<int>& x, int k) {
  std::int64_t c = 0;
  for (int j = 0; j <= k; ++j) c = c * face.dim(j) + x.at(static_cast<std::size_t>(j));
  return c;
}

FeynmanKacModel historical(const FeynmanKacModel& model, int n, std::size_t budget) {
  const FiniteFace& f = model.finite();
  if (n > f.horizon()) throw DimensionMismatch("historical lift beyond horizon");
  check_path_budget(TrajectorySpace::of(f, n), budget);
  FiniteFace h;
  h.initial = f.initial;
  h.mutation.resize(static_cast<std::size_t>(n + 1));
  h.potential.resize(static_cast<std::size_t>(n + 1));
  h.labels.resize(static_cast<std::size_t>(n + 1));
  std::vector<std::int64_t> D(static_cast<std::size_t>(n + 1));
  D[0] = f.dim(0);
  for (int k = 1; k <= n; ++k) D[static_cast<std::size_t>(k)] = D[static_cast<std::size_t>(k - 1)] * f.dim(k);
  for (int k = 0; k <= n; ++k) {
    const auto Dk = D[static_cast<std::size_t>(k)];
    auto& G = h.potential[static_cast<std::size_t>(k)];
    G.resize(Dk);
    auto& lab = h.labels[static_cast<std::size_t>(k)];
    lab.resize(static_cast<std::size_t>(Dk));
    for (std::int64_t c = 0; c < Dk; ++c) {
      const int last = static_cast<int>(c % f.dim(k));
      G(c) = f.potential[static_cast<std::size_t>(k)](last);
      const State s = f.label(k, last);
      if (k == 0) {
        lab[static_cast<std::size_t>(c)] = s;
      } else {
        const State& prev = h.labels[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(c / f.dim(k))];
        State cat(prev.size() + s.size());
        cat << prev, s;
        lab[static_cast<std::size_t>(c)] = std::move(cat);
      }
    }
    if (k >= 1) {
      const auto Dp = D[static_cast<std::size_t>(k - 1)];
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(Dp, Dk);
      for (std::int64_t c = 0; c < Dp; ++c)
        for (int y = 0; y < f.dim(k); ++y)
          M(c, c * f.dim(k) + y) = f.mutation[static_cast<std::size_t>(k)](static_cast<int>(c % f.dim(k - 1)), y);
      h.mutation[static_cast<std::size_t>(k)] = std::move(M);
    }
  }
  FeynmanKacModel out = FeynmanKacModel::from_finite(std::move(h), "historical(" + model.name + ")");
  out.lift_depth = model.lift_depth;
  out.homogeneous_state_dim = false;
  return out;
}

std::vector<int> trajectory_indices(const FiniteFace& face, const Trajectory& x) {
  std::vector<int> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = face.index(static_cast<int>(k), x[k]);
  return out;
}

Trajectory trajectory_states(const FiniteFace& face, const std::vector<int>& x) {
  Trajectory out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = face.label(static_cast<int>(k), x[k]);
  return out;
}

}  // namespace pmcmc
