#include "pmcmc/exactpg.hpp"

#include <cmath>
#include <map>
#include <unordered_map>

namespace pmcmc {

std::vector<int> SystemAtom::line(int i) const {
  std::vector<int> x(static_cast<std::size_t>(n + 1));
  for (int k = n; k >= 0; --k) {
    x[static_cast<std::size_t>(k)] = at(k, i);
    if (k > 0) i = (*ancestor)[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
  }
  return x;
}

double SystemAtom::normalizer() const {
  double z = 1.0;
  for (int p = 0; p < n; ++p) z *= (*mean_potential)[static_cast<std::size_t>(p)];
  return z;
}

double system_atom_bound(const FiniteFace& face, int N, int n, bool frozen) {
  const int free = frozen ? N - 1 : N;
  double b = std::pow(static_cast<double>(face.dim(0)), free);
  for (int k = 1; k <= n; ++k) b *= std::pow(static_cast<double>(N) * face.dim(k), free);
  return b;
}

namespace {

void check_system(const FiniteFace& face, int N, int n, const std::vector<int>* frozen) {
  if (N < 1) throw InvalidSpec("N must be >= 1");
  if (n < 0 || n > face.horizon()) throw DimensionMismatch("horizon beyond model");
  if (frozen) {
    if (static_cast<int>(frozen->size()) != n + 1) throw DimensionMismatch("frozen trajectory length differs from n+1");
    for (int k = 0; k <= n; ++k)
      if ((*frozen)[static_cast<std::size_t>(k)] < 0 || (*frozen)[static_cast<std::size_t>(k)] >= face.dim(k))
        throw DimensionMismatch("frozen state outside the level");
  }
}

class SystemEnumerator {
 public:
  SystemEnumerator(const FiniteFace& f, int N, int n, const std::vector<int>* frozen, const AtomVisitor& visit)
      : f_(f), N_(N), n_(n), frozen_(frozen), visit_(visit) {
    st_.assign(static_cast<std::size_t>(n + 1), std::vector<int>(static_cast<std::size_t>(N), 0));
    anc_.assign(static_cast<std::size_t>(n + 1), std::vector<int>(static_cast<std::size_t>(N), 0));
    mean_.assign(static_cast<std::size_t>(n + 1), 0.0);
    atom_.N = N;
    atom_.n = n;
    atom_.state = &st_;
    atom_.ancestor = &anc_;
    atom_.mean_potential = &mean_;
  }

  void run() { step(0, 0, 1.0); }

 private:
  void step(int k, int i, double prob) {
    const auto uk = static_cast<std::size_t>(k);
    if (i == N_) {
      const Eigen::VectorXd& G = f_.potential[uk];
      double s = 0.0;
      for (int j = 0; j < N_; ++j) s += G(st_[uk][static_cast<std::size_t>(j)]);
      mean_[uk] = s / N_;
      if (k == n_) {
        atom_.prob = prob;
        visit_(atom_);
      } else if (s > 0.0) {
        step(k + 1, 0, prob);
      }
      return;
    }
    const auto ui = static_cast<std::size_t>(i);
    if (frozen_ && i == 0) {
      st_[uk][0] = (*frozen_)[uk];
      anc_[uk][0] = 0;
      step(k, 1, prob);
      return;
    }
    if (k == 0) {
      for (int s = 0; s < f_.dim(0); ++s) {
        const double p = f_.initial(s);
        if (p <= 0.0) continue;
        st_[0][ui] = s;
        step(0, i + 1, prob * p);
      }
      return;
    }
    const Eigen::VectorXd& G = f_.potential[uk - 1];
    const Eigen::MatrixXd& M = f_.mutation[uk];
    const double total = mean_[uk - 1] * N_;
    for (int a = 0; a < N_; ++a) {
      const int x = st_[uk - 1][static_cast<std::size_t>(a)];
      const double w = G(x) / total;
      if (w <= 0.0) continue;
      anc_[uk][ui] = a;
      for (int y = 0; y < f_.dim(k); ++y) {
        const double p = w * M(x, y);
        if (p <= 0.0) continue;
        st_[uk][ui] = y;
        step(k, i + 1, prob * p);
      }
    }
  }

  const FiniteFace& f_;
  int N_, n_;
  const std::vector<int>* frozen_;
  const AtomVisitor& visit_;
  SystemAtom atom_;
  std::vector<std::vector<int>> st_, anc_;
  std::vector<double> mean_;
};

}  // namespace

void enumerate_system(const FiniteFace& face, int N, int n, const std::vector<int>* frozen, const AtomVisitor& visit,
                      std::size_t budget) {
  check_system(face, N, n, frozen);
  const double bound = system_atom_bound(face, N, n, frozen != nullptr);
  if (bound > static_cast<double>(budget))
    throw BudgetExceeded("particle system enumeration needs up to " + std::to_string(bound) + " atoms");
  SystemEnumerator e(face, N, n, frozen, visit);
  e.run();
}

double free_expectation(const FiniteFace& face, int N, int n, const std::function<double(const SystemAtom&)>& h, std::size_t budget) {
  double acc = 0.0;
  enumerate_system(face, N, n, nullptr, [&](const SystemAtom& a) { acc += a.prob * h(a); }, budget);
  return acc;
}

double frozen_expectation(const FiniteFace& face, const std::vector<int>& z, int N, int n,
                          const std::function<double(const SystemAtom&)>& h, std::size_t budget) {
  double acc = 0.0;
  enumerate_system(face, N, n, &z, [&](const SystemAtom& a) { acc += a.prob * h(a); }, budget);
  return acc;
}

void backward_line_law(const FiniteFace& face, const SystemAtom& atom, const std::function<void(std::int64_t, double)>& visit) {
  const int N = atom.N, n = atom.n;
  std::vector<std::int64_t> radix(static_cast<std::size_t>(n + 1), 1);
  for (int k = n - 1; k >= 0; --k) radix[static_cast<std::size_t>(k)] = radix[static_cast<std::size_t>(k + 1)] * face.dim(k + 1);
  std::function<void(int, int, std::int64_t, double)> down = [&](int k, int j, std::int64_t code, double w) {
    const int y = atom.at(k, j);
    code += radix[static_cast<std::size_t>(k)] * y;
    if (k == 0) {
      visit(code, w);
      return;
    }
    const Eigen::VectorXd& G = face.potential[static_cast<std::size_t>(k - 1)];
    const Eigen::MatrixXd& M = face.mutation[static_cast<std::size_t>(k)];
    double s = 0.0;
    std::vector<double> h(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) {
      const int x = atom.at(k - 1, i);
      h[static_cast<std::size_t>(i)] = G(x) * M(x, y);
      s += h[static_cast<std::size_t>(i)];
    }
    if (!(s > 0.0)) throw ZeroMass("backward row at level " + std::to_string(k - 1));
    for (int i = 0; i < N; ++i)
      if (h[static_cast<std::size_t>(i)] > 0.0) down(k - 1, i, code, w * h[static_cast<std::size_t>(i)] / s);
  };
  for (int j = 0; j < N; ++j) down(n, j, 0, 1.0 / N);
}

Eigen::VectorXd phi(const FiniteFace& face, int k, const Eigen::VectorXd& m) {
  if (k == 0) return face.initial;
  const Eigen::VectorXd& G = face.potential[static_cast<std::size_t>(k - 1)];
  const Eigen::VectorXd w = m.cwiseProduct(G);
  const double s = w.sum();
  if (!(s > 0.0)) throw ZeroMass("m(G) = 0 at level " + std::to_string(k - 1));
  return face.mutation[static_cast<std::size_t>(k)].transpose() * w / s;
}

namespace {

double log_binomial_bound(int F, int d) { return std::lgamma(F + d) - std::lgamma(F + 1) - std::lgamma(d); }

// visit(counts, probability) over Multinomial(F, p)
void multinomial(int F, const Eigen::VectorXd& p, const std::function<void(const std::vector<int>&, double)>& visit) {
  const int d = static_cast<int>(p.size());
  std::vector<int> c(static_cast<std::size_t>(d), 0);
  const double lf = std::lgamma(F + 1.0);
  std::function<void(int, int, double)> rec = [&](int j, int left, double logw) {
    if (j == d - 1) {
      if (left > 0 && p(j) <= 0.0) return;
      c[static_cast<std::size_t>(j)] = left;
      const double lw = logw + (left > 0 ? left * std::log(p(j)) : 0.0) - std::lgamma(left + 1.0);
      visit(c, std::exp(lf + lw));
      return;
    }
    const int hi = p(j) > 0.0 ? left : 0;
    for (int x = 0; x <= hi; ++x) {
      c[static_cast<std::size_t>(j)] = x;
      rec(j + 1, left - x, logw + (x > 0 ? x * std::log(p(j)) : 0.0) - std::lgamma(x + 1.0));
    }
  };
  rec(0, F, 0.0);
}

Eigen::VectorXd to_measure(const std::vector<int>& c, int N) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) m(static_cast<Eigen::Index>(i)) = static_cast<double>(c[i]) / N;
  return m;
}

}  // namespace

std::vector<CountAtom> count_law(const FiniteFace& face, int N, int n, const std::vector<int>* frozen, const CountWeight& level_weight,
                                 std::size_t budget) {
  check_system(face, N, n, frozen);
  const int F = frozen ? N - 1 : N;
  double work = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double here = std::exp(log_binomial_bound(F, face.dim(k)));
    work += k == 0 ? here : here * std::exp(log_binomial_bound(F, face.dim(k - 1)));
  }
  if (work > static_cast<double>(budget)) throw BudgetExceeded("count engine needs about " + std::to_string(work) + " transitions");
  std::map<std::vector<int>, double> cur;
  auto add_frozen = [&](std::vector<int> c, int k) {
    if (frozen) ++c[static_cast<std::size_t>((*frozen)[static_cast<std::size_t>(k)])];
    return c;
  };
  multinomial(F, face.initial, [&](const std::vector<int>& c, double p) {
    if (p > 0.0) cur[add_frozen(c, 0)] += p;
  });
  for (int k = 0; k < n; ++k) {
    std::map<std::vector<int>, double> next;
    for (const auto& [c, w0] : cur) {
      const Eigen::VectorXd m = to_measure(c, N);
      double w = w0;
      if (level_weight) w *= level_weight(k, m);
      if (w == 0.0) continue;
      if (!(m.dot(face.potential[static_cast<std::size_t>(k)]) > 0.0)) continue;
      const Eigen::VectorXd p = phi(face, k + 1, m);
      multinomial(F, p, [&](const std::vector<int>& c2, double q) {
        if (q > 0.0) next[add_frozen(c2, k + 1)] += w * q;
      });
    }
    cur = std::move(next);
  }
  std::vector<CountAtom> out;
  out.reserve(cur.size());
  for (auto& [c, w] : cur) out.push_back({c, w});
  return out;
}

Eigen::VectorXd frozen_predictive(const FiniteFace& face, const std::vector<int>& z, int N, int k, std::size_t budget) {
  if (k == 0) return face.initial;
  const std::vector<int> head(z.begin(), z.begin() + k);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(face.dim(k));
  for (const auto& a : count_law(face, N, k - 1, &head, nullptr, budget)) acc += a.weight * phi(face, k, to_measure(a.counts, N));
  return acc;
}

namespace {

void check_kernel_budget(const TrajectorySpace& space, double per_row, std::size_t budget) {
  const double total = static_cast<double>(space.size()) * per_row;
  if (total > static_cast<double>(budget)) throw BudgetExceeded("kernel enumeration needs about " + std::to_string(total) + " atoms");
}

}  // namespace

EnumeratedKernel enumerate_pg_kernel(const FeynmanKacModel& model, int N, int n, PgVariant variant, std::size_t budget) {
  const FiniteFace& f = model.finite();
  TrajectorySpace space = TrajectorySpace::of(f, n);
  check_kernel_budget(space, system_atom_bound(f, N, n, true), budget);
  const auto S = space.size();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(S, S);
  for (std::int64_t z = 0; z < S; ++z) {
    const std::vector<int> zi = space.decode(z);
    auto row = K.row(z);
    enumerate_system(f, N, n, &zi, [&](const SystemAtom& a) {
      if (variant == PgVariant::Ancestral) {
        for (int i = 0; i < N; ++i) row(space.encode(a.line(i))) += a.prob / N;
      } else {
        backward_line_law(f, a, [&](std::int64_t c, double w) { row(c) += a.prob * w; });
      }
    }, budget);
  }
  EnumeratedKernel out;
  out.space = space;
  out.kernel = FiniteKernel(std::move(K));
  out.variant = variant;
  out.N = N;
  return out;
}

EnumeratedKernel pg_kernel_counts(const FeynmanKacModel& model, int N, int n, std::size_t budget) {
  const FiniteFace& f = model.finite();
  TrajectorySpace space = TrajectorySpace::of(f, n);
  const FeynmanKacModel h = historical(model, n, budget);
  const FiniteFace& hf = h.finite();
  const auto S = space.size();
  Eigen::MatrixXd K(S, S);
  for (std::int64_t z = 0; z < S; ++z) {
    const std::vector<int> zi = space.decode(z);
    std::vector<int> zh(static_cast<std::size_t>(n + 1));
    for (int k = 0; k <= n; ++k) zh[static_cast<std::size_t>(k)] = static_cast<int>(prefix_code(f, zi, k));
    Eigen::VectorXd row = (1.0 - 1.0 / N) * frozen_predictive(hf, zh, N, n, budget);
    row(z) += 1.0 / N;
    K.row(z) = row.transpose();
  }
  EnumeratedKernel out;
  out.space = space;
  out.kernel = FiniteKernel(std::move(K));
  out.N = N;
  return out;
}

namespace {

std::int64_t ipow(std::int64_t b, int e) {
  std::int64_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

// sorted tuple of N level-k states, base d
std::int64_t multiset_code(std::vector<int> v, int d) {
  std::sort(v.begin(), v.end());
  std::int64_t c = 0;
  for (int x : v) c = c * d + x;
  return c;
}

std::vector<std::int64_t> sorted_codes(std::vector<std::int64_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

std::vector<std::vector<int>> ConfigurationMeasure::decode(StateId code) const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n + 1), std::vector<int>(static_cast<std::size_t>(N)));
  for (int k = n; k >= 0; --k) {
    const int d = dims[static_cast<std::size_t>(k)];
    std::int64_t c = code % ipow(d, N);
    code /= ipow(d, N);
    for (int i = N - 1; i >= 0; --i) {
      out[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = static_cast<int>(c % d);
      c /= d;
    }
  }
  return out;
}

ConfigurationMeasure many_body_measure(const FeynmanKacModel& model, int N, int n, std::size_t budget) {
  const FiniteFace& f = model.finite();
  ConfigurationMeasure out;
  out.N = N;
  out.n = n;
  double logsize = 0.0;
  for (int k = 0; k <= n; ++k) {
    out.dims.push_back(f.dim(k));
    logsize += N * std::log(static_cast<double>(f.dim(k)));
  }
  if (logsize > std::log(9.0e18)) throw BudgetExceeded("configuration codes overflow 64 bits");
  std::map<StateId, double> acc;
  enumerate_system(f, N, n, nullptr, [&](const SystemAtom& a) {
    StateId code = 0;
    for (int k = 0; k <= n; ++k) code = code * ipow(f.dim(k), N) + multiset_code((*a.state)[static_cast<std::size_t>(k)], f.dim(k));
    acc[code] += a.prob * a.normalizer();
  }, budget);
  std::vector<StateId> support;
  Eigen::VectorXd w(static_cast<Eigen::Index>(acc.size()));
  for (const auto& [c, v] : acc) {
    w(static_cast<Eigen::Index>(support.size())) = v;
    support.push_back(c);
  }
  out.gamma = FiniteMeasure(std::move(support), std::move(w));
  out.mass = out.gamma.mass();
  return out;
}

namespace {

using Config = std::vector<std::vector<std::int64_t>>;

Config population_config(const SystemAtom& a) {
  Config c(static_cast<std::size_t>(a.n + 1));
  for (int k = 0; k <= a.n; ++k)
    for (int i = 0; i < a.N; ++i) c[static_cast<std::size_t>(k)].push_back(a.at(k, i));
  return c;
}

Config genealogy_config(const FiniteFace& f, const SystemAtom& a) {
  Config c(static_cast<std::size_t>(a.n + 1));
  for (int k = 0; k <= a.n; ++k) {
    std::vector<std::int64_t> level;
    for (int i = 0; i < a.N; ++i) {
      std::int64_t code = 0;
      int j = i;
      std::vector<int> rev;
      for (int l = k; l >= 0; --l) {
        rev.push_back(a.at(l, j));
        if (l > 0) j = (*a.ancestor)[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)];
      }
      for (int l = 0; l <= k; ++l) code = code * f.dim(l) + rev[static_cast<std::size_t>(k - l)];
      level.push_back(code);
    }
    c[static_cast<std::size_t>(k)] = std::move(level);
  }
  return c;
}

Config canonical(Config c) {
  for (auto& level : c) level = sorted_codes(level);
  return c;
}

// Lines of the chain: P(x) Z(x) for every trajectory x.
template <typename Visit>
void chain_paths(const FiniteFace& f, int n, Visit&& visit) {
  const TrajectorySpace space = TrajectorySpace::of(f, n);
  for (std::int64_t c = 0; c < space.size(); ++c) {
    const std::vector<int> x = space.decode(c);
    double w = f.initial(x[0]);
    for (int k = 1; k <= n && w > 0.0; ++k)
      w *= f.potential[static_cast<std::size_t>(k - 1)](x[static_cast<std::size_t>(k - 1)]) *
           f.mutation[static_cast<std::size_t>(k)](x[static_cast<std::size_t>(k - 1)], x[static_cast<std::size_t>(k)]);
    if (w > 0.0) visit(c, x, w);
  }
}

double evaluate_symmetric(const ConfigurationFunction& F, const std::vector<int>& path, const Config& c, std::size_t salt) {
  const double v = F(path, c);
  if (c.empty() || c[0].size() < 2) return v;
  Config swapped = c;
  const std::size_t k = salt % c.size();
  std::swap(swapped[k][0], swapped[k][1]);
  Config rotated = c;
  for (auto& level : rotated) std::rotate(level.begin(), level.begin() + 1, level.end());
  const double tol = 1e-12 * std::max(1.0, std::abs(v));
  if (std::abs(F(path, swapped) - v) > tol || std::abs(F(path, rotated) - v) > tol)
    throw SymmetryViolation("function depends on the order of particles");
  return v;
}

}  // namespace

std::pair<double, double> duality_sides(const FeynmanKacModel& model, int N, int n, DualityForm form, const ConfigurationFunction& F,
                                        std::size_t budget) {
  const FiniteFace& f = model.finite();
  std::size_t salt = 0;
  auto config_of = [&](const SystemAtom& a) { return form == DualityForm::Genealogy ? genealogy_config(f, a) : population_config(a); };
  double lhs = 0.0;
  enumerate_system(f, N, n, nullptr, [&](const SystemAtom& a) {
    const Config c = config_of(a);
    const double z = a.normalizer();
    if (form == DualityForm::Backward) {
      const TrajectorySpace space = TrajectorySpace::of(f, n);
      backward_line_law(f, a, [&](std::int64_t code, double w) {
        lhs += a.prob * z * w * evaluate_symmetric(F, space.decode(code), c, salt++);
      });
      return;
    }
    for (int i = 0; i < N; ++i) {
      const std::vector<int> x = a.line(i);
      const std::vector<int> path = form == DualityForm::Terminal ? std::vector<int>{x.back()} : x;
      lhs += a.prob * z * evaluate_symmetric(F, path, c, salt++) / N;
    }
  }, budget);
  double rhs = 0.0;
  chain_paths(f, n, [&](std::int64_t, const std::vector<int>& x, double w) {
    const std::vector<int> path = form == DualityForm::Terminal ? std::vector<int>{x.back()} : x;
    enumerate_system(f, N, n, &x, [&](const SystemAtom& a) { rhs += w * a.prob * evaluate_symmetric(F, path, config_of(a), salt++); }, budget);
  });
  return {lhs, rhs};
}

DualityReport verify_duality(const FeynmanKacModel& model, int N, int n, std::size_t budget) {
  const FiniteFace& f = model.finite();
  const TrajectorySpace space = TrajectorySpace::of(f, n);
  using Key = std::pair<std::int64_t, Config>;
  std::map<Key, double> terminal, backward, genealogy;
  enumerate_system(f, N, n, nullptr, [&](const SystemAtom& a) {
    const double w = a.prob * a.normalizer();
    const Config pc = canonical(population_config(a));
    const Config gc = canonical(genealogy_config(f, a));
    for (int i = 0; i < N; ++i) {
      const std::vector<int> x = a.line(i);
      terminal[{x.back(), pc}] += w / N;
      genealogy[{space.encode(x), gc}] += w / N;
    }
    backward_line_law(f, a, [&](std::int64_t code, double v) { backward[{code, pc}] += w * v; });
  }, budget);
  chain_paths(f, n, [&](std::int64_t code, const std::vector<int>& x, double w) {
    enumerate_system(f, N, n, &x, [&](const SystemAtom& a) {
      const double v = w * a.prob;
      const Config pc = canonical(population_config(a));
      terminal[{x.back(), pc}] -= v;
      backward[{code, pc}] -= v;
      genealogy[{code, canonical(genealogy_config(f, a))}] -= v;
    }, budget);
  });
  auto worst = [](const std::map<Key, double>& m) {
    double r = 0.0;
    for (const auto& [k, v] : m) r = std::max(r, std::abs(v));
    return r;
  };
  DualityReport rep;
  rep.terminal = worst(terminal);
  rep.backward = worst(backward);
  rep.genealogy = worst(genealogy);
  rep.atoms = terminal.size() + backward.size() + genealogy.size();
  return rep;
}

double verify_ancestral_backward(const FeynmanKacModel& model, int N, int n, std::size_t budget) {
  const FiniteFace& f = model.finite();
  const TrajectorySpace space = TrajectorySpace::of(f, n);
  struct Entry {
    double mass = 0.0;
    std::unordered_map<std::int64_t, double> ancestral, backward;
  };
  std::map<std::int64_t, Entry> table;
  enumerate_system(f, N, n, nullptr, [&](const SystemAtom& a) {
    std::int64_t key = 0;
    for (int k = 0; k <= n; ++k)
      for (int i = 0; i < N; ++i) key = key * f.dim(k) + a.at(k, i);
    Entry& e = table[key];
    const bool first = e.mass == 0.0;
    e.mass += a.prob;
    for (int i = 0; i < N; ++i) e.ancestral[space.encode(a.line(i))] += a.prob / N;
    if (first) backward_line_law(f, a, [&](std::int64_t c, double w) { e.backward[c] += w; });
  }, budget);
  double worst = 0.0;
  for (auto& [key, e] : table) {
    double tv = 0.0;
    for (const auto& [c, w] : e.ancestral) {
      const auto it = e.backward.find(c);
      tv += std::abs(w / e.mass - (it == e.backward.end() ? 0.0 : it->second));
    }
    for (const auto& [c, w] : e.backward)
      if (!e.ancestral.count(c)) tv += w;
    worst = std::max(worst, tv);
  }
  return worst;
}

std::vector<double> convergence_profile(const EnumeratedKernel& K, const FiniteMeasure& target, int m_max) {
  const Eigen::MatrixXd& M = K.matrix();
  if (target.size() != M.rows()) throw DimensionMismatch("target measure differs from kernel space");
  std::vector<double> out;
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(M.rows(), M.cols());
  for (int m = 1; m <= m_max; ++m) {
    P = P * M;
    double worst = 0.0;
    for (Eigen::Index z = 0; z < P.rows(); ++z) worst = std::max(worst, tv_distance(P.row(z).transpose(), target.weights()));
    out.push_back(worst);
  }
  return out;
}

double invariance_residual(const EnumeratedKernel& K, const FiniteMeasure& target) {
  if (target.size() != K.matrix().rows()) throw DimensionMismatch("target measure differs from kernel space");
  return tv_distance(K.matrix().transpose() * target.weights(), target.weights());
}

double detailed_balance_residual(const EnumeratedKernel& K, const FiniteMeasure& target) {
  const Eigen::MatrixXd& M = K.matrix();
  if (target.size() != M.rows()) throw DimensionMismatch("target measure differs from kernel space");
  const Eigen::MatrixXd flux = target.weights().asDiagonal() * M;
  return (flux - flux.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace pmcmc
