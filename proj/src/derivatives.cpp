#include "pmcmc/derivatives.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "pmcmc/exactpg.hpp"

namespace pmcmc {

std::int64_t TensorShape::size() const {
  std::int64_t s = 1;
  for (int i = 0; i < q; ++i) s *= d;
  return s;
}

std::vector<int> TensorShape::decode(std::int64_t code) const {
  std::vector<int> x(static_cast<std::size_t>(q));
  for (int i = q - 1; i >= 0; --i) {
    x[static_cast<std::size_t>(i)] = static_cast<int>(code % d);
    code /= d;
  }
  return x;
}

std::int64_t TensorShape::encode(const std::vector<int>& x) const {
  std::int64_t c = 0;
  for (int v : x) c = c * d + v;
  return c;
}

Eigen::VectorXd tensor_power_function(const Eigen::VectorXd& f, int q) {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
  for (int i = 0; i < q; ++i) {
    Eigen::VectorXd next(w.size() * f.size());
    for (Eigen::Index r = 0; r < w.size(); ++r) next.segment(r * f.size(), f.size()) = w(r) * f;
    w = std::move(next);
  }
  return w;
}

Eigen::VectorXd pad_with_ones(const Eigen::VectorXd& F, int d, int l) {
  const Eigen::Index ones = TensorShape{d, l}.size();
  Eigen::VectorXd out(ones * F.size());
  for (Eigen::Index r = 0; r < ones; ++r) out.segment(r * F.size(), F.size()) = F;
  return out;
}

bool is_symmetric(const Eigen::VectorXd& F, int d, int q, double tol) {
  const TensorShape s{d, q};
  if (F.size() != s.size()) throw DimensionMismatch("tensor function of wrong size");
  const double scale = std::max(1.0, F.cwiseAbs().maxCoeff());
  for (std::int64_t c = 0; c < s.size(); ++c) {
    std::vector<int> x = s.decode(c);
    for (int j = 0; j + 1 < q; ++j) {
      std::swap(x[static_cast<std::size_t>(j)], x[static_cast<std::size_t>(j + 1)]);
      if (std::abs(F(s.encode(x)) - F(c)) > tol * scale) return false;
      std::swap(x[static_cast<std::size_t>(j)], x[static_cast<std::size_t>(j + 1)]);
    }
  }
  return true;
}

namespace {

// contract mode j of v (dims) with A (new x old)
Eigen::VectorXd contract_mode(const Eigen::VectorXd& v, std::vector<int>& dims, int j, const Eigen::MatrixXd& A) {
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < j; ++i) outer *= dims[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(j) + 1; i < dims.size(); ++i) inner *= dims[i];
  const auto old_d = static_cast<std::int64_t>(A.cols()), new_d = static_cast<std::int64_t>(A.rows());
  if (old_d != dims[static_cast<std::size_t>(j)]) throw DimensionMismatch("tensor mode differs from kernel");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(outer * new_d * inner);
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t s = 0; s < old_d; ++s)
      for (std::int64_t in = 0; in < inner; ++in) {
        const double x = v((o * old_d + s) * inner + in);
        if (x == 0.0) continue;
        for (std::int64_t r = 0; r < new_d; ++r) out((o * new_d + r) * inner + in) += A(r, s) * x;
      }
  dims[static_cast<std::size_t>(j)] = static_cast<int>(new_d);
  return out;
}

}  // namespace

Eigen::VectorXd tensor_apply_function(const Eigen::MatrixXd& K, const Eigen::VectorXd& F, int q) {
  std::vector<int> dims(static_cast<std::size_t>(q), static_cast<int>(K.cols()));
  if (F.size() != TensorShape{static_cast<int>(K.cols()), q}.size()) throw DimensionMismatch("tensor function of wrong size");
  Eigen::VectorXd v = F;
  for (int j = 0; j < q; ++j) v = contract_mode(v, dims, j, K);
  return v;
}

Eigen::VectorXd tensor_apply_measure(const Eigen::VectorXd& mu, const Eigen::MatrixXd& K, int q) {
  std::vector<int> dims(static_cast<std::size_t>(q), static_cast<int>(K.rows()));
  if (mu.size() != TensorShape{static_cast<int>(K.rows()), q}.size()) throw DimensionMismatch("tensor measure of wrong size");
  const Eigen::MatrixXd Kt = K.transpose();
  Eigen::VectorXd v = mu;
  for (int j = 0; j < q; ++j) v = contract_mode(v, dims, j, Kt);
  return v;
}

Eigen::VectorXd coalescence_push(const Eigen::VectorXd& mu, int d, const std::vector<int>& a, const std::vector<int>& b, int z) {
  const int q = static_cast<int>(a.size());
  const TensorShape s{d, q};
  if (mu.size() != s.size()) throw DimensionMismatch("tensor measure of wrong size");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mu.size());
  std::vector<int> y(static_cast<std::size_t>(q));
  for (std::int64_t c = 0; c < s.size(); ++c) {
    if (mu(c) == 0.0) continue;
    const std::vector<int> x = s.decode(c);
    for (int j = 0; j < q; ++j)
      y[static_cast<std::size_t>(j)] = b[static_cast<std::size_t>(j)] ? z : x[static_cast<std::size_t>(a[static_cast<std::size_t>(j)])];
    out(s.encode(y)) += mu(c);
  }
  return out;
}

namespace {

struct MapPair {
  std::vector<int> a, b;
  int image = 0, infected = 0;
};

std::vector<MapPair> all_map_pairs(int q) {
  std::vector<MapPair> out;
  const TensorShape as{q, q}, bs{2, q};
  for (std::int64_t ca = 0; ca < as.size(); ++ca) {
    const std::vector<int> a = as.decode(ca);
    std::vector<int> hit(static_cast<std::size_t>(q), 0);
    for (int v : a) hit[static_cast<std::size_t>(v)] = 1;
    int image = 0;
    for (int h : hit) image += h;
    for (std::int64_t cb = 0; cb < bs.size(); ++cb) {
      MapPair m;
      m.a = a;
      m.b = bs.decode(cb);
      m.image = image;
      for (int v : m.b) m.infected += v;
      out.push_back(std::move(m));
    }
  }
  return out;
}

double falling_d(double r, int k) {
  double v = 1.0;
  for (int i = 0; i < k; ++i) v *= r - i;
  return v;
}

// mu C^{(N,q)}_z
Eigen::VectorXd mixture_push(const Eigen::VectorXd& mu, int d, int q, int N, int z, const std::vector<MapPair>& pairs) {
  if (N == 1) {
    std::vector<int> id(static_cast<std::size_t>(q)), ones(static_cast<std::size_t>(q), 1);
    for (int j = 0; j < q; ++j) id[static_cast<std::size_t>(j)] = j;
    return coalescence_push(mu, d, id, ones, z);
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(mu.size());
  for (const auto& m : pairs) {
    const double wa = falling_d(N - 1, m.image) / (falling_d(q, m.image) * std::pow(N - 1.0, q));
    const double wb = std::pow(1.0 / N, m.infected) * std::pow(1.0 - 1.0 / N, q - m.infected);
    const double w = wa * wb;
    if (w == 0.0) continue;
    out += w * coalescence_push(mu, d, m.a, m.b, z);
  }
  return out;
}

void check_path(const FeynmanKacModel& model, const std::vector<int>& z, int n) {
  const FiniteFace& f = model.finite();
  if (n < 0 || n > f.horizon()) throw DimensionMismatch("horizon beyond model");
  if (static_cast<int>(z.size()) != n + 1) throw DimensionMismatch("frozen trajectory length differs from n+1");
  for (int k = 0; k <= n; ++k)
    if (z[static_cast<std::size_t>(k)] < 0 || z[static_cast<std::size_t>(k)] >= f.dim(k)) throw DimensionMismatch("frozen state outside level");
}

Eigen::MatrixXd qbar_step(const FeynmanKacModel& model, const FlowResult& flow, int k) {
  return normalized_semigroup(model, flow, k - 1, k).matrix();
}

double terminal_tensor(const Eigen::VectorXd& m, int q, const Eigen::VectorXd& F) { return tensor_power_function(m, q).dot(F); }

}  // namespace

Eigen::VectorXd frozen_mixture_flow(const FeynmanKacModel& model, const std::vector<int>& z, int N, int q, int n) {
  check_path(model, z, n);
  if (N < 1 || q < 1) throw InvalidSpec("mixture flow needs N >= 1 and q >= 1");
  const FiniteFace& f = model.finite();
  const FlowResult flow = exact_flow(model, n);
  const auto pairs = all_map_pairs(q);
  Eigen::VectorXd mu = tensor_power_function(f.initial, q);
  mu = mixture_push(mu, f.dim(0), q, N, z[0], pairs);
  for (int k = 1; k <= n; ++k) {
    mu = tensor_apply_measure(mu, qbar_step(model, flow, k), q);
    mu = mixture_push(mu, f.dim(k), q, N, z[static_cast<std::size_t>(k)], pairs);
  }
  return mu;
}

double upsilon_exact(const FeynmanKacModel& model, const std::vector<int>& z, int N, int q, int n, const Eigen::VectorXd& F) {
  const Eigen::VectorXd mu = frozen_mixture_flow(model, z, N, q, n);
  if (F.size() != mu.size()) throw DimensionMismatch("tensor function of wrong size");
  return mu.dot(F);
}

double upsilon_enumerated(const FeynmanKacModel& model, const std::vector<int>& z, int N, int q, int n, const Eigen::VectorXd& F,
                          std::size_t budget) {
  check_path(model, z, n);
  const FiniteFace& f = model.finite();
  const double g = exact_flow(model, n).gamma_mass[static_cast<std::size_t>(n)];
  const double e = frozen_expectation(f, z, N, n, [&](const SystemAtom& a) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(f.dim(n));
    for (int i = 0; i < N; ++i) m(a.at(n, i)) += 1.0 / N;
    return std::pow(a.normalizer(), q) * terminal_tensor(m, q, F);
  }, budget);
  return e / std::pow(g, q);
}

double upsilon_counts(const FeynmanKacModel& model, const std::vector<int>& z, int N, int q, int n, const Eigen::VectorXd& F,
                      std::size_t budget) {
  check_path(model, z, n);
  const FiniteFace& f = model.finite();
  const double g = exact_flow(model, n).gamma_mass[static_cast<std::size_t>(n)];
  const auto law = count_law(f, N, n, &z, [&](int k, const Eigen::VectorXd& m) {
    return std::pow(m.dot(f.potential[static_cast<std::size_t>(k)]), q);
  }, budget);
  double acc = 0.0;
  for (const auto& a : law) {
    Eigen::VectorXd m(static_cast<Eigen::Index>(a.counts.size()));
    for (std::size_t i = 0; i < a.counts.size(); ++i) m(static_cast<Eigen::Index>(i)) = static_cast<double>(a.counts[i]) / N;
    acc += a.weight * terminal_tensor(m, q, F);
  }
  return acc / std::pow(g, q);
}

double delta_eval(const FeynmanKacModel& model, const std::vector<int>& z, const InfectedMappingSequence& c, const Eigen::VectorXd& F) {
  c.validate();
  const int n = c.n(), q = c.q;
  check_path(model, z, n);
  const FiniteFace& f = model.finite();
  if (!is_symmetric(F, f.dim(n), q)) throw SymmetryViolation("delta evaluation needs a symmetric function");
  const FlowResult flow = exact_flow(model, n);
  Eigen::VectorXd mu = tensor_power_function(f.initial, q);
  mu = coalescence_push(mu, f.dim(0), c.a[0], c.b[0], z[0]);
  for (int k = 1; k <= n; ++k) {
    mu = tensor_apply_measure(mu, qbar_step(model, flow, k), q);
    mu = coalescence_push(mu, f.dim(k), c.a[static_cast<std::size_t>(k)], c.b[static_cast<std::size_t>(k)], z[static_cast<std::size_t>(k)]);
  }
  return mu.dot(F);
}

namespace {

// Chat_p v for every class p = (p1, p2), indexed p1 * (q+1) + p2
std::vector<Eigen::VectorXd> class_averages(const Eigen::VectorXd& v, int d, int q, int z, const std::vector<MapPair>& pairs) {
  std::vector<Eigen::VectorXd> out(static_cast<std::size_t>(q * (q + 1)), Eigen::VectorXd::Zero(v.size()));
  std::vector<int> count(out.size(), 0);
  for (const auto& m : pairs) {
    const auto idx = static_cast<std::size_t>((q - m.image) * (q + 1) + m.infected);
    out[idx] += coalescence_push(v, d, m.a, m.b, z);
    ++count[idx];
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    if (count[i] > 0) out[i] /= count[i];
  return out;
}

}  // namespace

Eigen::VectorXd upsilon_derivative_measure(const FeynmanKacModel& model, const std::vector<int>& z, int q, int n, int m) {
  if (m < 0) throw RangeError("negative derivative order");
  if (m > 2) throw UnsupportedOrder("derivative orders above 2 are not supported");
  check_path(model, z, n);
  if (q < 1) throw InvalidSpec("q must be >= 1");
  const FiniteFace& f = model.finite();
  const FlowResult flow = exact_flow(model, n);
  const DerivativeTable tau = tau_table(m, q);
  const auto pairs = all_map_pairs(q);
  std::vector<Eigen::VectorXd> in(static_cast<std::size_t>(m + 1));
  Eigen::VectorXd base = tensor_power_function(f.initial, q);
  for (int r = 0; r <= m; ++r) in[static_cast<std::size_t>(r)] = r == 0 ? base : Eigen::VectorXd::Zero(base.size());
  std::vector<Eigen::VectorXd> out;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) {
      const Eigen::MatrixXd Q = qbar_step(model, flow, k);
      for (auto& v : out) v = tensor_apply_measure(v, Q, q);
      in = std::move(out);
    }
    const int d = f.dim(k), zk = z[static_cast<std::size_t>(k)];
    std::vector<std::vector<Eigen::VectorXd>> buckets(static_cast<std::size_t>(m + 1));
    for (int r = 0; r <= m; ++r)
      if (in[static_cast<std::size_t>(r)].cwiseAbs().maxCoeff() > 0.0)
        buckets[static_cast<std::size_t>(r)] = class_averages(in[static_cast<std::size_t>(r)], d, q, zk, pairs);
    out.assign(static_cast<std::size_t>(m + 1), Eigen::VectorXd::Zero(in[0].size()));
    for (int r = 0; r <= m; ++r)
      for (int r2 = 0; r2 <= r; ++r2) {
        const auto& B = buckets[static_cast<std::size_t>(r2)];
        if (B.empty()) continue;
        for (int p1 = 0; p1 < q; ++p1)
          for (int p2 = 0; p2 <= q; ++p2) {
            const double t = tau.value(r - r2, p1, p2);
            if (t != 0.0) out[static_cast<std::size_t>(r)] += t * B[static_cast<std::size_t>(p1 * (q + 1) + p2)];
          }
      }
  }
  return out[static_cast<std::size_t>(m)];
}

double upsilon_derivative(const FeynmanKacModel& model, const std::vector<int>& z, int q, int n, int m, const Eigen::VectorXd& F) {
  const Eigen::VectorXd mu = upsilon_derivative_measure(model, z, q, n, m);
  if (F.size() != mu.size()) throw DimensionMismatch("tensor function of wrong size");
  return mu.dot(F);
}

double first_derivative_q1(const FeynmanKacModel& model, const std::vector<int>& z, int n, const Eigen::VectorXd& f) {
  check_path(model, z, n);
  const FlowResult flow = exact_flow(model, n);
  const double ef = flow.eta[static_cast<std::size_t>(n)](f);
  double acc = 0.0;
  for (int k = 0; k <= n; ++k) {
    const Eigen::VectorXd qf = normalized_semigroup(model, flow, k, n).matrix() * f;
    acc += qf(z[static_cast<std::size_t>(k)]) - ef;
  }
  return acc;
}

double second_derivative_q1(const FeynmanKacModel& model, const std::vector<int>& z, int n, const Eigen::VectorXd& f) {
  check_path(model, z, n);
  const FlowResult flow = exact_flow(model, n);
  const double ef = flow.eta[static_cast<std::size_t>(n)](f);
  double pairs = 0.0;
  for (int l = 0; l <= n; ++l) {
    const Eigen::VectorXd qf = normalized_semigroup(model, flow, l, n).matrix() * f;
    const double tail = qf(z[static_cast<std::size_t>(l)]);
    for (int k = 0; k < l; ++k) {
      const Eigen::VectorXd one = normalized_semigroup(model, flow, k, l).matrix().rowwise().sum();
      pairs += one(z[static_cast<std::size_t>(k)]) * tail - ef;
    }
  }
  return pairs - n * first_derivative_q1(model, z, n, f);
}

std::vector<ExtrapolationRow> richardson(const std::vector<int>& Ns, const std::vector<double>& values,
                                         const std::vector<double>& lower_terms, double predicted) {
  if (Ns.size() != values.size()) throw DimensionMismatch("one value per N");
  const int m = static_cast<int>(lower_terms.size());
  std::vector<ExtrapolationRow> rows;
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    const double N = Ns[i];
    double v = values[i];
    for (int k = 0; k < m; ++k) v -= lower_terms[static_cast<std::size_t>(k)] * std::pow(N, -k);
    ExtrapolationRow r;
    r.N = Ns[i];
    r.observed = std::pow(N, m) * v;
    r.predicted = predicted;
    r.residual = std::abs(r.observed - predicted);
    r.fitted_order = std::numeric_limits<double>::quiet_NaN();
    if (i > 0 && rows.back().residual > 0.0 && r.residual > 0.0)
      r.fitted_order = std::log(rows.back().residual / r.residual) / std::log(N / Ns[i - 1]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<ExtrapolationRow> upsilon_richardson(const FeynmanKacModel& model, const std::vector<int>& z, int q, int n, int m,
                                                 const Eigen::VectorXd& F, const std::vector<int>& Ns) {
  std::vector<double> lower;
  for (int k = 0; k < m; ++k) lower.push_back(upsilon_derivative(model, z, q, n, k, F));
  const double pred = upsilon_derivative(model, z, q, n, m, F);
  std::vector<double> values;
  for (int N : Ns) values.push_back(upsilon_exact(model, z, N, q, n, F));
  return richardson(Ns, values, lower, pred);
}

void write_extrapolation_csv(std::ostream& os, const std::vector<ExtrapolationRow>& rows) {
  os << "N,observed,predicted,residual,fitted_order\n";
  const auto prec = os.precision(17);
  for (const auto& r : rows) {
    os << r.N << ',' << r.observed << ',' << r.predicted << ',' << r.residual << ',';
    if (std::isnan(r.fitted_order)) os << "NA";
    else os << r.fitted_order;
    os << '\n';
  }
  os.precision(prec);
}

Eigen::VectorXd nonfrozen_law(const FeynmanKacModel& model, const std::vector<int>& z, int N, int q, int n, std::size_t budget) {
  check_path(model, z, n);
  const FiniteFace& f = model.finite();
  if (n + 1 > f.horizon()) throw DimensionMismatch("non-frozen law needs level n+1");
  if (q < 1 || q > N - 1) throw RangeError("non-frozen law needs 1 <= q <= N-1");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(TensorShape{f.dim(n + 1), q}.size());
  for (const auto& a : count_law(f, N, n, &z, nullptr, budget)) {
    Eigen::VectorXd m(static_cast<Eigen::Index>(a.counts.size()));
    for (std::size_t i = 0; i < a.counts.size(); ++i) m(static_cast<Eigen::Index>(i)) = static_cast<double>(a.counts[i]) / N;
    acc += a.weight * tensor_power_function(phi(f, n + 1, m), q);
  }
  return acc;
}

double normalized_first_derivative(const FeynmanKacModel& model, const std::vector<int>& z, int q, int n, const Eigen::VectorXd& F) {
  check_path(model, z, n);
  if (q < 1 || q > 2) throw UnsupportedOrder("normalized derivative implemented for q <= 2");
  const FiniteFace& f = model.finite();
  if (n + 1 > f.horizon()) throw DimensionMismatch("normalized derivative needs level n+1");
  const FlowResult flow = exact_flow(model, n + 1);
  const Eigen::MatrixXd Q = normalized_semigroup(model, flow, n, n + 1).matrix();
  const double lead = to_double(Rational(factorial(q + 2), factorial(q - 1)));
  double acc = 0.0;
  for (int l = 0; l <= 2; ++l) {
    const double c = (l % 2 ? -1.0 : 1.0) / ((q + l) * to_double(Rational(factorial(l) * factorial(2 - l))));
    const Eigen::VectorXd H = tensor_apply_function(Q, pad_with_ones(F, f.dim(n + 1), l), l + q);
    acc += c * upsilon_derivative(model, z, l + q, n, 1, H);
  }
  return lead * acc;
}

double normalized_first_derivative_q1(const FeynmanKacModel& model, const std::vector<int>& z, int n, const Eigen::VectorXd& f) {
  check_path(model, z, n);
  if (n + 1 > model.finite().horizon()) throw DimensionMismatch("normalized derivative needs level n+1");
  const FlowResult flow = exact_flow(model, n + 1);
  const Eigen::VectorXd fc = f.array() - flow.eta[static_cast<std::size_t>(n + 1)](f);
  double acc = 0.0;
  for (int k = 0; k <= n; ++k) {
    const Eigen::MatrixXd Q = normalized_semigroup(model, flow, k, n + 1).matrix();
    const Eigen::VectorXd qf = Q * fc, q1 = Q.rowwise().sum();
    acc += qf(z[static_cast<std::size_t>(k)]) - flow.eta[static_cast<std::size_t>(k)](q1.cwiseProduct(qf));
  }
  return acc;
}

FirstOrderK first_order_K(const FeynmanKacModel& model, int n, const Eigen::VectorXd& f, const std::vector<int>& z) {
  const FiniteFace& base = model.finite();
  check_path(model, z, n);
  const FeynmanKacModel h = historical(model, n);
  const FlowResult flow = exact_flow(h, n);
  FirstOrderK r;
  r.shift = flow.eta[static_cast<std::size_t>(n)](f);
  const Eigen::VectorXd fc = f.array() - r.shift;
  for (int p = 0; p <= n; ++p) {
    const Eigen::MatrixXd Q = normalized_semigroup(h, flow, p, n).matrix();
    const Eigen::VectorXd qf = Q * fc, q1 = Q.rowwise().sum();
    const double at = qf(prefix_code(base, z, p));
    r.value += flow.eta[static_cast<std::size_t>(p)](q1.cwiseProduct((at - qf.array()).matrix()));
  }
  return r;
}

Eigen::MatrixXd first_order_kernel(const FeynmanKacModel& model, int n) {
  const FiniteFace& f = model.finite();
  const TrajectorySpace space = TrajectorySpace::of(f, n);
  const auto S = space.size();
  Eigen::MatrixXd D(S, S);
  for (std::int64_t y = 0; y < S; ++y) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(S);
    e(y) = 1.0;
    for (std::int64_t z = 0; z < S; ++z) D(z, y) = first_order_K(model, n, e, space.decode(z)).value;
  }
  return D;
}

double frozen_moment(const FeynmanKacModel& model, const std::vector<int>& z, int N, int q, int n) {
  check_path(model, z, n);
  const FlowResult flow = exact_flow(model, n);
  const Eigen::VectorXd& G = model.finite().potential[static_cast<std::size_t>(n)];
  const double g = flow.gamma_mass[static_cast<std::size_t>(n)];
  const double target = g * flow.eta[static_cast<std::size_t>(n)](G);
  double acc = 0.0;
  for (int j = 0; j <= q; ++j) {
    const double ups = j == 0 ? 1.0 : upsilon_exact(model, z, N, j, n, tensor_power_function(G, j));
    acc += to_double(Rational(binomial(q, j))) * std::pow(-target, q - j) * std::pow(g, j) * ups;
  }
  return acc;
}

std::vector<MomentRow> moment_scaling_check(const FeynmanKacModel& model, const std::vector<int>& z, int n, int q_max,
                                            const std::vector<int>& Ns) {
  std::vector<MomentRow> rows;
  for (int q = 2; q <= q_max; ++q)
    for (int N : Ns) {
      MomentRow r;
      r.q = q;
      r.N = N;
      r.moment = frozen_moment(model, z, N, q, n);
      r.scaled = std::pow(N, q / 2.0) * r.moment;
      rows.push_back(r);
    }
  return rows;
}

double frozen_moment_counts(const FeynmanKacModel& model, const std::vector<int>& z, int N, int q, int n, std::size_t budget) {
  check_path(model, z, n);
  const FiniteFace& f = model.finite();
  const FlowResult flow = exact_flow(model, n);
  const Eigen::VectorXd& G = f.potential[static_cast<std::size_t>(n)];
  const double target = flow.gamma_mass[static_cast<std::size_t>(n)] * flow.eta[static_cast<std::size_t>(n)](G);
  double acc = 0.0;
  for (int j = 0; j <= q; ++j) {
    double e = 1.0;
    if (j > 0) {
      e = 0.0;
      const auto law = count_law(f, N, n, &z, [&](int k, const Eigen::VectorXd& m) {
        return std::pow(m.dot(f.potential[static_cast<std::size_t>(k)]), j);
      }, budget);
      for (const auto& a : law) {
        double mg = 0.0;
        for (std::size_t i = 0; i < a.counts.size(); ++i) mg += a.counts[i] * G(static_cast<Eigen::Index>(i));
        e += a.weight * std::pow(mg / N, j);
      }
    }
    acc += to_double(Rational(binomial(q, j))) * std::pow(-target, q - j) * e;
  }
  return acc;
}

TransferSides transfer_identity(const FeynmanKacModel& model, int N, int q, int n, const Eigen::VectorXd& F, std::size_t budget) {
  if (q < 2) throw RangeError("transfer identity needs q >= 2");
  const FiniteFace& f = model.finite();
  const PathMeasure pm = path_measure(model, n);
  TransferSides s;
  for (Eigen::Index c = 0; c < pm.measure.size(); ++c) {
    const double w = pm.measure[c];
    if (w == 0.0) continue;
    s.frozen += w * upsilon_exact(model, pm.space.decode(pm.measure.support()[static_cast<std::size_t>(c)]), N, q - 1, n, F);
  }
  const double g = exact_flow(model, n).gamma_mass[static_cast<std::size_t>(n)];
  const auto law = count_law(f, N, n, nullptr, [&](int k, const Eigen::VectorXd& m) {
    return std::pow(m.dot(f.potential[static_cast<std::size_t>(k)]), q);
  }, budget);
  for (const auto& a : law) {
    Eigen::VectorXd m(static_cast<Eigen::Index>(a.counts.size()));
    for (std::size_t i = 0; i < a.counts.size(); ++i) m(static_cast<Eigen::Index>(i)) = static_cast<double>(a.counts[i]) / N;
    s.free += a.weight * terminal_tensor(m, q - 1, F);
  }
  s.free /= std::pow(g, q);
  return s;
}

BiasIdentities bias_identities(const FeynmanKacModel& model, int N, int n, std::size_t budget) {
  const FiniteFace& f = model.finite();
  const FlowResult flow = exact_flow(model, n);
  const PathMeasure pm = path_measure(model, n);
  auto gbar = [&](int k, const Eigen::VectorXd& m) {
    return m.dot(f.potential[static_cast<std::size_t>(k)]) / flow.mean_potential[static_cast<std::size_t>(k)];
  };
  BiasIdentities b;
  for (Eigen::Index c = 0; c < pm.measure.size(); ++c) {
    const double w = pm.measure[c];
    if (w == 0.0) continue;
    const std::vector<int> z = pm.space.decode(pm.measure.support()[static_cast<std::size_t>(c)]);
    for (const auto& a : count_law(f, N, n, &z, gbar, budget)) b.normalized_frozen += w * a.weight;
    const auto inv = count_law(f, N, n, &z, [&](int k, const Eigen::VectorXd& m) {
      return 1.0 / m.dot(f.potential[static_cast<std::size_t>(k)]);
    }, budget);
    for (const auto& a : inv) b.inverse_frozen += w * a.weight;
  }
  const auto sq = count_law(f, N, n, nullptr, [&](int k, const Eigen::VectorXd& m) { return gbar(k, m) * gbar(k, m); }, budget);
  for (const auto& a : sq) b.normalized_free += a.weight;
  b.inverse_exact = 1.0 / flow.gamma_mass[static_cast<std::size_t>(n)];
  return b;
}

}  // namespace pmcmc
