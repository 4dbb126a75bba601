#include "pmcmc/combinatorics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "pmcmc/errors.hpp"

namespace pmcmc {

BigInt factorial(int n) {
  if (n < 0) throw RangeError("factorial of a negative integer");
  BigInt r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

namespace {

std::vector<std::vector<BigInt>> stirling_rows(int q, bool first) {
  std::vector<std::vector<BigInt>> s(static_cast<std::size_t>(q + 1), std::vector<BigInt>(static_cast<std::size_t>(q + 1), 0));
  s[0][0] = 1;
  for (int i = 1; i <= q; ++i)
    for (int j = 1; j <= i; ++j) {
      const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
      if (first)
        s[ui][uj] = s[ui - 1][uj - 1] - BigInt(i - 1) * s[ui - 1][uj];
      else
        s[ui][uj] = s[ui - 1][uj - 1] + BigInt(j) * s[ui - 1][uj];
    }
  return s;
}

}  // namespace

BigInt stirling1(int q, int p) {
  if (q < 0 || p < 0) throw RangeError("stirling arguments must be non-negative");
  if (p > q) return 0;
  return stirling_rows(q, true)[static_cast<std::size_t>(q)][static_cast<std::size_t>(p)];
}

BigInt stirling2(int q, int p) {
  if (q < 0 || p < 0) throw RangeError("stirling arguments must be non-negative");
  if (p > q) return 0;
  return stirling_rows(q, false)[static_cast<std::size_t>(q)][static_cast<std::size_t>(p)];
}

BigInt falling(std::int64_t r, int q) {
  if (q < 0) throw RangeError("falling factorial order must be non-negative");
  BigInt v = 1;
  for (int i = 0; i < q; ++i) v *= BigInt(r - i);
  return v;
}

BigInt binomial(std::int64_t n, std::int64_t k) {
  if (k < 0) return 0;
  if (n == -1) return k == 0 ? 1 : 0;
  if (n < -1) throw RangeError("binomial with top below -1");
  if (k > n) return 0;
  k = std::min(k, n - k);
  BigInt v = 1;
  for (std::int64_t i = 1; i <= k; ++i) v = v * BigInt(n - k + i) / BigInt(i);
  return v;
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

std::string to_string(const Rational& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

Rational coal_inf_exact(int N, int q, int p1, int p2) {
  if (q < 1 || q >= N) throw RangeError("coalescence law needs 1 <= q < N");
  if (p1 < 0 || p1 >= q || p2 < 0 || p2 > q) throw RangeError("index outside 0<=p1<q, 0<=p2<=q");
  const BigInt num = stirling2(q, q - p1) * falling(N - 1, q - p1) * binomial(q, p2) * boost::multiprecision::pow(BigInt(N - 1), static_cast<unsigned>(q - p2));
  const BigInt den = boost::multiprecision::pow(BigInt(N - 1), static_cast<unsigned>(q)) * boost::multiprecision::pow(BigInt(N), static_cast<unsigned>(q));
  return Rational(num, den);
}

Eigen::MatrixXd coal_inf_law(int N, int q) {
  if (q < 1 || q >= N) throw RangeError("coalescence law needs 1 <= q < N");
  Eigen::MatrixXd P(q, q + 1);
  for (int p1 = 0; p1 < q; ++p1)
    for (int p2 = 0; p2 <= q; ++p2) P(p1, p2) = to_double(coal_inf_exact(N, q, p1, p2));
  return P;
}

Rational DerivativeTable::operator()(int m, int p1, int p2) const {
  if (m < 0 || m > m_max) throw RangeError("derivative order outside table");
  const auto it = tau.find({m, p1, p2});
  return it == tau.end() ? Rational(0) : it->second;
}

Rational alpha_coefficient(int q, int p1, int p2, int k1, int k2, int k3) {
  BigInt v = stirling2(q, q - p1) * binomial(q, p2) * stirling1(q - p1, q - p1 - k1) * binomial(q - p2, k2) *
             binomial(p1 + k1 + k3 - 1, k3);
  if (k2 % 2) v = -v;
  return Rational(v);
}

DerivativeTable tau_table(int m_max, int q) {
  if (q < 1) throw RangeError("tau table needs q >= 1");
  if (m_max < 0) throw RangeError("negative derivative order");
  DerivativeTable t;
  t.q = q;
  t.m_max = m_max;
  for (int m = 0; m <= m_max; ++m)
    for (int p1 = 0; p1 < q; ++p1)
      for (int p2 = 0; p2 <= q; ++p2) {
        Rational acc = 0;
        for (int k1 = 0; k1 < q - p1; ++k1)
          for (int k2 = 0; k2 <= q - p2; ++k2) {
            const int k3 = m - p1 - p2 - k1 - k2;
            if (k3 < 0) continue;
            acc += alpha_coefficient(q, p1, p2, k1, k2, k3);
          }
        if (acc != 0) t.tau[{m, p1, p2}] = acc;
      }
  return t;
}

void write_tau_csv(std::ostream& os, const DerivativeTable& t) {
  os << "m,q,p1,p2,tau\n";
  for (int m = 0; m <= t.m_max; ++m)
    for (int p1 = 0; p1 < t.q; ++p1)
      for (int p2 = 0; p2 <= t.q; ++p2) os << m << ',' << t.q << ',' << p1 << ',' << p2 << ',' << t(m, p1, p2) << '\n';
}

Rational multilevel_tau(const DerivativeTable& t, int m, const std::vector<CoalInfIndex>& p) {
  // distribute m over the levels
  std::vector<Rational> acc(static_cast<std::size_t>(m + 1), 0);
  acc[0] = 1;
  for (const auto& pk : p) {
    std::vector<Rational> next(static_cast<std::size_t>(m + 1), 0);
    for (int r = 0; r <= m; ++r) {
      if (acc[static_cast<std::size_t>(r)] == 0) continue;
      for (int s = 0; r + s <= m && s <= t.m_max; ++s) {
        const Rational v = t(s, pk.p1, pk.p2);
        if (v != 0) next[static_cast<std::size_t>(r + s)] += acc[static_cast<std::size_t>(r)] * v;
      }
    }
    acc = std::move(next);
  }
  return acc[static_cast<std::size_t>(m)];
}

LawTaylorReport law_taylor_check(int N, int q, int m) {
  const DerivativeTable t = tau_table(m, q);
  LawTaylorReport r;
  r.N = N;
  r.q = q;
  r.m = m;
  Rational worst = 0;
  for (int p1 = 0; p1 < q; ++p1)
    for (int p2 = 0; p2 <= q; ++p2) {
      Rational d = coal_inf_exact(N, q, p1, p2);
      Rational scale = 1;
      for (int k = 0; k <= m; ++k) {
        d -= scale * t(k, p1, p2);
        scale /= N;
      }
      worst = std::max(worst, d < 0 ? Rational(-d) : d);
    }
  r.residual = to_double(worst);
  r.constant = to_double(worst * Rational(boost::multiprecision::pow(BigInt(N), static_cast<unsigned>(m + 1))));
  return r;
}

int InfectedMappingSequence::coalescences(int k) const {
  const auto& ak = a.at(static_cast<std::size_t>(k));
  std::vector<int> hit(static_cast<std::size_t>(q), 0);
  for (int v : ak) hit[static_cast<std::size_t>(v)] = 1;
  return q - std::accumulate(hit.begin(), hit.end(), 0);
}

int InfectedMappingSequence::infections(int k) const {
  const auto& bk = b.at(static_cast<std::size_t>(k));
  return std::accumulate(bk.begin(), bk.end(), 0);
}

int InfectedMappingSequence::total() const {
  int t = 0;
  for (int k = 0; k <= n(); ++k) t += coalescences(k) + infections(k);
  return t;
}

void InfectedMappingSequence::validate() const {
  if (q < 1) throw InvalidSpec("mapping sequence needs q >= 1");
  if (a.empty() || a.size() != b.size()) throw DimensionMismatch("mapping sequence needs matching a and b levels");
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (static_cast<int>(a[k].size()) != q || static_cast<int>(b[k].size()) != q) throw DimensionMismatch("map of wrong arity");
    for (int i = 0; i < q; ++i) {
      if (a[k][static_cast<std::size_t>(i)] < 0 || a[k][static_cast<std::size_t>(i)] >= q) throw InvalidSpec("map value out of range");
      if (b[k][static_cast<std::size_t>(i)] != 0 && b[k][static_cast<std::size_t>(i)] != 1) throw InvalidSpec("infection flag not 0/1");
    }
  }
}

InfectedMappingSequence InfectedMappingSequence::identity(int q, int n) {
  InfectedMappingSequence s;
  s.q = q;
  std::vector<int> id(static_cast<std::size_t>(q));
  std::iota(id.begin(), id.end(), 0);
  s.a.assign(static_cast<std::size_t>(n + 1), id);
  s.b.assign(static_cast<std::size_t>(n + 1), std::vector<int>(static_cast<std::size_t>(q), 0));
  return s;
}

InfectedMappingSequence act(const InfectedMappingSequence& s, const std::vector<std::vector<int>>& perms) {
  s.validate();
  if (static_cast<int>(perms.size()) != s.n() + 2) throw DimensionMismatch("action needs n+2 permutations");
  InfectedMappingSequence r = s;
  for (int k = 0; k <= s.n(); ++k) {
    const auto& sk = perms[static_cast<std::size_t>(k)];
    const auto& sk1 = perms[static_cast<std::size_t>(k + 1)];
    for (int i = 0; i < s.q; ++i) {
      const auto j = static_cast<std::size_t>(sk1[static_cast<std::size_t>(i)]);
      r.a[static_cast<std::size_t>(k)][j] = sk[static_cast<std::size_t>(s.a[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)])];
      r.b[static_cast<std::size_t>(k)][j] = s.b[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
    }
  }
  return r;
}

BigInt stabilizer_formula(const InfectedMappingSequence& s) {
  s.validate();
  const int q = s.q, n = s.n();
  std::map<std::vector<std::pair<int, int>>, int> intern;
  auto id_of = [&](std::vector<std::pair<int, int>> children) {
    std::sort(children.begin(), children.end());
    const auto it = intern.emplace(std::move(children), static_cast<int>(intern.size())).first;
    return it->second;
  };
  BigInt stab = 1;
  auto multiplicities = [&](std::vector<std::pair<int, int>> c) {
    std::sort(c.begin(), c.end());
    for (std::size_t i = 0; i < c.size();) {
      std::size_t j = i;
      while (j < c.size() && c[j] == c[i]) ++j;
      stab *= factorial(static_cast<int>(j - i));
      i = j;
    }
  };
  std::vector<int> code(static_cast<std::size_t>(q), id_of({}));
  for (int k = n; k >= 0; --k) {
    std::vector<std::vector<std::pair<int, int>>> children(static_cast<std::size_t>(q));
    for (int i = 0; i < q; ++i)
      children[static_cast<std::size_t>(s.a[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)])].emplace_back(
          s.b[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)], code[static_cast<std::size_t>(i)]);
    std::vector<int> next(static_cast<std::size_t>(q));
    for (int j = 0; j < q; ++j) {
      multiplicities(children[static_cast<std::size_t>(j)]);
      next[static_cast<std::size_t>(j)] = id_of(children[static_cast<std::size_t>(j)]);
    }
    code = std::move(next);
  }
  std::vector<std::pair<int, int>> roots;
  for (int c : code) roots.emplace_back(0, c);
  multiplicities(roots);
  return stab;
}

namespace {

std::vector<std::vector<int>> all_permutations(int q) {
  std::vector<int> p(static_cast<std::size_t>(q));
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

// level code: a in base q (entry 0 most significant), then b in base 2
struct LevelCodec {
  int q;
  int a_count, b_count;

  explicit LevelCodec(int q_) : q(q_), a_count(1), b_count(1 << q_) {
    for (int i = 0; i < q; ++i) a_count *= q;
  }
  int size() const { return a_count * b_count; }
  int encode(const std::vector<int>& a, const std::vector<int>& b) const {
    int ca = 0, cb = 0;
    for (int i = 0; i < q; ++i) {
      ca = ca * q + a[static_cast<std::size_t>(i)];
      cb = cb * 2 + b[static_cast<std::size_t>(i)];
    }
    return ca * b_count + cb;
  }
  void decode(int c, std::vector<int>& a, std::vector<int>& b) const {
    a.assign(static_cast<std::size_t>(q), 0);
    b.assign(static_cast<std::size_t>(q), 0);
    int ca = c / b_count, cb = c % b_count;
    for (int i = q - 1; i >= 0; --i) {
      a[static_cast<std::size_t>(i)] = ca % q;
      ca /= q;
      b[static_cast<std::size_t>(i)] = cb % 2;
      cb /= 2;
    }
  }
};

// per (sigma_k, sigma_{k+1}) the image of every level code
std::vector<int> level_action_table(const LevelCodec& codec, const std::vector<std::vector<int>>& perms) {
  const int P = static_cast<int>(perms.size()), L = codec.size(), q = codec.q;
  std::vector<int> table(static_cast<std::size_t>(P) * static_cast<std::size_t>(P) * static_cast<std::size_t>(L));
  std::vector<int> a, b, ra(static_cast<std::size_t>(q)), rb(static_cast<std::size_t>(q));
  for (int c = 0; c < L; ++c) {
    codec.decode(c, a, b);
    for (int s0 = 0; s0 < P; ++s0)
      for (int s1 = 0; s1 < P; ++s1) {
        const auto& p0 = perms[static_cast<std::size_t>(s0)];
        const auto& p1 = perms[static_cast<std::size_t>(s1)];
        for (int i = 0; i < q; ++i) {
          ra[static_cast<std::size_t>(p1[static_cast<std::size_t>(i)])] = p0[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
          rb[static_cast<std::size_t>(p1[static_cast<std::size_t>(i)])] = b[static_cast<std::size_t>(i)];
        }
        table[(static_cast<std::size_t>(s0) * static_cast<std::size_t>(P) + static_cast<std::size_t>(s1)) * static_cast<std::size_t>(L) +
              static_cast<std::size_t>(c)] = codec.encode(ra, rb);
      }
  }
  return table;
}

// Calls visit(image level codes) for every group element.
template <typename Visit>
void for_each_group_image(const std::vector<int>& levels, int P, int L, const std::vector<int>& table, Visit&& visit) {
  const int n1 = static_cast<int>(levels.size());
  std::vector<int> g(static_cast<std::size_t>(n1 + 1), 0), img(static_cast<std::size_t>(n1));
  while (true) {
    for (int k = 0; k < n1; ++k)
      img[static_cast<std::size_t>(k)] =
          table[(static_cast<std::size_t>(g[static_cast<std::size_t>(k)]) * static_cast<std::size_t>(P) +
                 static_cast<std::size_t>(g[static_cast<std::size_t>(k + 1)])) * static_cast<std::size_t>(L) +
                static_cast<std::size_t>(levels[static_cast<std::size_t>(k)])];
    visit(img);
    int j = n1;
    while (j >= 0 && ++g[static_cast<std::size_t>(j)] == P) g[static_cast<std::size_t>(j--)] = 0;
    if (j < 0) break;
  }
}

std::vector<int> level_codes(const InfectedMappingSequence& s, const LevelCodec& codec) {
  std::vector<int> c;
  for (int k = 0; k <= s.n(); ++k) c.push_back(codec.encode(s.a[static_cast<std::size_t>(k)], s.b[static_cast<std::size_t>(k)]));
  return c;
}

InfectedMappingSequence from_codes(const std::vector<int>& c, const LevelCodec& codec) {
  InfectedMappingSequence s;
  s.q = codec.q;
  s.a.resize(c.size());
  s.b.resize(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) codec.decode(c[k], s.a[k], s.b[k]);
  return s;
}

void check_scale(int q, int n) {
  if (q < 1 || n < 0) throw InvalidSpec("mapping sequences need q >= 1 and n >= 0");
  if (q > 4 || n > 3) throw ScaleExceeded("orbit search limited to q <= 4 and n <= 3");
}

}  // namespace

BigInt stabilizer_bruteforce(const InfectedMappingSequence& s) {
  s.validate();
  check_scale(s.q, s.n());
  const LevelCodec codec(s.q);
  const auto perms = all_permutations(s.q);
  const auto table = level_action_table(codec, perms);
  const auto levels = level_codes(s, codec);
  BigInt count = 0;
  for_each_group_image(levels, static_cast<int>(perms.size()), codec.size(), table, [&](const std::vector<int>& img) {
    if (img == levels) ++count;
  });
  return count;
}

ForestClass orbit_cardinal(const InfectedMappingSequence& s, std::size_t search_cap) {
  s.validate();
  ForestClass c;
  c.representative = s;
  c.stabilizer = stabilizer_formula(s);
  c.orbit = boost::multiprecision::pow(factorial(s.q), static_cast<unsigned>(s.n() + 2)) / c.stabilizer;
  const BigInt group = boost::multiprecision::pow(factorial(s.q), static_cast<unsigned>(s.n() + 2));
  if (s.q <= 4 && s.n() <= 3 && group <= BigInt(search_cap)) {
    const LevelCodec codec(s.q);
    const auto perms = all_permutations(s.q);
    const auto table = level_action_table(codec, perms);
    const auto levels = level_codes(s, codec);
    std::vector<int> best = levels;
    for_each_group_image(levels, static_cast<int>(perms.size()), codec.size(), table, [&](const std::vector<int>& img) {
      if (img < best) best = img;
    });
    c.representative = from_codes(best, codec);
  }
  return c;
}

namespace {

std::vector<int> allowed_levels(const LevelCodec& codec, int max_coal, int max_inf) {
  std::vector<int> out, a, b;
  for (int c = 0; c < codec.size(); ++c) {
    codec.decode(c, a, b);
    InfectedMappingSequence s;
    s.q = codec.q;
    s.a = {a};
    s.b = {b};
    if (s.coalescences(0) <= max_coal && s.infections(0) <= max_inf) out.push_back(c);
  }
  return out;
}

}  // namespace

BigInt count_sequences(int q, int n, int max_coal, int max_inf) {
  check_scale(q, n);
  const LevelCodec codec(q);
  const auto allowed = allowed_levels(codec, max_coal, max_inf);
  return boost::multiprecision::pow(BigInt(allowed.size()), static_cast<unsigned>(n + 1));
}

std::vector<ForestClass> enumerate_classes(int q, int n, int max_coal, int max_inf, std::size_t budget) {
  check_scale(q, n);
  const BigInt total = count_sequences(q, n, max_coal, max_inf);
  if (total > BigInt(budget)) throw ScaleExceeded("orbit search over " + total.str() + " sequences exceeds budget");
  const LevelCodec codec(q);
  const auto allowed = allowed_levels(codec, max_coal, max_inf);
  std::vector<int> dense(static_cast<std::size_t>(codec.size()), -1);
  for (std::size_t i = 0; i < allowed.size(); ++i) dense[static_cast<std::size_t>(allowed[i])] = static_cast<int>(i);
  const auto perms = all_permutations(q);
  const auto table = level_action_table(codec, perms);
  const auto A = static_cast<std::int64_t>(allowed.size());
  const auto count = total.convert_to<std::int64_t>();
  std::vector<bool> seen(static_cast<std::size_t>(count), false);
  std::vector<ForestClass> classes;
  std::vector<int> levels(static_cast<std::size_t>(n + 1));
  for (std::int64_t idx = 0; idx < count; ++idx) {
    if (seen[static_cast<std::size_t>(idx)]) continue;
    std::int64_t r = idx;
    for (int k = n; k >= 0; --k) {
      levels[static_cast<std::size_t>(k)] = allowed[static_cast<std::size_t>(r % A)];
      r /= A;
    }
    std::int64_t orbit = 0;
    for_each_group_image(levels, static_cast<int>(perms.size()), codec.size(), table, [&](const std::vector<int>& img) {
      std::int64_t j = 0;
      for (int c : img) j = j * A + dense[static_cast<std::size_t>(c)];
      if (!seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = true;
        ++orbit;
      }
    });
    ForestClass c;
    c.representative = from_codes(levels, codec);
    c.orbit = orbit;
    c.stabilizer = boost::multiprecision::pow(factorial(q), static_cast<unsigned>(n + 2)) / c.orbit;
    classes.push_back(std::move(c));
  }
  return classes;
}

bool trajectory_free(const InfectedMappingSequence& s, int p) {
  s.validate();
  const int q = s.q, n = s.n();
  if (p < 0 || p >= q) throw RangeError("trajectory index out of range");
  // ancestors of every terminal vertex, climbing from level n+1 to 0
  std::vector<int> anc(static_cast<std::size_t>(q));
  std::iota(anc.begin(), anc.end(), 0);
  for (int k = n; k >= 0; --k) {
    if (s.b[static_cast<std::size_t>(k)][static_cast<std::size_t>(anc[static_cast<std::size_t>(p)])]) return false;
    for (auto& v : anc) v = s.a[static_cast<std::size_t>(k)][static_cast<std::size_t>(v)];
  }
  for (int m = 0; m < q; ++m)
    if (m != p && anc[static_cast<std::size_t>(m)] == anc[static_cast<std::size_t>(p)]) return false;
  return true;
}

bool trajectory_isolated(const InfectedMappingSequence& s, int p) {
  s.validate();
  if (p < 0 || p >= s.q) throw RangeError("trajectory index out of range");
  int v = p;
  for (int k = s.n(); k >= 0; --k) {
    const auto& a = s.a[static_cast<std::size_t>(k)];
    if (s.b[static_cast<std::size_t>(k)][static_cast<std::size_t>(v)]) return false;
    const int w = a[static_cast<std::size_t>(v)];
    for (int j = 0; j < s.q; ++j)
      if (j != v && a[static_cast<std::size_t>(j)] == w) return false;
    v = w;
  }
  return true;
}

int free_trajectory_count(const InfectedMappingSequence& s) {
  int c = 0;
  for (int p = 0; p < s.q; ++p) c += trajectory_free(s, p) ? 1 : 0;
  return c;
}

}  // namespace pmcmc
