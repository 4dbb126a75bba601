#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "pmcmc/combinatorics.hpp"

using namespace pmcmc;
namespace mp = boost::multiprecision;

namespace {

// power series in e = 1/N of S(q,r) C(q,p2) e^{p1+p2} prod_{j<=r} (1 - j e) (1 - e)^{-p2}, r = q - p1
std::vector<Rational> law_series(int q, int p1, int p2, int terms) {
  const int r = q - p1;
  std::vector<Rational> poly{Rational(1)};
  for (int j = 1; j <= r; ++j) {
    std::vector<Rational> next(poly.size() + 1, Rational(0));
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i] += poly[i];
      next[i + 1] -= poly[i] * j;
    }
    poly = next;
  }
  std::vector<Rational> geo(static_cast<std::size_t>(terms), Rational(0));
  for (int k = 0; k < terms; ++k) geo[static_cast<std::size_t>(k)] = Rational(binomial(p2 + k - 1, k));
  std::vector<Rational> prod(static_cast<std::size_t>(terms), Rational(0));
  for (std::size_t i = 0; i < poly.size(); ++i)
    for (int k = 0; k < terms; ++k)
      if (static_cast<int>(i) + k < terms) prod[i + static_cast<std::size_t>(k)] += poly[i] * geo[static_cast<std::size_t>(k)];
  std::vector<Rational> out(static_cast<std::size_t>(terms), Rational(0));
  const Rational c = Rational(stirling2(q, r) * binomial(q, p2));
  for (int k = 0; k + p1 + p2 < terms; ++k) out[static_cast<std::size_t>(k + p1 + p2)] = c * prod[static_cast<std::size_t>(k)];
  return out;
}

InfectedMappingSequence decode_level_codes(int q, const std::vector<int>& codes) {
  InfectedMappingSequence s;
  s.q = q;
  for (int c : codes) {
    std::vector<int> a(static_cast<std::size_t>(q)), b(static_cast<std::size_t>(q));
    for (int i = q - 1; i >= 0; --i) {
      b[static_cast<std::size_t>(i)] = c % 2;
      c /= 2;
    }
    for (int i = q - 1; i >= 0; --i) {
      a[static_cast<std::size_t>(i)] = c % q;
      c /= q;
    }
    s.a.push_back(a);
    s.b.push_back(b);
  }
  return s;
}

std::vector<std::vector<int>> permutations(int q) {
  std::vector<int> p(static_cast<std::size_t>(q));
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

// orbit of s under the full group, by explicit action
std::set<InfectedMappingSequence> brute_orbit(const InfectedMappingSequence& s) {
  const auto perms = permutations(s.q);
  const int L = s.n() + 2;
  std::set<InfectedMappingSequence> orbit;
  std::vector<std::size_t> idx(static_cast<std::size_t>(L), 0);
  while (true) {
    std::vector<std::vector<int>> g;
    for (auto i : idx) g.push_back(perms[i]);
    orbit.insert(act(s, g));
    int k = 0;
    while (k < L && ++idx[static_cast<std::size_t>(k)] == perms.size()) idx[static_cast<std::size_t>(k++)] = 0;
    if (k == L) break;
  }
  return orbit;
}

}  // namespace

TEST_CASE("Stirling numbers and falling factorials") {
  CHECK(stirling1(4, 2) == 11);
  CHECK(stirling1(4, 3) == -6);
  CHECK(stirling2(5, 3) == 25);
  CHECK(stirling2(0, 0) == 1);
  CHECK(stirling2(3, 0) == 0);
  CHECK(falling(5, 0) == 1);
  CHECK(falling(5, 3) == 60);
  CHECK(falling(2, 3) == 0);
  CHECK(binomial(-1, 0) == 1);
  CHECK(binomial(-1, 2) == 0);
  CHECK(binomial(6, 2) == 15);
  for (int q = 0; q <= 8; ++q)
    for (int r = 0; r <= 12; ++r) {
      BigInt a = 0, b = 0;
      for (int p = 0; p <= q; ++p) {
        a += stirling2(q, p) * falling(r, p);
        b += stirling1(q, p) * mp::pow(BigInt(r), static_cast<unsigned>(p));
      }
      CHECK(a == mp::pow(BigInt(r), static_cast<unsigned>(q)));
      CHECK(b == falling(r, q));
    }
}

TEST_CASE("coalescence-infection law by brute force") {
  // q particles pick parents uniformly among N-1 free particles and are infected independently with probability 1/N
  for (int N : {3, 4, 5})
    for (int q = 1; q < N && q <= 3; ++q) {
      std::map<std::pair<int, int>, Rational> law;
      const int free = N - 1;
      int total = 1;
      for (int i = 0; i < q; ++i) total *= free;
      for (int code = 0; code < total; ++code)
        for (int mask = 0; mask < (1 << q); ++mask) {
          std::set<int> image;
          int c = code;
          for (int i = 0; i < q; ++i) {
            image.insert(c % free);
            c /= free;
          }
          int inf = __builtin_popcount(static_cast<unsigned>(mask));
          Rational p = Rational(1, total);
          for (int i = 0; i < q; ++i) p *= (mask >> i & 1) ? Rational(1, N) : Rational(N - 1, N);
          law[{q - static_cast<int>(image.size()), inf}] += p;
        }
      for (int p1 = 0; p1 < q; ++p1)
        for (int p2 = 0; p2 <= q; ++p2) CHECK(coal_inf_exact(N, q, p1, p2) == law[{p1, p2}]);
      CHECK(std::abs(coal_inf_law(N, q).sum() - 1.0) < 1e-14);
    }
  CHECK_THROWS_AS(coal_inf_law(3, 3), RangeError);
  CHECK_THROWS_AS(coal_inf_exact(5, 2, 2, 0), RangeError);
}

TEST_CASE("tau coefficients are the power-series coefficients of the law") {
  for (int q = 1; q <= 5; ++q) {
    const DerivativeTable t = tau_table(4, q);
    for (int p1 = 0; p1 < q; ++p1)
      for (int p2 = 0; p2 <= q; ++p2) {
        const auto series = law_series(q, p1, p2, 5);
        for (int m = 0; m <= 4; ++m) CHECK(t(m, p1, p2) == series[static_cast<std::size_t>(m)]);
      }
    for (int m = 1; m <= 4; ++m) {
      Rational s = 0;
      for (int p1 = 0; p1 < q; ++p1)
        for (int p2 = 0; p2 <= q; ++p2) s += t(m, p1, p2);
      CHECK(s == 0);
    }
    CHECK(t(0, 0, 0) == 1);
  }
  CHECK_THROWS_AS(tau_table(2, 0), RangeError);
  std::ostringstream os;
  write_tau_csv(os, tau_table(1, 2));
  CHECK(os.str().rfind("m,q,p1,p2,tau\n", 0) == 0);
}

TEST_CASE("multilevel tau collects compositions of m") {
  const DerivativeTable t = tau_table(2, 3);
  const std::vector<CoalInfIndex> p{{0, 0}, {1, 0}};
  const Rational expect = t(0, 0, 0) * t(2, 1, 0) + t(1, 0, 0) * t(1, 1, 0) + t(2, 0, 0) * t(0, 1, 0);
  CHECK(multilevel_tau(t, 2, p) == expect);
}

TEST_CASE("law Taylor remainders scale as N^{-(m+1)}") {
  for (int q : {2, 3})
    for (int m : {0, 1, 2}) {
      const double c8 = law_taylor_check(8, q, m).constant, c64 = law_taylor_check(64, q, m).constant;
      CHECK(c64 > 0);
      CHECK(c8 / c64 < 4.0);
      CHECK(c64 / c8 < 4.0);
    }
  CHECK(law_taylor_check(16, 3, 2).constant == doctest::Approx(18.0).epsilon(0.3));
}

TEST_CASE("orbit cardinals agree with explicit orbits") {
  for (auto [q, n] : {std::pair{2, 1}, std::pair{2, 2}}) {
    const int per = static_cast<int>(mp::pow(BigInt(q), static_cast<unsigned>(q))) << q;
    int levels = n + 1, total = 1;
    for (int i = 0; i < levels; ++i) total *= per;
    std::set<InfectedMappingSequence> seen;
    int orbits = 0;
    for (int code = 0; code < total; ++code) {
      std::vector<int> codes;
      int c = code;
      for (int i = 0; i < levels; ++i) {
        codes.insert(codes.begin(), c % per);
        c /= per;
      }
      const auto s = decode_level_codes(q, codes);
      const auto orbit = brute_orbit(s);
      CHECK(orbit_cardinal(s).orbit == orbit.size());
      CHECK(stabilizer_formula(s) == stabilizer_bruteforce(s));
      if (!seen.count(s)) {
        ++orbits;
        seen.insert(orbit.begin(), orbit.end());
      }
    }
    const auto classes = enumerate_classes(q, n, q, q);
    CHECK(static_cast<int>(classes.size()) == orbits);
    BigInt sum = 0;
    for (const auto& cl : classes) sum += cl.orbit;
    CHECK(sum == total);
    CHECK(count_sequences(q, n, q, q) == total);
  }
}

TEST_CASE("worked stabilizer and family cardinals") {
  InfectedMappingSequence j;
  j.q = 4;
  j.a = {{0, 1, 3, 3}, {1, 1, 3, 1}, {0, 1, 2, 3}, {0, 1, 3, 0}};
  j.b.assign(4, std::vector<int>(4, 0));
  CHECK(stabilizer_formula(j) == 4);
  CHECK(stabilizer_bruteforce(j) == 4);
  for (int q : {3, 4})
    for (int n : {1, 2}) {
      const int k = 1;
      const BigInt fq = factorial(q);
      auto pw = [&](int e) { return mp::pow(fq, static_cast<unsigned>(e)); };
      const auto id = InfectedMappingSequence::identity(q, n);
      auto coal = id, inf = id, both = id, apart = id;
      coal.a[k][1] = 0;
      inf.b[k][0] = 1;
      both.a[k][1] = 0;
      both.b[k][0] = 1;
      apart.a[k][1] = 0;
      apart.b[k][2] = 1;
      CHECK(orbit_cardinal(id).orbit == pw(n + 1));
      CHECK(orbit_cardinal(coal).orbit == pw(n + 2) / (factorial(q - 2) * 2));
      CHECK(orbit_cardinal(inf).orbit == pw(n + 1) * q);
      CHECK(orbit_cardinal(both).orbit == pw(n + 1) * q * (q - 1));
      CHECK(orbit_cardinal(apart).orbit == pw(n + 2) / (2 * factorial(q - 3)));
    }
}

TEST_CASE("free trajectories") {
  const int q = 3;
  int small = 0;
  for (int c0 = 0; c0 < 216; ++c0)
    for (int c1 = 0; c1 < 216; ++c1) {
      const auto s = decode_level_codes(q, {c0, c1});
      for (int p = 0; p < q; ++p)
        if (trajectory_isolated(s, p)) CHECK(trajectory_free(s, p));
      if (2 * s.total() < q) {
        ++small;
        CHECK(free_trajectory_count(s) >= 1);
      }
    }
  CHECK(small == 468);
  const auto id = InfectedMappingSequence::identity(q, 1);
  CHECK(free_trajectory_count(id) == 3);
  CHECK(id.total() == 0);
}

TEST_CASE("scale limits") {
  CHECK_THROWS_AS(enumerate_classes(5, 1, 1, 1), ScaleExceeded);
  CHECK_THROWS_AS(enumerate_classes(3, 2, 3, 3, 1000), ScaleExceeded);
  InfectedMappingSequence bad = InfectedMappingSequence::identity(2, 0);
  bad.a[0][0] = 2;
  CHECK_THROWS_AS(bad.validate(), Error);
}
