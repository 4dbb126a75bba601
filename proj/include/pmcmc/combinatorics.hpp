#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>
#include <boost/multiprecision/cpp_int.hpp>

#include "pmcmc/errors.hpp"

namespace pmcmc {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

BigInt factorial(int n);
// signed Stirling numbers of the first kind, s(q,p)
BigInt stirling1(int q, int p);
BigInt stirling2(int q, int p);
// (r)_q = r (r-1) ... (r-q+1); (r)_0 = 1
BigInt falling(std::int64_t r, int q);
// C(n,k) for n >= -1; C(-1,0) = 1 and C(-1,k) = 0 for k > 0
BigInt binomial(std::int64_t n, std::int64_t k);

double to_double(const Rational& r);
std::string to_string(const Rational& r);

struct CoalInfIndex {
  int p1 = 0;  // coalescences, 0..q-1
  int p2 = 0;  // infections, 0..q
  auto operator<=>(const CoalInfIndex&) const = default;
};

// P^{(N,q)}(p1,p2) as a q x (q+1) matrix; requires 1 <= q < N.
Eigen::MatrixXd coal_inf_law(int N, int q);
Rational coal_inf_exact(int N, int q, int p1, int p2);

// tau^{(m)}_{q,p1,p2} for m = 0..m_max
struct DerivativeTable {
  int q = 1, m_max = 0;
  std::map<std::tuple<int, int, int>, Rational> tau;  // (m, p1, p2)

  Rational operator()(int m, int p1, int p2) const;
  double value(int m, int p1, int p2) const { return to_double((*this)(m, p1, p2)); }
};

Rational alpha_coefficient(int q, int p1, int p2, int k1, int k2, int k3);
DerivativeTable tau_table(int m_max, int q);
// m,q,p1,p2,tau
void write_tau_csv(std::ostream& os, const DerivativeTable& t);

// sum over |m_n| = m of prod_k tau^{(m_k)}(p_k)
Rational multilevel_tau(const DerivativeTable& t, int m, const std::vector<CoalInfIndex>& p);

struct LawTaylorReport {
  int N = 0, q = 0, m = 0;
  double residual = 0.0;  // max_p |P(p) - sum_{k<=m} N^{-k} d^{(k)}P(p)|
  double constant = 0.0;  // residual * N^{m+1}
};

LawTaylorReport law_taylor_check(int N, int q, int m);

// Per-level maps a_k:[q]->[q] and infection flags b_k:[q]->{0,1}, 0-based.
// Edge i at level k joins vertex i of level k+1 to vertex a_k(i) of level k
// and carries label b_k(i).
struct InfectedMappingSequence {
  int q = 1;
  std::vector<std::vector<int>> a, b;

  int n() const { return static_cast<int>(a.size()) - 1; }
  int coalescences(int k) const;
  int infections(int k) const;
  int total() const;  // Tot(c)
  void validate() const;
  auto operator<=>(const InfectedMappingSequence&) const = default;

  static InfectedMappingSequence identity(int q, int n);
};

struct ForestClass {
  InfectedMappingSequence representative;
  BigInt orbit;
  BigInt stabilizer;
};

// sigma(a,b) = (sigma_k a_k sigma_{k+1}^{-1}, b_k sigma_{k+1}^{-1}); perms has n+2 entries
InfectedMappingSequence act(const InfectedMappingSequence& s, const std::vector<std::vector<int>>& perms);

BigInt stabilizer_formula(const InfectedMappingSequence& s);
BigInt stabilizer_bruteforce(const InfectedMappingSequence& s);
// Formula-based class; the representative is canonicalized when the group
// has at most `search_cap` elements.
ForestClass orbit_cardinal(const InfectedMappingSequence& s, std::size_t search_cap = 2'000'000);

// All classes with per-level coalescences <= max_coal and infections <= max_inf.
std::vector<ForestClass> enumerate_classes(int q, int n, int max_coal, int max_inf, std::size_t budget = 50'000'000);
// Number of sequences within the same per-level bounds.
BigInt count_sequences(int q, int n, int max_coal, int max_inf);

int free_trajectory_count(const InfectedMappingSequence& s);
bool trajectory_free(const InfectedMappingSequence& s, int p);
// free, and no other level-(k+1) vertex maps onto the lineage at any level
bool trajectory_isolated(const InfectedMappingSequence& s, int p);

}  // namespace pmcmc
