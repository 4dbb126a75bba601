#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "pmcmc/csmc.hpp"
#include "pmcmc/fkmodel.hpp"

namespace pmcmc {

// One ordered realization of an N-particle system on a finite face.
struct SystemAtom {
  int N = 0, n = 0;
  double prob = 0.0;
  const std::vector<std::vector<int>>* state = nullptr;     // [k][i]
  const std::vector<std::vector<int>>* ancestor = nullptr;  // [k][i], k >= 1
  const std::vector<double>* mean_potential = nullptr;      // m(xi_k)(G_k)

  int at(int k, int i) const { return (*state)[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]; }
  std::vector<int> line(int i) const;  // state indices along the ancestral line of particle i at level n
  double normalizer() const;           // prod_{p<n} m(xi_p)(G_p)
};

using AtomVisitor = std::function<void(const SystemAtom&)>;

// Upper bound on the number of atoms visited by enumerate_system.
double system_atom_bound(const FiniteFace& face, int N, int n, bool frozen);

// Depth-first enumeration with zero-probability pruning. With a frozen
// trajectory (state indices z_0..z_n) particle 0 is pinned to it with
// ancestor 0 and the others evolve as in the dual system.
void enumerate_system(const FiniteFace& face, int N, int n, const std::vector<int>* frozen, const AtomVisitor& visit,
                      std::size_t budget = enumeration_budget());

double free_expectation(const FiniteFace& face, int N, int n, const std::function<double(const SystemAtom&)>& h,
                        std::size_t budget = enumeration_budget());
double frozen_expectation(const FiniteFace& face, const std::vector<int>& z, int N, int n,
                          const std::function<double(const SystemAtom&)>& h, std::size_t budget = enumeration_budget());

// Law of the backward line through the populations of an atom; visit(code, w)
// with trajectory codes of TrajectorySpace::of(face, n).
void backward_line_law(const FiniteFace& face, const SystemAtom& atom, const std::function<void(std::int64_t, double)>& visit);

// Count engine: the level-k configuration is summarized by its count vector,
// free particles being multinomial given the previous counts.
struct CountAtom {
  std::vector<int> counts;  // all N particles, frozen one included
  double weight = 0.0;
};

using CountWeight = std::function<double(int k, const Eigen::VectorXd& m)>;

// Weighted law of the level-n counts; weights prod_{k<n} level_weight(k, m(xi_k)).
std::vector<CountAtom> count_law(const FiniteFace& face, int N, int n, const std::vector<int>* frozen,
                                 const CountWeight& level_weight = nullptr, std::size_t budget = enumeration_budget());

// E[Phi_k(m(X_{k-1}))] for the dual system frozen at z; eta_0 for k = 0.
Eigen::VectorXd frozen_predictive(const FiniteFace& face, const std::vector<int>& z, int N, int k,
                                  std::size_t budget = enumeration_budget());

Eigen::VectorXd phi(const FiniteFace& face, int k, const Eigen::VectorXd& m);

struct EnumeratedKernel {
  TrajectorySpace space{{}};
  FiniteKernel kernel;
  PgVariant variant = PgVariant::Ancestral;
  int N = 0;

  const Eigen::MatrixXd& matrix() const { return kernel.matrix(); }
};

EnumeratedKernel enumerate_pg_kernel(const FeynmanKacModel& model, int N, int n, PgVariant variant,
                                     std::size_t budget = enumeration_budget());
// Ancestral kernel through the count engine on the historical lift; reaches larger N.
EnumeratedKernel pg_kernel_counts(const FeynmanKacModel& model, int N, int n, std::size_t budget = enumeration_budget());

struct ConfigurationMeasure {
  int N = 0, n = 0;
  std::vector<int> dims;
  FiniteMeasure gamma;  // E[F(chi) Z(chi)] against unordered configuration paths
  double mass = 0.0;    // gamma_n(1)

  FiniteMeasure normalized() const { return normalize(gamma); }
  std::vector<std::vector<int>> decode(StateId code) const;  // sorted populations
};

ConfigurationMeasure many_body_measure(const FeynmanKacModel& model, int N, int n, std::size_t budget = enumeration_budget());

enum class DualityForm {
  Terminal,   // F(x_n, populations)
  Backward,   // F(backward line, populations)
  Genealogy,  // F(ancestral line, per-level prefix codes of the path particles)
};

// path holds x_n alone for Terminal and the whole trajectory otherwise.
using ConfigurationFunction =
    std::function<double(const std::vector<int>& path, const std::vector<std::vector<std::int64_t>>& configuration)>;

// (E over the free system, E over the chain with the dual system): both
// sides of the duality identity for a symmetric F. Throws SymmetryViolation
// when F depends on the particle order.
std::pair<double, double> duality_sides(const FeynmanKacModel& model, int N, int n, DualityForm form, const ConfigurationFunction& F,
                                        std::size_t budget = enumeration_budget());

struct DualityReport {
  double terminal = 0.0, backward = 0.0, genealogy = 0.0;  // max atomwise residuals
  std::size_t atoms = 0;

  double max() const { return std::max({terminal, backward, genealogy}); }
};

DualityReport verify_duality(const FeynmanKacModel& model, int N, int n, std::size_t budget = enumeration_budget());

// max over configuration paths of the total variation between the uniform
// ancestral line and the backward line given the populations
double verify_ancestral_backward(const FeynmanKacModel& model, int N, int n, std::size_t budget = enumeration_budget());

// sup_z || delta_z K^m - target ||, m = 1..m_max
std::vector<double> convergence_profile(const EnumeratedKernel& K, const FiniteMeasure& target, int m_max);

double invariance_residual(const EnumeratedKernel& K, const FiniteMeasure& target);
double detailed_balance_residual(const EnumeratedKernel& K, const FiniteMeasure& target);

}  // namespace pmcmc
