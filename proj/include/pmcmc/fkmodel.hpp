#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pmcmc/measures.hpp"
#include "pmcmc/rng.hpp"

namespace pmcmc {

// Sampler-face state. Finite models use a 1-vector holding the state index;
// lifted models (paths, islands, pairs) concatenate component states.
using State = Eigen::VectorXd;
using Trajectory = std::vector<State>;

inline constexpr std::size_t kDefaultPathBudget = 1'000'000;
inline constexpr std::size_t kDefaultEnumerationBudget = 10'000'000;

// Enumeration cap, overridable through PMCMCLAB_BUDGET.
std::size_t enumeration_budget(std::size_t fallback = kDefaultEnumerationBudget);

std::string encode_state(const State& x);

// Exact face: levels 0..horizon with finite state spaces {0..d_k-1}.
struct FiniteFace {
  Eigen::VectorXd initial;
  std::vector<Eigen::MatrixXd> mutation;   // mutation[k]: S'_{k-1} -> S'_k for k >= 1; mutation[0] unused
  std::vector<Eigen::VectorXd> potential;  // G_k for k = 0..horizon
  std::vector<std::vector<State>> labels;  // optional sampler encoding per level

  int horizon() const { return static_cast<int>(potential.size()) - 1; }
  int dim(int k) const { return static_cast<int>(potential.at(static_cast<std::size_t>(k)).size()); }
  State label(int k, int i) const;
  int index(int k, const State& x) const;
  // H_k(x,y) = G_{k-1}(x) M_k(x,y) against counting measure
  Eigen::MatrixXd density(int k) const;
  void validate() const;
  void build_lookup();

 private:
  std::vector<std::map<std::vector<double>, int>> lookup_;
};

struct SamplerFace {
  std::function<State(Rng&)> initial;
  std::function<State(int k, const State& x, Rng&)> mutation;  // draw at level k from state x at level k-1
  std::function<double(int k, const State& x)> potential;
  std::function<double(int k, const State& x, const State& y)> density;  // optional H_k(x,y)
};

struct FeynmanKacModel {
  std::string name;
  int horizon = 0;
  int state_dim = 1;
  int lift_depth = 0;
  bool bounded_potential = true;
  bool homogeneous_state_dim = true;
  SamplerFace sampler;
  std::optional<FiniteFace> face;
  std::vector<std::pair<double, double>> potential_bounds;  // (inf, sup) per level when known

  bool has_finite() const { return face.has_value(); }
  bool has_density() const { return static_cast<bool>(sampler.density); }
  const FiniteFace& finite() const;
  std::pair<double, double> bounds(int k) const;

  static FeynmanKacModel from_finite(FiniteFace f, std::string name = "finite");
};

struct FlowResult {
  std::vector<FiniteMeasure> eta;
  std::vector<double> gamma_mass;      // gamma_p(1)
  std::vector<double> log_gamma_mass;  // log gamma_p(1)
  std::vector<double> mean_potential;  // eta_p(G_p)

  double gamma(int p, const Eigen::VectorXd& f) const { return gamma_mass.at(p) * eta.at(p)(f); }
};

FlowResult exact_flow(const FeynmanKacModel& model, int n);

// Q_{p,n} = Q_{p+1} ... Q_n, Q_k(x,y) = G_{k-1}(x) M_k(x,y)
FiniteKernel semigroup(const FeynmanKacModel& model, int p, int n);
// Qbar_{p,n}(f)(x) = Q_{p,n}(f)(x) / eta_p Q_{p,n}(1)
FiniteKernel normalized_semigroup(const FeynmanKacModel& model, int p, int n);
FiniteKernel normalized_semigroup(const FeynmanKacModel& model, const FlowResult& flow, int p, int n);

// Mixed-radix trajectory codes, level 0 most significant.
struct TrajectorySpace {
  std::vector<int> dims;

  explicit TrajectorySpace(std::vector<int> d) : dims(std::move(d)) {}
  static TrajectorySpace of(const FiniteFace& face, int n);
  std::int64_t size() const;
  int levels() const { return static_cast<int>(dims.size()); }
  std::int64_t encode(const std::vector<int>& x) const;
  std::vector<int> decode(std::int64_t code) const;
};

struct PathMeasure {
  TrajectorySpace space;
  FiniteMeasure measure;
};

PathMeasure path_measure(const FeynmanKacModel& model, int n, std::size_t budget = kDefaultPathBudget);
// direct E[f(X_0..X_n) Z_n(X)] / gamma_n(1) sum over paths
PathMeasure path_measure_direct(const FeynmanKacModel& model, int n, std::size_t budget = kDefaultPathBudget);

// L(y, x) proportional to eta_prev(x) H_{k+1}(x, y); rows indexed by S'_{k+1}
FiniteKernel backward_kernel(const FeynmanKacModel& model, int k, const FiniteMeasure& eta_prev);

double hprime_diagnostic(const FeynmanKacModel& model, int n);
// beta of P_{p,n}(x,dy) = Q_{p,n}(x,dy)/Q_{p,n}(1)(x); the quantities entering condition (H)
double semigroup_dobrushin(const FeynmanKacModel& model, int p, int n);

// Historical (path-space) lift of a finite model: level-k states are prefixes.
FeynmanKacModel historical(const FeynmanKacModel& model, int n, std::size_t budget = kDefaultPathBudget);

// Lifts a trajectory of base indices to the historical level-n state index.
std::int64_t prefix_code(const FiniteFace& face, const std::vector<int>& x, int k);

std::vector<int> trajectory_indices(const FiniteFace& face, const Trajectory& x);
Trajectory trajectory_states(const FiniteFace& face, const std::vector<int>& x);

}  // namespace pmcmc
