#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "pmcmc/combinatorics.hpp"
#include "pmcmc/fkmodel.hpp"

namespace pmcmc {

// Functions and measures on S^q stored densely in mixed radix, first
// coordinate most significant.
struct TensorShape {
  int d = 1, q = 1;

  std::int64_t size() const;
  std::vector<int> decode(std::int64_t code) const;
  std::int64_t encode(const std::vector<int>& x) const;
};

Eigen::VectorXd tensor_power_function(const Eigen::VectorXd& f, int q);
// 1^{⊗l} ⊗ F
Eigen::VectorXd pad_with_ones(const Eigen::VectorXd& F, int d, int l);
bool is_symmetric(const Eigen::VectorXd& F, int d, int q, double tol = 1e-12);

// K^{⊗q} acting on functions (F -> K^{⊗q}F) or measures (mu -> mu K^{⊗q}).
Eigen::VectorXd tensor_apply_function(const Eigen::MatrixXd& K, const Eigen::VectorXd& F, int q);
Eigen::VectorXd tensor_apply_measure(const Eigen::VectorXd& mu, const Eigen::MatrixXd& K, int q);

// mu C_{z,(a,b)}: y_j = z when b(j) = 1, x_{a(j)} otherwise
Eigen::VectorXd coalescence_push(const Eigen::VectorXd& mu, int d, const std::vector<int>& a, const std::vector<int>& b, int z);

// mu_n = (...(eta_0^{⊗q} C_{z_0}) Qbar_1^{⊗q} C_{z_1} ...) with the N-mixture C^{(N,q)}
Eigen::VectorXd frozen_mixture_flow(const FeynmanKacModel& model, const std::vector<int>& z, int N, int q, int n);
// E[(gamma^N_{z,n})^{⊗q}(F)] / gamma_n(1)^q
double upsilon_exact(const FeynmanKacModel& model, const std::vector<int>& z, int N, int q, int n, const Eigen::VectorXd& F);
// the same expectation by enumeration of the dual particle system
double upsilon_enumerated(const FeynmanKacModel& model, const std::vector<int>& z, int N, int q, int n, const Eigen::VectorXd& F,
                          std::size_t budget = enumeration_budget());
// the same expectation through the count engine
double upsilon_counts(const FeynmanKacModel& model, const std::vector<int>& z, int N, int q, int n, const Eigen::VectorXd& F,
                      std::size_t budget = enumeration_budget());

// Delta_{z,c}(F) for one mapping sequence c; F must be symmetric
double delta_eval(const FeynmanKacModel& model, const std::vector<int>& z, const InfectedMappingSequence& c, const Eigen::VectorXd& F);

// d^{(m)} Upsilon^{(q)}_{z,n}, the coefficient of N^{-m}; m <= 2
Eigen::VectorXd upsilon_derivative_measure(const FeynmanKacModel& model, const std::vector<int>& z, int q, int n, int m);
double upsilon_derivative(const FeynmanKacModel& model, const std::vector<int>& z, int q, int n, int m, const Eigen::VectorXd& F);

// q = 1 closed forms
double first_derivative_q1(const FeynmanKacModel& model, const std::vector<int>& z, int n, const Eigen::VectorXd& f);
double second_derivative_q1(const FeynmanKacModel& model, const std::vector<int>& z, int n, const Eigen::VectorXd& f);

struct ExtrapolationRow {
  int N = 0;
  double observed = 0.0;   // N^m (value - sum_{k<m} N^{-k} d^{(k)})
  double predicted = 0.0;  // d^{(m)}
  double residual = 0.0;
  double fitted_order = 0.0;  // log-log slope of the residual against the previous row; NaN on the first
};

std::vector<ExtrapolationRow> richardson(const std::vector<int>& Ns, const std::vector<double>& values,
                                         const std::vector<double>& lower_terms, double predicted);
std::vector<ExtrapolationRow> upsilon_richardson(const FeynmanKacModel& model, const std::vector<int>& z, int q, int n, int m,
                                                 const Eigen::VectorXd& F, const std::vector<int>& Ns);
void write_extrapolation_csv(std::ostream& os, const std::vector<ExtrapolationRow>& rows);

// P^{(N,q)}_{z,n+1}: law of q non-frozen level-(n+1) particles
Eigen::VectorXd nonfrozen_law(const FeynmanKacModel& model, const std::vector<int>& z, int N, int q, int n,
                              std::size_t budget = enumeration_budget());
// first-order coefficient of P^{(N,q)}_{z,n+1}(F), q <= 2
double normalized_first_derivative(const FeynmanKacModel& model, const std::vector<int>& z, int q, int n, const Eigen::VectorXd& F);
// q = 1 closed form of the same coefficient
double normalized_first_derivative_q1(const FeynmanKacModel& model, const std::vector<int>& z, int n, const Eigen::VectorXd& f);

struct FirstOrderK {
  double value = 0.0;
  double shift = 0.0;  // eta_n(f) removed before evaluation
};

// lim N (K_n(f)(z) - eta_n(f)) on the historical lift; f on trajectory codes
FirstOrderK first_order_K(const FeynmanKacModel& model, int n, const Eigen::VectorXd& f, const std::vector<int>& z);
// matrix of the signed kernel d^{(1)}K_n on trajectory codes
Eigen::MatrixXd first_order_kernel(const FeynmanKacModel& model, int n);

struct MomentRow {
  int q = 0, N = 0;
  double moment = 0.0;  // E[(gamma^N_z(G_n) - gamma_n(G_n))^q]
  double scaled = 0.0;  // N^{q/2} moment
};

double frozen_moment(const FeynmanKacModel& model, const std::vector<int>& z, int N, int q, int n);
std::vector<MomentRow> moment_scaling_check(const FeynmanKacModel& model, const std::vector<int>& z, int n, int q_max,
                                            const std::vector<int>& Ns = {8, 16, 32, 64});
// the same moment from the count engine
double frozen_moment_counts(const FeynmanKacModel& model, const std::vector<int>& z, int N, int q, int n,
                            std::size_t budget = enumeration_budget());

struct TransferSides {
  double frozen = 0.0;  // sum_z eta_n(z) Upsilon^{(N,q-1)}_z(F)
  double free = 0.0;    // E[gamma^N_n(1)^q m(chi_n)^{⊗(q-1)}(F)] / gamma_n(1)^q
};

TransferSides transfer_identity(const FeynmanKacModel& model, int N, int q, int n, const Eigen::VectorXd& F,
                                std::size_t budget = enumeration_budget());

struct BiasIdentities {
  double normalized_frozen = 0.0, normalized_free = 0.0;  // E_{z}[prod m(X_p)(Gbar_p)] and 1 + Var(...)
  double inverse_frozen = 0.0, inverse_exact = 0.0;       // E_{z}[1 / prod m(X_p)(G_p)] and 1 / gamma_n(1)
};

BiasIdentities bias_identities(const FeynmanKacModel& model, int N, int n, std::size_t budget = enumeration_budget());

}  // namespace pmcmc
