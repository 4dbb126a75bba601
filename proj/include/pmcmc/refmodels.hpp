#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "pmcmc/fkmodel.hpp"

namespace pmcmc {

struct DiscreteHmmSpec {
  Eigen::MatrixXd transition;  // K, d x d
  Eigen::MatrixXd emission;    // g(x, y), d x e
  std::vector<int> observations;  // y_0..y_n
  Eigen::VectorXd initial;
};

// G_k(x) = g(x, y_k), M_k = K; horizon = observations.size() - 1
FeynmanKacModel hmm_model(const DiscreteHmmSpec& spec);

// Scalar map used for drift and observation functions.
struct ScalarMap {
  enum class Kind { Affine, ClampedAffine, Tabulated };
  Kind kind = Kind::Affine;
  double offset = 0.0, slope = 1.0;
  double lo = -1e300, hi = 1e300;  // clamp range
  std::vector<double> knots, values;  // piecewise-linear table, constant outside

  static ScalarMap affine(double offset, double slope);
  static ScalarMap clamped(double offset, double slope, double lo, double hi);
  static ScalarMap table(std::vector<double> knots, std::vector<double> values);
  double operator()(double x) const;
  bool is_affine() const { return kind == Kind::Affine; }
};

struct GridSpec {
  double lo = -10.0, hi = 10.0;
  int points = 401;
};

struct LinearGaussianSpec {
  ScalarMap drift = ScalarMap::affine(0.0, 1.0);
  ScalarMap observe = ScalarMap::affine(0.0, 1.0);
  double sigma_w = 1.0, sigma_v = 1.0;
  double prior_mean = 0.0, prior_sd = 1.0;
  std::vector<double> observations;  // y_0..y_n
  std::optional<GridSpec> grid;
};

double log_normal_density(double x, double mean, double sd);

FeynmanKacModel lg_model(const LinearGaussianSpec& spec);

struct KalmanResult {
  // predictive law of X_k given y_0..y_{k-1}; this is eta_k
  std::vector<double> pred_mean, pred_var;
  // filter law of X_k given y_0..y_k
  std::vector<double> filt_mean, filt_var;
  std::vector<double> log_gamma;  // log gamma_k(1), k = 0..n
  double log_likelihood = 0.0;    // log p(y_0..y_n)
};

KalmanResult kalman_oracle(const LinearGaussianSpec& spec);

// Constant kernel and potential over levels 0..n; potential valued in (0,1].
FeynmanKacModel absorption_model(const Eigen::MatrixXd& M, const Eigen::VectorXd& G, const Eigen::VectorXd& initial, int n);

// Pair-state lift X'_k = (X_k, X_{k+1}) of a chain (its potentials are
// ignored) with G'_k = W_{k+1}(X_{k+1}) / W_k(X_k). Horizon drops by one.
FeynmanKacModel pair_state_lift(const FeynmanKacModel& chain, const std::function<double(int, const State&)>& W);

}  // namespace pmcmc
