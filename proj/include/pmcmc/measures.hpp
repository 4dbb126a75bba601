#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pmcmc/errors.hpp"

namespace pmcmc {

using StateId = std::int64_t;

inline constexpr double kMarkovTol = 1e-12;
inline constexpr double kBalanceTol = 1e-10;
inline constexpr double kMinMass = 1e-300;

inline std::vector<StateId> iota_support(Eigen::Index n) {
  std::vector<StateId> s(static_cast<std::size_t>(n));
  std::iota(s.begin(), s.end(), StateId{0});
  return s;
}

// Finite-support measure. Support is kept sorted so that two measures built
// from the same atoms compare bit-identically.
template <typename Scalar, bool Signed = false>
class BasicMeasure {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicMeasure() = default;

  explicit BasicMeasure(Vector w) : support_(iota_support(w.size())), w_(std::move(w)) { check(); }

  BasicMeasure(std::vector<StateId> support, Vector w) {
    if (static_cast<Eigen::Index>(support.size()) != w.size())
      throw DimensionMismatch("support and weights differ in length");
    std::vector<std::size_t> order(support.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return support[a] < support[b]; });
    support_.resize(support.size());
    w_.resize(w.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      support_[i] = support[order[i]];
      w_(static_cast<Eigen::Index>(i)) = w(static_cast<Eigen::Index>(order[i]));
      if (i > 0 && support_[i] == support_[i - 1]) throw DimensionMismatch("duplicate support identifier");
    }
    check();
  }

  static BasicMeasure dirac(Eigen::Index i, Eigen::Index n) {
    Vector w = Vector::Zero(n);
    w(i) = Scalar(1);
    return BasicMeasure(std::move(w));
  }

  const std::vector<StateId>& support() const { return support_; }
  const Vector& weights() const { return w_; }
  Eigen::Index size() const { return w_.size(); }
  Scalar mass() const { return w_.sum(); }
  Scalar operator()(const Vector& f) const {
    if (f.size() != w_.size()) throw DimensionMismatch("function size differs from support");
    return w_.dot(f);
  }
  Scalar operator[](Eigen::Index i) const { return w_(i); }

  Eigen::Index index_of(StateId s) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), s);
    if (it == support_.end() || *it != s) return -1;
    return it - support_.begin();
  }
  Scalar weight_of(StateId s) const {
    const auto i = index_of(s);
    return i < 0 ? Scalar(0) : w_(i);
  }
  bool same_support(const std::vector<StateId>& other) const { return support_ == other; }

 private:
  void check() const {
    for (Eigen::Index i = 0; i < w_.size(); ++i) {
      if (!std::isfinite(static_cast<double>(w_(i)))) throw InvalidSpec("non-finite measure weight");
      if constexpr (!Signed) {
        if (w_(i) < Scalar(0)) throw InvalidSpec("negative weight in a non-negative measure");
      }
    }
  }

  std::vector<StateId> support_;
  Vector w_;
};

using FiniteMeasure = BasicMeasure<double, false>;
using SignedFiniteMeasure = BasicMeasure<double, true>;

// Dense kernel K(x, y) between two finite supports.
template <typename Scalar>
class BasicKernel {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  BasicKernel() = default;
  explicit BasicKernel(Matrix m)
      : source_(iota_support(m.rows())), target_(iota_support(m.cols())), m_(std::move(m)) {}
  BasicKernel(std::vector<StateId> source, std::vector<StateId> target, Matrix m)
      : source_(std::move(source)), target_(std::move(target)), m_(std::move(m)) {
    if (static_cast<Eigen::Index>(source_.size()) != m_.rows() ||
        static_cast<Eigen::Index>(target_.size()) != m_.cols())
      throw DimensionMismatch("kernel supports differ from matrix shape");
  }

  static BasicKernel markov(Matrix m) {
    BasicKernel k(std::move(m));
    if (!k.is_markov()) throw InvalidSpec("rows do not sum to one");
    return k;
  }

  const Matrix& matrix() const { return m_; }
  const std::vector<StateId>& source() const { return source_; }
  const std::vector<StateId>& target() const { return target_; }
  Eigen::Index rows() const { return m_.rows(); }
  Eigen::Index cols() const { return m_.cols(); }

  bool is_markov(double tol = kMarkovTol) const {
    if ((m_.array() < Scalar(0)).any()) return false;
    for (Eigen::Index i = 0; i < m_.rows(); ++i)
      if (std::abs(static_cast<double>(m_.row(i).sum()) - 1.0) > tol) return false;
    return true;
  }

  BasicMeasure<Scalar, true> row(Eigen::Index i) const {
    return BasicMeasure<Scalar, true>(target_, m_.row(i).transpose());
  }

 private:
  std::vector<StateId> source_, target_;
  Matrix m_;
};

using FiniteKernel = BasicKernel<double>;

template <typename Scalar, bool Signed>
BasicMeasure<Scalar, Signed> normalize(const BasicMeasure<Scalar, Signed>& mu) {
  const Scalar m = mu.mass();
  if (!(static_cast<double>(m) > 0.0) || static_cast<double>(m) < kMinMass) throw ZeroMass("mass " + std::to_string(static_cast<double>(m)));
  typename BasicMeasure<Scalar, Signed>::Vector w = mu.weights() / m;
  return BasicMeasure<Scalar, Signed>(mu.support(), std::move(w));
}

template <typename Scalar>
BasicMeasure<Scalar, false> boltzmann_gibbs(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& G,
                                            const BasicMeasure<Scalar, false>& eta) {
  if (G.size() != eta.size()) throw DimensionMismatch("potential size differs from support");
  if ((G.array() < Scalar(0)).any()) throw InvalidPotential("negative potential");
  const Scalar z = eta(G);
  if (!(static_cast<double>(z) > 0.0) || static_cast<double>(z) < kMinMass) throw ZeroMass("eta(G) = 0");
  typename BasicMeasure<Scalar, false>::Vector w = (G.array() * eta.weights().array()).matrix() / z;
  return BasicMeasure<Scalar, false>(eta.support(), std::move(w));
}

// Sum of absolute differences over dense vectors on a common support.
template <typename A, typename B>
double tv_distance(const Eigen::MatrixBase<A>& mu, const Eigen::MatrixBase<B>& nu) {
  if (mu.size() != nu.size()) throw DimensionMismatch("tv on vectors of different length");
  return static_cast<double>((mu - nu).cwiseAbs().sum());
}

template <typename Scalar, bool S1, bool S2>
double tv_distance(const BasicMeasure<Scalar, S1>& mu, const BasicMeasure<Scalar, S2>& nu) {
  const auto& a = mu.support();
  const auto& b = nu.support();
  std::size_t i = 0, j = 0;
  double acc = 0.0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i] < b[j])) {
      acc += std::abs(static_cast<double>(mu[static_cast<Eigen::Index>(i++)]));
    } else if (i == a.size() || b[j] < a[i]) {
      acc += std::abs(static_cast<double>(nu[static_cast<Eigen::Index>(j++)]));
    } else {
      acc += std::abs(static_cast<double>(mu[static_cast<Eigen::Index>(i++)] - nu[static_cast<Eigen::Index>(j++)]));
    }
  }
  return acc;
}

template <typename D>
double dobrushin(const Eigen::MatrixBase<D>& K) {
  double best = 0.0;
  for (Eigen::Index x = 0; x < K.rows(); ++x)
    for (Eigen::Index y = x + 1; y < K.rows(); ++y)
      best = std::max(best, static_cast<double>((K.row(x) - K.row(y)).cwiseAbs().sum()));
  return 0.5 * best;
}

template <typename Scalar>
double dobrushin(const BasicKernel<Scalar>& K) {
  if (K.rows() < 1) throw DimensionMismatch("kernel without rows");
  if (!K.is_markov()) throw InvalidSpec("dobrushin requires a Markov kernel");
  return dobrushin(K.matrix());
}

template <typename Scalar, bool Signed>
BasicMeasure<Scalar, Signed> kernel_apply(const BasicMeasure<Scalar, Signed>& mu, const BasicKernel<Scalar>& K) {
  if (!mu.same_support(K.source())) throw DimensionMismatch("measure support differs from kernel source");
  typename BasicMeasure<Scalar, Signed>::Vector w = K.matrix().transpose() * mu.weights();
  return BasicMeasure<Scalar, Signed>(K.target(), std::move(w));
}

template <typename Scalar>
BasicKernel<Scalar> kernel_compose(const BasicKernel<Scalar>& K1, const BasicKernel<Scalar>& K2) {
  if (K1.target() != K2.source()) throw DimensionMismatch("kernel composition on mismatched spaces");
  return BasicKernel<Scalar>(K1.source(), K2.target(), K1.matrix() * K2.matrix());
}

// q-fold tensor power; product states are indexed in mixed radix with the
// first coordinate most significant.
template <typename Scalar>
BasicKernel<Scalar> tensor_power(const BasicKernel<Scalar>& K, int q) {
  if (q < 1) throw DimensionMismatch("tensor power needs q >= 1");
  typename BasicKernel<Scalar>::Matrix m = K.matrix();
  for (int i = 1; i < q; ++i) {
    typename BasicKernel<Scalar>::Matrix next(m.rows() * K.rows(), m.cols() * K.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        next.block(r * K.rows(), c * K.cols(), K.rows(), K.cols()) = m(r, c) * K.matrix();
    m = std::move(next);
  }
  if (q == 1) return K;
  return BasicKernel<Scalar>(std::move(m));
}

template <typename Scalar, bool Signed>
BasicMeasure<Scalar, Signed> tensor_power(const BasicMeasure<Scalar, Signed>& mu, int q) {
  if (q < 0) throw DimensionMismatch("tensor power needs q >= 0");
  typename BasicMeasure<Scalar, Signed>::Vector w = BasicMeasure<Scalar, Signed>::Vector::Ones(1);
  for (int i = 0; i < q; ++i) {
    typename BasicMeasure<Scalar, Signed>::Vector next(w.size() * mu.size());
    for (Eigen::Index r = 0; r < w.size(); ++r) next.segment(r * mu.size(), mu.size()) = w(r) * mu.weights();
    w = std::move(next);
  }
  return BasicMeasure<Scalar, Signed>(std::move(w));
}

}  // namespace pmcmc
