#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>

#include <Eigen/Core>

namespace pmcmc {

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

// Philox4x32-10 counter-based generator. Satisfies UniformRandomBitGenerator
// with 64-bit output; (seed, stream) pairs give disjoint sequences.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  static const char* algorithm() { return "philox4x32-10"; }

  result_type operator()();

  // uniform on [0,1) with 53 random bits
  double uniform();
  double normal();
  // inverse-CDF draw from non-negative weights (need not be normalized)
  int categorical(const Eigen::Ref<const Eigen::VectorXd>& w);
  int categorical(const double* w, int n, double total);
  int uniform_int(int n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return ctr_; }

  // derived independent stream, e.g. one per replicate
  Rng split(std::uint64_t sub) const;

 private:
  void refill();

  std::uint64_t seed_, stream_, ctr_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int pos_ = 4;
};

}  // namespace pmcmc
