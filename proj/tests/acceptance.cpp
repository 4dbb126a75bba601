#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "pmcmc/combinatorics.hpp"
#include "pmcmc/csmc.hpp"
#include "pmcmc/derivatives.hpp"
#include "pmcmc/exactpg.hpp"
#include "pmcmc/islands.hpp"
#include "pmcmc/scenarios.hpp"
#include "pmcmc/smc.hpp"

using namespace pmcmc;
namespace mp = boost::multiprecision;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %2d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <typename F>
void criterion(int id, const std::string& name, F&& body) {
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  report(id, name, ok, detail);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct MeanSe {
  double mean = 0, se = 0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  double q = 0;
  for (double x : v) q += (x - s.mean) * (x - s.mean);
  s.se = std::sqrt(q / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return s;
}

std::vector<int> alternating_path(const FeynmanKacModel& m, int n) {
  std::vector<int> z;
  for (int k = 0; k <= n; ++k) z.push_back(k % m.finite().dim(k));
  return z;
}

InfectedMappingSequence from_code(int q, int levels, std::int64_t code) {
  const int per = static_cast<int>(std::pow(q, q)) << q;
  InfectedMappingSequence s;
  s.q = q;
  s.a.assign(static_cast<std::size_t>(levels), std::vector<int>(static_cast<std::size_t>(q)));
  s.b = s.a;
  for (int k = levels - 1; k >= 0; --k) {
    int c = static_cast<int>(code % per);
    code /= per;
    for (int i = q - 1; i >= 0; --i) {
      s.b[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = c % 2;
      c /= 2;
    }
    for (int i = q - 1; i >= 0; --i) {
      s.a[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = c % q;
      c /= q;
    }
  }
  return s;
}

std::int64_t to_code(const InfectedMappingSequence& s) {
  const int q = s.q;
  std::int64_t code = 0;
  for (std::size_t k = 0; k < s.a.size(); ++k) {
    int c = 0;
    for (int i = 0; i < q; ++i) c = c * q + s.a[k][static_cast<std::size_t>(i)];
    for (int i = 0; i < q; ++i) c = c * 2 + s.b[k][static_cast<std::size_t>(i)];
    code = code * ((static_cast<std::int64_t>(std::pow(q, q))) << q) + c;
  }
  return code;
}

}  // namespace

int main() {
  const auto start = Clock::now();

  criterion(1, "unbiasedness", [](std::string& d) {
    const auto t0 = Clock::now();
    const int n = 5, N = 50, R = 100000;
    const FeynmanKacModel m = reference_hmm3(n);
    const double ref = exact_flow(m, n).gamma_mass[n];
    std::vector<double> e1(R), e2(R);
    for (int r = 0; r < R; ++r) {
      Rng rng(2024, static_cast<std::uint64_t>(r));
      const ParticleRun run = run_smc(m, N, n, rng);
      e1[static_cast<std::size_t>(r)] = gamma_estimate_1(run, unit_function());
      e2[static_cast<std::size_t>(r)] = gamma_estimate_2(m, run, unit_function());
    }
    const MeanSe a = mean_se(e1), b = mean_se(e2);
    const double t = seconds_since(t0);
    d = "|mean1-ref|/se=" + fmt("%.2f", std::abs(a.mean - ref) / a.se) + " |mean2-ref|/se=" + fmt("%.2f", std::abs(b.mean - ref) / b.se) +
        " time=" + fmt("%.1fs", t);
    return std::abs(a.mean - ref) <= 3 * a.se && std::abs(b.mean - ref) <= 3 * b.se && t < 60;
  });

  criterion(2, "exact duality", [](std::string& d) {
    const auto t0 = Clock::now();
    double worst = 0;
    std::size_t atoms = 0;
    for (int n : {1, 2})
      for (int N : {2, 3}) {
        for (const FeynmanKacModel& m : {reference_hmm2(n), sticky_chain(n, 0.8)}) {
          const DualityReport r = verify_duality(m, N, n);
          worst = std::max(worst, r.max());
          atoms += r.atoms;
        }
      }
    const double t = seconds_since(t0);
    d = "max atomwise residual=" + fmt("%.2e", worst) + " over " + std::to_string(atoms) + " configuration atoms, time=" + fmt("%.1fs", t);
    return worst < 1e-12 && t < 30;
  });

  criterion(3, "reversibility and invariance", [](std::string& d) {
    double db = 0, inv = 0;
    int instances = 0;
    for (int n : {0, 1, 2})
      for (int N : {1, 2, 3}) {
        std::vector<FeynmanKacModel> models{reference_hmm2(n), sticky_chain(n, 0.8)};
        if (N <= 2) models.push_back(reference_hmm3(n));
        for (const auto& m : models) {
          const PathMeasure pm = path_measure(m, n);
          for (auto v : {PgVariant::Ancestral, PgVariant::Backward}) {
            const EnumeratedKernel K = enumerate_pg_kernel(m, N, n, v);
            db = std::max(db, detailed_balance_residual(K, pm.measure));
            inv = std::max(inv, invariance_residual(K, pm.measure));
            ++instances;
          }
        }
      }
    d = "detailed balance=" + fmt("%.2e", db) + " invariance=" + fmt("%.2e", inv) + " over " + std::to_string(instances) + " kernels";
    return db < 1e-10 && inv < 1e-10;
  });

  criterion(4, "ancestral and backward lines", [](std::string& d) {
    double worst = 0;
    for (int n : {0, 1, 2}) worst = std::max(worst, verify_ancestral_backward(reference_hmm2(n), 2, n));
    d = "max TV=" + fmt("%.2e", worst);
    return worst < 1e-12;
  });

  criterion(5, "contraction bound", [](std::string& d) {
    double stated = -1e300, proven = -1e300, envelope = -1e300, sticky = 0;
    for (int n : {0, 1, 2})
      for (int N : {2, 3}) {
        std::vector<std::pair<FeynmanKacModel, bool>> models{{reference_hmm2(n), n >= 1}, {sticky_chain(n, 0.8), false}};
        if (N == 2) models.emplace_back(reference_hmm3(n), n >= 1);
        for (const auto& [m, check_stated] : models) {
          const PathMeasure pm = path_measure(m, n);
          double start = 0;
          for (Eigen::Index z = 0; z < pm.measure.size(); ++z) start = std::max(start, 2 * (1 - pm.measure[z]));
          for (auto v : {PgVariant::Ancestral, PgVariant::Backward}) {
            const EnumeratedKernel K = enumerate_pg_kernel(m, N, n, v);
            const double beta = dobrushin(K.matrix());
            if (check_stated) stated = std::max(stated, beta - minorization_bound(m, N, n));
            proven = std::max(proven, beta - minorization_bound(m, N, n, n + 1));
            const auto prof = convergence_profile(K, pm.measure, 8);
            for (std::size_t s = 0; s < prof.size(); ++s) envelope = std::max(envelope, prof[s] - std::pow(beta, s + 1.0) * start);
          }
        }
      }
    for (int n : {1, 2}) {
      const FeynmanKacModel m = sticky_chain(n);
      sticky = std::max(sticky, dobrushin(enumerate_pg_kernel(m, 2, n, PgVariant::Ancestral).matrix()) - minorization_bound(m, 2, n));
    }
    d = "beta minus stated bound (reference HMMs, n>=1)=" + fmt("%.3f", stated) + ", beta minus (n+1)-exponent bound=" + fmt("%.3f", proven) +
        ", profile minus beta^m envelope=" + fmt("%.2e", envelope) + "; excess of the stated bound on the unit-potential identity chain=" +
        fmt("%.3f", sticky);
    return stated <= 1e-12 && proven <= 1e-12 && envelope <= 1e-12;
  });

  criterion(6, "first-order Taylor", [](std::string& d) {
    bool ok = true;
    std::string s;
    for (int n : {1, 2}) {
      const FeynmanKacModel m = reference_hmm2(n);
      const PathMeasure pm = path_measure(m, n);
      const Eigen::MatrixXd D = first_order_kernel(m, n);
      const Eigen::MatrixXd E = pm.measure.weights().transpose().replicate(D.rows(), 1);
      auto res = [&](const EnumeratedKernel& K) { return (K.N * (K.matrix() - E) - D).rowwise().lpNorm<1>().maxCoeff(); };
      const double r2 = res(enumerate_pg_kernel(m, 2, n, PgVariant::Ancestral));
      const double r3 = res(enumerate_pg_kernel(m, 3, n, PgVariant::Ancestral));
      const double order = std::log(r2 / r3) / std::log(1.5);
      const double r16 = res(pg_kernel_counts(m, 16, n)), r32 = res(pg_kernel_counts(m, 32, n));
      const double tail = std::log(r16 / r32) / std::log(2.0);
      ok = ok && order >= 0.5 && order <= 2.0 && tail >= 0.5 && tail <= 2.0;
      s += "n=" + std::to_string(n) + " order(N=2,3)=" + fmt("%.2f", order) + " order(N=16,32)=" + fmt("%.2f", tail) + "; ";
    }
    double gap_err = 0;
    for (int n : {1, 2, 3}) {
      const FeynmanKacModel u = sticky_chain(n, 0.7);
      const TrajectorySpace space = TrajectorySpace::of(u.finite(), n);
      Eigen::VectorXd g(space.size());
      for (std::int64_t x = 0; x < space.size(); ++x) g(x) = space.decode(x)[0] == 0 ? 1.0 : -1.0;
      const double gap = first_order_K(u, n, g, space.decode(0)).value - first_order_K(u, n, g, space.decode(space.size() - 1)).value;
      gap_err = std::max(gap_err, std::abs(gap - 2.0 * (n + 1)));
    }
    d = s + "unit-potential gap error=" + fmt("%.2e", gap_err);
    return ok && gap_err < 1e-12;
  });

  criterion(7, "combinatorics", [](std::string& d) {
    int bad = 0;
    for (int q = 0; q <= 8; ++q)
      for (int r = 0; r <= 12; ++r) {
        BigInt a = 0, b = 0;
        for (int p = 0; p <= q; ++p) {
          a += stirling2(q, p) * falling(r, p);
          b += stirling1(q, p) * mp::pow(BigInt(r), static_cast<unsigned>(p));
        }
        bad += a != mp::pow(BigInt(r), static_cast<unsigned>(q));
        bad += b != falling(r, q);
      }
    double mass = 0;
    for (int q = 1; q <= 6; ++q)
      for (int N : {q + 1, 10, 100}) mass = std::max(mass, std::abs(coal_inf_law(N, q).sum() - 1.0));
    int tau_bad = 0;
    Rational null_mass = 0;
    for (int q : {3, 4, 5}) {
      const DerivativeTable t = tau_table(3, q);
      const Rational c3 = Rational(factorial(q), factorial(3) * factorial(q - 3));
      const Rational h = Rational(q * (q - 1), 2);
      tau_bad += t(2, 2, 0) != c3 * Rational(3 * q - 5, 4);
      tau_bad += t(2, 0, 2) != h;
      tau_bad += t(2, 0, 0) != Rational(q * q * (q - 1), 2) + c3 * Rational(3 * q - 1, 4);
      tau_bad += t(2, 1, 0) != -h * h;
      tau_bad += t(2, 0, 1) != -Rational(q * q * (q - 1), 2) - q * (q - 1);
      tau_bad += t(2, 1, 1) != q * h;
      tau_bad += t(1, 1, 0) != h;
      tau_bad += t(1, 0, 1) != q;
      tau_bad += t(1, 0, 0) != -(h + q);
      for (int m = 1; m <= 3; ++m) {
        Rational s = 0;
        for (int p1 = 0; p1 < q; ++p1)
          for (int p2 = 0; p2 <= q; ++p2) s += t(m, p1, p2);
        null_mass += mp::abs(s);
      }
    }
    double spread = 0;
    for (int q : {2, 3, 4})
      for (int m : {1, 2}) {
        double lo = 1e300, hi = 0;
        for (int N : {8, 16, 32, 64}) {
          const double c = law_taylor_check(N, q, m).constant;
          lo = std::min(lo, c);
          hi = std::max(hi, c);
        }
        spread = std::max(spread, hi / lo);
      }
    d = "stirling mismatches=" + std::to_string(bad) + " law mass error=" + fmt("%.1e", mass) + " tau mismatches=" + std::to_string(tau_bad) +
        " null mass=" + to_string(null_mass) + " Taylor constant spread=" + fmt("%.2f", spread);
    return bad == 0 && mass < 1e-14 && tau_bad == 0 && null_mass == 0 && spread < 4;
  });

  criterion(8, "forest orbit calculus", [](std::string& d) {
    std::int64_t mismatches = 0, orbits = 0, sequences = 0;
    for (int q = 1; q <= 3; ++q)
      for (int n = 0; n <= 2; ++n) {
        const int levels = n + 1;
        const std::int64_t per = static_cast<std::int64_t>(std::pow(q, q)) << q;
        std::int64_t total = 1;
        for (int i = 0; i < levels; ++i) total *= per;
        std::vector<std::vector<int>> perms;
        std::vector<int> p(static_cast<std::size_t>(q));
        std::iota(p.begin(), p.end(), 0);
        do perms.push_back(p);
        while (std::next_permutation(p.begin(), p.end()));
        const int L = n + 2;
        std::vector<bool> seen(static_cast<std::size_t>(total), false);
        for (std::int64_t c = 0; c < total; ++c) {
          if (seen[static_cast<std::size_t>(c)]) continue;
          const InfectedMappingSequence s = from_code(q, levels, c);
          std::int64_t size = 0;
          std::vector<std::size_t> idx(static_cast<std::size_t>(L), 0);
          std::vector<std::vector<int>> g(static_cast<std::size_t>(L));
          while (true) {
            for (int k = 0; k < L; ++k) g[static_cast<std::size_t>(k)] = perms[idx[static_cast<std::size_t>(k)]];
            const std::int64_t img = to_code(act(s, g));
            if (!seen[static_cast<std::size_t>(img)]) {
              seen[static_cast<std::size_t>(img)] = true;
              ++size;
            }
            int k = 0;
            while (k < L && ++idx[static_cast<std::size_t>(k)] == perms.size()) idx[static_cast<std::size_t>(k++)] = 0;
            if (k == L) break;
          }
          mismatches += orbit_cardinal(s, 0).orbit != size;
          ++orbits;
          sequences += size;
        }
        if (sequences == 0) ++mismatches;
      }
    InfectedMappingSequence j;
    j.q = 4;
    j.a = {{0, 1, 3, 3}, {1, 1, 3, 1}, {0, 1, 2, 3}, {0, 1, 3, 0}};
    j.b.assign(4, std::vector<int>(4, 0));
    const bool worked = stabilizer_formula(j) == 4 && stabilizer_bruteforce(j) == 4;
    int family_bad = 0;
    for (int q : {3, 4}) {
      const int n = 2, k = 1;
      const BigInt fq = factorial(q);
      auto pw = [&](int e) { return mp::pow(fq, static_cast<unsigned>(e)); };
      auto f0 = InfectedMappingSequence::identity(q, n), f10 = f0, f01 = f0;
      f10.a[k][1] = 0;
      f01.b[k][0] = 1;
      family_bad += orbit_cardinal(f0).orbit != pw(n + 1);
      family_bad += orbit_cardinal(f10).orbit != pw(n + 2) / (factorial(q - 2) * 2);
      family_bad += orbit_cardinal(f01).orbit != pw(n + 1) * q;
    }
    d = "orbits=" + std::to_string(orbits) + " sequences=" + std::to_string(sequences) + " formula mismatches=" + std::to_string(mismatches) +
        " worked stabilizer=" + (worked ? std::string("4") : std::string("wrong")) + " family mismatches=" + std::to_string(family_bad);
    return mismatches == 0 && worked && family_bad == 0;
  });

  criterion(9, "tensor expansion and derivatives", [](std::string& d) {
    const FeynmanKacModel m1 = reference_hmm2(1);
    const std::vector<int> z1{0, 1};
    const Eigen::Vector2d f(1.0, -0.6);
    const Eigen::VectorXd F2 = tensor_power_function(f, 2);
    const double ex = upsilon_exact(m1, z1, 3, 2, 1, F2);
    const double g = exact_flow(m1, 1).gamma_mass[1];
    const double direct = frozen_expectation(m1.finite(), z1, 3, 1, [&](const SystemAtom& a) {
                            double s = 0;
                            for (int i = 0; i < 3; ++i) s += f(a.at(1, i)) / 3;
                            return std::pow(a.normalizer() * s, 2);
                          }) /
                          (g * g);
    const double tensor_err = std::abs(ex - direct);
    const int n = 2;
    const FeynmanKacModel m = reference_hmm2(n);
    const std::vector<int> z = alternating_path(m, n);
    const Eigen::VectorXd F1 = tensor_power_function(Eigen::Vector2d(2.0, -1.0), 1);
    bool ok = tensor_err < 1e-12;
    std::string s = "tensor vs enumeration=" + fmt("%.2e", tensor_err);
    for (int order : {1, 2}) {
      const double closed = order == 1 ? first_derivative_q1(m, z, n, F1) : second_derivative_q1(m, z, n, F1);
      const auto rows = upsilon_richardson(m, z, 1, n, order, F1, {4, 8, 16, 32});
      bool decay = true;
      for (std::size_t i = 1; i < rows.size(); ++i) decay = decay && rows[i].residual < rows[i - 1].residual;
      const double fitted = rows.back().fitted_order;
      ok = ok && decay && std::abs(rows.back().predicted - closed) < 1e-12 && fitted > 0.5 && fitted < 2.0;
      s += " d" + std::to_string(order) + " order=" + fmt("%.2f", fitted);
    }
    const FlowResult flow = exact_flow(m1, 1);
    Eigen::Vector2d c = f;
    c.array() -= flow.eta[1](f);
    const Eigen::VectorXd F3 = tensor_power_function(c, 3);
    int small = 0, isolated = 0, literal = 0, literal_nonzero = 0;
    double worst = 0;
    for (std::int64_t code = 0; code < 216 * 216; ++code) {
      const InfectedMappingSequence sq = from_code(3, 2, code);
      const double v = delta_eval(m1, z1, sq, F3);
      bool iso = false;
      for (int p = 0; p < 3; ++p) iso = iso || trajectory_isolated(sq, p);
      if (2 * sq.total() < 3) {
        ++small;
        worst = std::max(worst, std::abs(v));
      }
      if (iso) {
        ++isolated;
        worst = std::max(worst, std::abs(v));
      }
      if (free_trajectory_count(sq) > 0) {
        ++literal;
        literal_nonzero += std::abs(v) > 1e-12;
      }
    }
    ok = ok && worst < 1e-13;
    s += " vanishing: Tot<q/2 (" + std::to_string(small) + ") and isolated-lineage (" + std::to_string(isolated) +
         ") sequences max |Delta|=" + fmt("%.1e", worst) + "; literal freeness leaves " + std::to_string(literal_nonzero) + " of " +
         std::to_string(literal) + " nonzero";
    d = s;
    return ok;
  });

  criterion(10, "normalizing-constant bias identities", [](std::string& d) {
    double worst = 0;
    for (int n : {1, 2})
      for (int N : {2, 3})
        for (const FeynmanKacModel& m : {reference_hmm2(n), sticky_chain(n, 0.8)}) {
          const BiasIdentities b = bias_identities(m, N, n);
          worst = std::max({worst, std::abs(b.normalized_frozen - b.normalized_free), std::abs(b.inverse_frozen - b.inverse_exact)});
        }
    const BiasIdentities b = bias_identities(reference_hmm3(1), 2, 1);
    worst = std::max({worst, std::abs(b.normalized_frozen - b.normalized_free), std::abs(b.inverse_frozen - b.inverse_exact)});
    d = "max residual=" + fmt("%.2e", worst);
    return worst < 1e-10;
  });

  criterion(11, "island transfer", [](std::string& d) {
    const int n = 1, Np = 2;
    const FeynmanKacModel inner = reference_hmm2(n);
    const FeynmanKacModel lifted = lift_model(inner, Np);
    const FlowResult fi = exact_flow(inner, n), fl = exact_flow(lifted, n);
    auto f = [](const State& x) { return 1.0 + 2.0 * x(0); };
    double worst = 0;
    for (int k = 0; k <= n; ++k) {
      Eigen::VectorXd F(lifted.finite().dim(k)), g(inner.finite().dim(k));
      for (int i = 0; i < F.size(); ++i) F(i) = island_mean(lifted.finite().label(k, i), 1, f);
      for (int i = 0; i < g.size(); ++i) g(i) = f(inner.finite().label(k, i));
      worst = std::max(worst, std::abs(fl.gamma(k, F) - fi.gamma(k, g)));
    }
    const int steps = 40000, B = 40, len = steps / B;
    Rng rng(7);
    const IslandChain chain = island_pg(inner, Np, 8, steps, PgVariant::Ancestral, f, rng);
    std::vector<double> means;
    for (int b = 0; b < B; ++b) {
      double s = 0;
      for (int i = 1 + b * len; i <= (b + 1) * len; ++i) s += chain.terminal_means[static_cast<std::size_t>(i)];
      means.push_back(s / len);
    }
    const MeanSe ms = mean_se(means);
    Eigen::VectorXd g(2);
    for (int i = 0; i < 2; ++i) g(i) = f(inner.finite().label(n, i));
    const double target = fi.eta[n](g);
    d = "transfer residual=" + fmt("%.2e", worst) + " |average-target|/se=" + fmt("%.2f", std::abs(ms.mean - target) / ms.se);
    return worst < 1e-12 && std::abs(ms.mean - target) <= 3 * ms.se;
  });

  criterion(12, "moment scaling", [](std::string& d) {
    const int n = 2;
    const FeynmanKacModel m = reference_hmm2(n);
    const auto rows = moment_scaling_check(m, alternating_path(m, n), n, 4, {16, 32, 64, 128});
    std::map<int, std::vector<MomentRow>> by;
    for (const auto& r : rows) by[r.q].push_back(r);
    double lo2 = 1e300, hi2 = 0, growth4 = 0;
    for (std::size_t i = 1; i < by[2].size(); ++i) {
      const double ratio = by[2][i].moment / by[2][i - 1].moment;
      lo2 = std::min(lo2, ratio);
      hi2 = std::max(hi2, ratio);
    }
    for (std::size_t i = 1; i < by[4].size(); ++i) growth4 = std::max(growth4, by[4][i].scaled / by[4][i - 1].scaled);
    d = "q=2 doubling ratios in [" + fmt("%.3f", lo2) + ", " + fmt("%.3f", hi2) + "] scaled q=4 max growth=" + fmt("%.3f", growth4) + " (N=16..128)";
    return lo2 >= 0.4 && hi2 <= 0.6 && growth4 <= 1.5;
  });

  std::printf("%s: %d of 12 criteria failed, %.1fs\n", failures ? "FAIL" : "PASS", failures, seconds_since(start));
  return failures ? 1 : 0;
}
