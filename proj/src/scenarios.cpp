#include "pmcmc/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "pmcmc/combinatorics.hpp"
#include "pmcmc/csmc.hpp"
#include "pmcmc/derivatives.hpp"
#include "pmcmc/exactpg.hpp"
#include "pmcmc/islands.hpp"
#include "pmcmc/refmodels.hpp"
#include "pmcmc/smc.hpp"

namespace pmcmc {

using nlohmann::json;

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"unbiasedness", "duality",   "reversibility", "backward-equivalence", "contraction",
                                              "derivative-extrapolation", "combinatorics", "moments", "island"};
  return names;
}

namespace {

std::string tag(std::initializer_list<std::pair<const char*, long long>> kv) {
  std::string s;
  for (const auto& [k, v] : kv) {
    if (!s.empty()) s += ' ';
    s += k;
    s += '=';
    s += std::to_string(v);
  }
  return s;
}

Eigen::VectorXd vec(const json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError("'" + key + "' must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("'" + key + "' must be an array of numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd mat(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty()) throw ConfigError("'" + key + "' must be a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ConfigError("'" + key + "' rows differ in length");
    m.row(static_cast<Eigen::Index>(r)) = vec(j[r], key).transpose();
  }
  return m;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

const json& need(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError("missing key '" + key + "' in " + where);
  return j.at(key);
}

ScalarMap scalar_map(const json& j, const std::string& key) {
  check_keys(j, {"kind", "offset", "slope", "lo", "hi", "knots", "values"}, key);
  const std::string kind = j.value("kind", "affine");
  if (kind == "affine") return ScalarMap::affine(j.value("offset", 0.0), j.value("slope", 1.0));
  if (kind == "clamped")
    return ScalarMap::clamped(j.value("offset", 0.0), j.value("slope", 1.0), need(j, "lo", key).get<double>(), need(j, "hi", key).get<double>());
  if (kind == "table") {
    const Eigen::VectorXd k = vec(need(j, "knots", key), "knots"), v = vec(need(j, "values", key), "values");
    return ScalarMap::table(std::vector<double>(k.data(), k.data() + k.size()), std::vector<double>(v.data(), v.data() + v.size()));
  }
  throw ConfigError("unknown map kind '" + kind + "' in " + key);
}

std::vector<int> alternating(int n, int symbols) {
  std::vector<int> y;
  for (int k = 0; k <= n; ++k) y.push_back(k % symbols);
  return y;
}

}  // namespace

FeynmanKacModel build_model(const json& spec) {
  if (!spec.is_object()) throw ConfigError("model must be an object");
  const std::string type = need(spec, "type", "model").get<std::string>();
  try {
    if (type == "hmm") {
      check_keys(spec, {"type", "transition", "emission", "observations", "initial"}, "hmm model");
      DiscreteHmmSpec s;
      s.transition = mat(need(spec, "transition", "hmm model"), "transition");
      s.emission = mat(need(spec, "emission", "hmm model"), "emission");
      s.observations = need(spec, "observations", "hmm model").get<std::vector<int>>();
      s.initial = spec.contains("initial") ? vec(spec["initial"], "initial")
                                           : Eigen::VectorXd::Constant(s.transition.rows(), 1.0 / s.transition.rows());
      return hmm_model(s);
    }
    if (type == "absorption") {
      check_keys(spec, {"type", "mutation", "potential", "initial", "horizon"}, "absorption model");
      const Eigen::MatrixXd M = mat(need(spec, "mutation", "absorption model"), "mutation");
      const Eigen::VectorXd init =
          spec.contains("initial") ? vec(spec["initial"], "initial") : Eigen::VectorXd::Constant(M.rows(), 1.0 / M.rows());
      return absorption_model(M, vec(need(spec, "potential", "absorption model"), "potential"), init,
                              need(spec, "horizon", "absorption model").get<int>());
    }
    if (type == "lg") {
      check_keys(spec, {"type", "drift", "observe", "sigma_w", "sigma_v", "prior_mean", "prior_sd", "observations", "grid"}, "lg model");
      LinearGaussianSpec s;
      if (spec.contains("drift")) s.drift = scalar_map(spec["drift"], "drift");
      if (spec.contains("observe")) s.observe = scalar_map(spec["observe"], "observe");
      s.sigma_w = spec.value("sigma_w", 1.0);
      s.sigma_v = spec.value("sigma_v", 1.0);
      s.prior_mean = spec.value("prior_mean", 0.0);
      s.prior_sd = spec.value("prior_sd", 1.0);
      s.observations = need(spec, "observations", "lg model").get<std::vector<double>>();
      if (spec.contains("grid")) {
        const json& g = spec["grid"];
        check_keys(g, {"lo", "hi", "points"}, "grid");
        s.grid = GridSpec{g.value("lo", -10.0), g.value("hi", 10.0), g.value("points", 401)};
      }
      return lg_model(s);
    }
    if (type == "finite") {
      check_keys(spec, {"type", "initial", "mutation", "potential"}, "finite model");
      FiniteFace f;
      f.initial = vec(need(spec, "initial", "finite model"), "initial");
      const json& pot = need(spec, "potential", "finite model");
      const json& mut = need(spec, "mutation", "finite model");
      if (!pot.is_array() || !mut.is_array() || mut.size() + 1 != pot.size())
        throw ConfigError("finite model needs n+1 potentials and n mutation matrices");
      for (const auto& g : pot) f.potential.push_back(vec(g, "potential"));
      f.mutation.emplace_back();
      for (const auto& m : mut) f.mutation.push_back(mat(m, "mutation"));
      return FeynmanKacModel::from_finite(std::move(f), "finite");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model: ") + e.what());
  }
  throw ConfigError("unknown model type '" + type + "'");
}

FeynmanKacModel reference_hmm2(int n) {
  DiscreteHmmSpec s;
  s.transition.resize(2, 2);
  s.transition << 0.7, 0.3, 0.4, 0.6;
  s.emission.resize(2, 2);
  s.emission << 0.8, 0.2, 0.3, 0.7;
  s.observations = alternating(n, 2);
  s.initial.resize(2);
  s.initial << 0.6, 0.4;
  return hmm_model(s);
}

FeynmanKacModel reference_hmm3(int n) {
  DiscreteHmmSpec s;
  s.transition.resize(3, 3);
  s.transition << 0.6, 0.3, 0.1, 0.2, 0.6, 0.2, 0.1, 0.3, 0.6;
  s.emission.resize(3, 2);
  s.emission << 0.9, 0.1, 0.5, 0.5, 0.2, 0.8;
  const std::vector<int> pattern{0, 1, 1, 0, 1, 0};
  for (int k = 0; k <= n; ++k) s.observations.push_back(pattern[static_cast<std::size_t>(k) % pattern.size()]);
  s.initial = Eigen::VectorXd::Constant(3, 1.0 / 3);
  return hmm_model(s);
}

FeynmanKacModel sticky_chain(int n, double stay) {
  Eigen::MatrixXd M(2, 2);
  M << stay, 1 - stay, 1 - stay, stay;
  return absorption_model(M, Eigen::VectorXd::Ones(2), Eigen::VectorXd::Constant(2, 0.5), n);
}

RunConfig parse_config(const json& j) {
  check_keys(j, {"seed", "budget", "out", "scenarios", "jobs"}, "config");
  RunConfig rc;
  const std::uint64_t base_seed = j.value("seed", std::uint64_t{1});
  const std::size_t budget = enumeration_budget(j.value("budget", kDefaultEnumerationBudget));
  const int jobs = j.value("jobs", 1);
  rc.out = j.value("out", rc.out);
  if (!j.contains("scenarios") || !j["scenarios"].is_array() || j["scenarios"].empty()) throw ConfigError("empty scenario list");
  const auto& names = scenario_names();
  for (const auto& s : j["scenarios"]) {
    if (s.is_string()) {
      ScenarioConfig c;
      c.name = s.get<std::string>();
      if (std::find(names.begin(), names.end(), c.name) == names.end()) throw ConfigError("unknown scenario '" + c.name + "'");
      c.seed = base_seed;
      c.budget = budget;
      c.jobs = jobs;
      rc.scenarios.push_back(std::move(c));
      continue;
    }
    check_keys(s, {"name", "model", "N", "N_inner", "n", "q", "m", "replicates", "steps", "seed"}, "scenario");
    ScenarioConfig c;
    try {
      c.name = need(s, "name", "scenario").get<std::string>();
      if (std::find(names.begin(), names.end(), c.name) == names.end()) throw ConfigError("unknown scenario '" + c.name + "'");
      if (s.contains("model")) c.model = s["model"];
      auto opt = [&](const char* k, std::optional<int>& dst) {
        if (s.contains(k)) dst = s[k].get<int>();
      };
      opt("N", c.N);
      opt("N_inner", c.N_inner);
      opt("n", c.n);
      opt("q", c.q);
      opt("m", c.m);
      c.replicates = s.value("replicates", 0);
      c.steps = s.value("steps", 0);
      c.seed = s.value("seed", base_seed);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed scenario: ") + e.what());
    }
    c.budget = budget;
    c.jobs = jobs;
    rc.scenarios.push_back(std::move(c));
  }
  return rc;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return parse_config(j);
}

namespace {

template <typename Body>
void parallel_for(int count, int jobs, Body&& body) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  for (int w = 0; w < jobs; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += jobs) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

FeynmanKacModel model_or(const ScenarioConfig& c, const std::function<FeynmanKacModel()>& fallback) {
  return c.model.is_null() ? fallback() : build_model(c.model);
}

std::vector<int> sizes_or(const std::optional<int>& v, std::vector<int> grid) { return v ? std::vector<int>{*v} : grid; }

FeynmanKacModel at_horizon(const ScenarioConfig& c, int n) {
  if (!c.model.is_null()) {
    FeynmanKacModel m = build_model(c.model);
    if (n > m.horizon) throw ConfigError("n exceeds the model horizon");
    return m;
  }
  return reference_hmm2(n);
}

void scenario_unbiasedness(const ScenarioConfig& c, Report& r) {
  const int n = c.n.value_or(5), N = c.N.value_or(50), R = c.replicates > 0 ? c.replicates : 20000;
  const FeynmanKacModel model = model_or(c, [&] { return reference_hmm3(n); });
  if (n > model.horizon) throw ConfigError("n exceeds the model horizon");
  double ref1 = 0.0, refF = 0.0;
  const bool finite = model.has_finite();
  LevelFunction path = [](int k, const State& x) { return 1.0 + 0.5 * (std::lround(x(0)) == k % 2); };
  if (finite) {
    const FlowResult flow = exact_flow(model, n);
    ref1 = flow.gamma_mass[static_cast<std::size_t>(n)];
    const PathMeasure pm = path_measure(model, n, c.budget);
    Eigen::VectorXd F(pm.measure.size());
    for (Eigen::Index i = 0; i < F.size(); ++i) {
      const auto x = pm.space.decode(pm.measure.support()[static_cast<std::size_t>(i)]);
      double v = 1.0;
      for (int k = 0; k <= n; ++k) v *= path(k, model.finite().label(k, x[static_cast<std::size_t>(k)]));
      F(i) = v;
    }
    refF = ref1 * pm.measure(F);
  } else {
    if (c.model.value("type", "") != "lg") throw ConfigError("unbiasedness needs a finite model or an affine lg model");
    LinearGaussianSpec s;
    s.sigma_w = c.model.value("sigma_w", 1.0);
    s.sigma_v = c.model.value("sigma_v", 1.0);
    s.prior_mean = c.model.value("prior_mean", 0.0);
    s.prior_sd = c.model.value("prior_sd", 1.0);
    s.observations = c.model["observations"].get<std::vector<double>>();
    if (c.model.contains("drift")) s.drift = scalar_map(c.model["drift"], "drift");
    if (c.model.contains("observe")) s.observe = scalar_map(c.model["observe"], "observe");
    ref1 = std::exp(kalman_oracle(s).log_gamma[static_cast<std::size_t>(n)]);
  }
  std::vector<double> e1(static_cast<std::size_t>(R)), e2(e1), f1(e1), f2(e1);
  parallel_for(R, c.jobs, [&](int i) {
    Rng rng(c.seed, static_cast<std::uint64_t>(i));
    const ParticleRun run = run_smc(model, N, n, rng);
    e1[static_cast<std::size_t>(i)] = gamma_estimate_1(run, unit_function());
    if (model.has_density()) e2[static_cast<std::size_t>(i)] = gamma_estimate_2(model, run, unit_function());
    if (finite) {
      f1[static_cast<std::size_t>(i)] = gamma_estimate_1(run, path);
      f2[static_cast<std::size_t>(i)] = gamma_estimate_2(model, run, path);
    }
  });
  auto check = [&](const std::string& name, const std::vector<double>& v, double ref) {
    double mean = 0.0, sq = 0.0;
    for (double x : v) mean += x;
    mean /= R;
    for (double x : v) sq += (x - mean) * (x - mean);
    const double se = std::sqrt(sq / (R - 1) / R);
    r.add_close(name, tag({{"N", N}, {"n", n}, {"replicates", R}}), mean, ref, 3 * se);
  };
  check("estimator-1 gamma_n(1)", e1, ref1);
  if (model.has_density()) check("estimator-2 gamma_n(1)", e2, ref1);
  if (finite) {
    check("estimator-1 gamma_n(F)", f1, refF);
    check("estimator-2 gamma_n(F)", f2, refF);
  }
}

void scenario_duality(const ScenarioConfig& c, Report& r) {
  for (int n : sizes_or(c.n, {1, 2}))
    for (int N : sizes_or(c.N, {2, 3})) {
      const FeynmanKacModel m = at_horizon(c, n);
      const DualityReport d = verify_duality(m, N, n, c.budget);
      const std::string inst = tag({{"N", N}, {"n", n}});
      r.add_close("terminal decomposition", inst, d.terminal, 0.0, 1e-12);
      r.add_close("backward decomposition", inst, d.backward, 0.0, 1e-12);
      r.add_close("genealogy decomposition", inst, d.genealogy, 0.0, 1e-12);
      const FiniteFace& f = m.finite();
      ConfigurationFunction F = [&](const std::vector<int>& path, const std::vector<std::vector<std::int64_t>>& conf) {
        double v = 1.0 + path.back();
        for (std::size_t k = 0; k < conf.size(); ++k) {
          double s = 0.0;
          for (auto x : conf[k]) s += f.potential[k](static_cast<Eigen::Index>(x)) * (1.0 + static_cast<double>(x));
          v *= s / static_cast<double>(conf[k].size());
        }
        return v;
      };
      const auto [lhs, rhs] = duality_sides(m, N, n, DualityForm::Terminal, F, c.budget);
      r.add_close("symmetric function sides", inst, lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
    }
}

void scenario_reversibility(const ScenarioConfig& c, Report& r) {
  for (int n : sizes_or(c.n, {0, 1, 2}))
    for (int N : sizes_or(c.N, {1, 2, 3})) {
      const FeynmanKacModel m = at_horizon(c, n);
      const PathMeasure pm = path_measure(m, n, c.budget);
      for (auto v : {PgVariant::Ancestral, PgVariant::Backward}) {
        const EnumeratedKernel K = enumerate_pg_kernel(m, N, n, v, c.budget);
        const std::string inst = std::string(v == PgVariant::Ancestral ? "ancestral " : "backward ") + tag({{"N", N}, {"n", n}});
        r.add_close("detailed balance", inst, detailed_balance_residual(K, pm.measure), 0.0, 1e-10);
        r.add_close("invariance", inst, invariance_residual(K, pm.measure), 0.0, 1e-10);
      }
    }
}

void scenario_backward_equivalence(const ScenarioConfig& c, Report& r) {
  for (int n : sizes_or(c.n, {0, 1, 2}))
    for (int N : sizes_or(c.N, {2})) {
      const FeynmanKacModel m = at_horizon(c, n);
      r.add_close("ancestral vs backward line", tag({{"N", N}, {"n", n}}), verify_ancestral_backward(m, N, n, c.budget), 0.0, 1e-12);
    }
}

void contraction_rows(const FeynmanKacModel& m, const std::string& label, int N, int n, bool stated, std::size_t budget, Report& r) {
  const PathMeasure pm = path_measure(m, n, budget);
  double start = 0.0;
  for (Eigen::Index z = 0; z < pm.measure.size(); ++z) start = std::max(start, 2.0 * (1.0 - pm.measure.weights()(z)));
  for (auto v : {PgVariant::Ancestral, PgVariant::Backward}) {
    const EnumeratedKernel K = enumerate_pg_kernel(m, N, n, v, budget);
    const std::string inst =
        label + (v == PgVariant::Ancestral ? " ancestral " : " backward ") + tag({{"N", N}, {"n", n}});
    const double beta = dobrushin(K.matrix());
    if (stated) r.add_bound("dobrushin vs stated bound", inst, beta, minorization_bound(m, N, n), 1e-12);
    r.add_bound("dobrushin vs bound with exponent n+1", inst, beta, minorization_bound(m, N, n, n + 1), 1e-12);
    const auto profile = convergence_profile(K, pm.measure, 8);
    double worst = -1e300;
    for (std::size_t s = 0; s < profile.size(); ++s)
      worst = std::max(worst, profile[s] - std::pow(beta, static_cast<double>(s + 1)) * start);
    r.add_bound("profile minus beta^m envelope", inst, worst, 0.0, 1e-12);
  }
}

void scenario_contraction(const ScenarioConfig& c, Report& r) {
  for (int n : sizes_or(c.n, {0, 1, 2}))
    for (int N : sizes_or(c.N, {2, 3})) {
      contraction_rows(at_horizon(c, n), c.model.is_null() ? "hmm2" : "config", N, n, n >= 1, c.budget, r);
      if (!c.model.is_null()) continue;
      contraction_rows(sticky_chain(n, 0.9), "sticky", N, n, false, c.budget, r);
    }
  if (!c.model.is_null()) return;
  // unit potentials with M = I: beta(K) = 1 - (1 - 1/N)^{n+1}, above the stated bound
  for (int n : {0, 1, 2}) {
    const FeynmanKacModel m = sticky_chain(n);
    const double beta = dobrushin(enumerate_pg_kernel(m, 2, n, PgVariant::Ancestral, c.budget).matrix());
    r.add_close("sticky chain dobrushin", tag({{"N", 2}, {"n", n}}), beta, 1.0 - std::pow(0.5, n + 1), 1e-12);
    r.add_close("sticky chain excess over stated bound", tag({{"N", 2}, {"n", n}}), beta - minorization_bound(m, 2, n),
                std::pow(0.5, n + 1), 1e-12);
  }
}

void scenario_derivatives(const ScenarioConfig& c, Report& r) {
  const int n = c.n.value_or(2);
  const FeynmanKacModel m = at_horizon(c, n);
  const FiniteFace& face = m.finite();
  std::vector<int> z;
  for (int k = 0; k <= n; ++k) z.push_back(k % face.dim(k));
  Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(face.dim(n), 1.0, -0.5);
  const std::vector<int> Ns{4, 8, 16, 32};
  for (int order = 1; order <= 2; ++order) {
    const double closed = order == 1 ? first_derivative_q1(m, z, n, f) : second_derivative_q1(m, z, n, f);
    const std::string inst = tag({{"q", 1}, {"n", n}, {"m", order}});
    r.add_close("closed form vs tau assembly", inst, closed, upsilon_derivative(m, z, 1, n, order, f), 1e-12);
    const auto rows = upsilon_richardson(m, z, 1, n, order, f, Ns);
    PlotSeries s{"d" + std::to_string(order) + " Upsilon residual", {}, {}};
    for (const auto& row : rows) {
      s.x.push_back(row.N);
      s.y.push_back(row.residual);
    }
    r.plots.push_back(s);
    r.add_range("richardson fitted order", inst + " N=16..32", rows.back().fitted_order, 0.5, 2.0);
  }
  // first-order expansion of the particle Gibbs kernel
  for (int nn = 1; nn <= std::min(n, 2); ++nn) {
    const FeynmanKacModel mk = at_horizon(c, nn);
    const PathMeasure pm = path_measure(mk, nn, c.budget);
    const Eigen::MatrixXd D = first_order_kernel(mk, nn);
    const Eigen::MatrixXd E = pm.measure.weights().transpose().replicate(D.rows(), 1);
    auto residual = [&](const EnumeratedKernel& K) {
      return (K.N * (K.matrix() - E) - D).rowwise().lpNorm<1>().maxCoeff();
    };
    const double r2 = residual(enumerate_pg_kernel(mk, 2, nn, PgVariant::Ancestral, c.budget));
    const double r3 = residual(enumerate_pg_kernel(mk, 3, nn, PgVariant::Ancestral, c.budget));
    r.add_range("first-order kernel fitted order", tag({{"n", nn}, {"N_lo", 2}, {"N_hi", 3}}), std::log(r2 / r3) / std::log(1.5), 0.5, 2.0);
    PlotSeries s{"K first-order residual n=" + std::to_string(nn), {2, 3}, {r2, r3}};
    double prev = r3, prevN = 3;
    for (int N : {8, 16, 32}) {
      const double rn = residual(pg_kernel_counts(mk, N, nn, c.budget));
      s.x.push_back(N);
      s.y.push_back(rn);
      if (N == 32) r.add_range("first-order kernel fitted order", tag({{"n", nn}, {"N_lo", 16}, {"N_hi", 32}}), std::log(prev / rn) / std::log(N / prevN), 0.5, 2.0);
      prev = rn;
      prevN = N;
    }
    r.plots.push_back(s);
  }
  // sharpness under unit potentials: d1K(f)(y) - d1K(f)(z) = (n+1)(phi(y_0) - phi(z_0))
  {
    const FeynmanKacModel u = sticky_chain(n, 0.7);
    const TrajectorySpace space = TrajectorySpace::of(u.finite(), n);
    Eigen::VectorXd g(space.size());
    for (std::int64_t x = 0; x < space.size(); ++x) g(x) = space.decode(x)[0] == 0 ? 1.0 : -1.0;
    const std::vector<int> y = space.decode(0), zz = space.decode(space.size() - 1);
    const double gap = first_order_K(u, n, g, y).value - first_order_K(u, n, g, zz).value;
    r.add_close("unit-potential gap identity", tag({{"n", n}}), gap, (n + 1) * 2.0, 1e-12);
  }
  // normalized first derivative of the non-frozen law
  if (n + 1 <= face.horizon() || c.model.is_null()) {
    const int nn = std::min(n, 1);
    const FeynmanKacModel mk = at_horizon(c, nn + 1);
    std::vector<int> zz(z.begin(), z.begin() + nn + 1);
    const Eigen::VectorXd fk = Eigen::VectorXd::LinSpaced(mk.finite().dim(nn + 1), 1.0, -0.5);
    const FlowResult flow = exact_flow(mk, nn + 1);
    for (int q = 1; q <= 2; ++q) {
      const Eigen::VectorXd F = tensor_power_function(fk, q);
      const double pred = normalized_first_derivative(mk, zz, q, nn, F);
      const double eta = tensor_power_function(flow.eta[static_cast<std::size_t>(nn + 1)].weights(), q).dot(F);
      std::vector<double> vals;
      const std::vector<int> grid{8, 16, 32, 64};
      for (int N : grid) vals.push_back(nonfrozen_law(mk, zz, N, q, nn, c.budget).dot(F));
      const auto rows = richardson(grid, vals, {eta}, pred);
      r.add_range("normalized derivative fitted order", tag({{"q", q}, {"n", nn}}), rows.back().fitted_order, 0.5, 2.0);
      if (q == 1) {
        const Eigen::VectorXd fc = fk.array() - flow.eta[static_cast<std::size_t>(nn + 1)](fk);
        r.add_close("normalized derivative q=1 closed form", tag({{"n", nn}}), normalized_first_derivative(mk, zz, 1, nn, fc),
                    normalized_first_derivative_q1(mk, zz, nn, fk), 1e-12);
      }
    }
  }
}

void scenario_combinatorics(const ScenarioConfig& c, Report& r) {
  (void)c;
  // r^q = sum_p S(q,p) (r)_p and (r)_q = sum_p s(q,p) r^p
  double worst1 = 0, worst2 = 0;
  for (int q = 0; q <= 8; ++q)
    for (int x = 0; x <= 12; ++x) {
      BigInt a = 0, b = 0;
      for (int p = 0; p <= q; ++p) {
        a += stirling2(q, p) * falling(x, p);
        b += stirling1(q, p) * boost::multiprecision::pow(BigInt(x), static_cast<unsigned>(p));
      }
      if (a != boost::multiprecision::pow(BigInt(x), static_cast<unsigned>(q))) worst1 += 1;
      if (b != falling(x, q)) worst2 += 1;
    }
  r.add_close("stirling second kind identity", "q<=8 r<=12", worst1, 0.0, 0.0);
  r.add_close("stirling first kind identity", "q<=8 r<=12", worst2, 0.0, 0.0);
  for (int q = 1; q <= 5; ++q)
    for (int N : {q + 1, 8, 64}) {
      if (N <= q) continue;
      r.add_close("coalescence law mass", tag({{"N", N}, {"q", q}}), coal_inf_law(N, q).sum(), 1.0, 1e-14);
    }
  const std::map<int, std::vector<long long>> tau2{{3, {1, 3, 11, -9, -15, 9}}, {4, {7, 6, 35, -36, -36, 24}}, {5, {25, 10, 85, -100, -70, 50}}};
  const std::vector<std::pair<int, int>> idx{{2, 0}, {0, 2}, {0, 0}, {1, 0}, {0, 1}, {1, 1}};
  for (const auto& [q, vals] : tau2) {
    const DerivativeTable t = tau_table(3, q);
    double bad = 0;
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (t(2, idx[i].first, idx[i].second) != Rational(vals[i])) bad += 1;
    if (t(1, 1, 0) != Rational(q * (q - 1) / 2)) bad += 1;
    if (t(1, 0, 1) != Rational(q)) bad += 1;
    if (t(1, 0, 0) != Rational(-q * (q - 1) / 2 - q)) bad += 1;
    r.add_close("tau reference values", tag({{"q", q}}), bad, 0.0, 0.0);
    for (int mm = 1; mm <= 3; ++mm) {
      Rational s = 0;
      for (int p1 = 0; p1 < q; ++p1)
        for (int p2 = 0; p2 <= q; ++p2) s += t(mm, p1, p2);
      r.add_close("derivative null mass", tag({{"q", q}, {"m", mm}}), to_double(s), 0.0, 0.0);
    }
  }
  for (int q : {2, 3, 4})
    for (int mm : {1, 2}) {
      double lo = 1e300, hi = 0;
      for (int N : {8, 16, 32, 64}) {
        const double C = law_taylor_check(N, q, mm).constant;
        lo = std::min(lo, C);
        hi = std::max(hi, C);
      }
      r.add_bound("law Taylor constant spread", tag({{"q", q}, {"m", mm}}), hi / std::max(lo, 1e-300), 4.0);
    }
  // orbit formula against brute-force orbit marking
  for (auto [q, n] : {std::pair{2, 2}, std::pair{3, 1}}) {
    const auto classes = enumerate_classes(q, n, q, q);
    double bad = 0;
    BigInt total = 0;
    for (const auto& cl : classes) {
      total += cl.orbit;
      if (orbit_cardinal(cl.representative, 0).orbit != cl.orbit) bad += 1;
    }
    r.add_close("orbit formula vs brute force", tag({{"q", q}, {"n", n}, {"classes", static_cast<long long>(classes.size())}}), bad, 0.0, 0.0);
    r.add_close("orbit sizes partition", tag({{"q", q}, {"n", n}}), to_double(Rational(total)), to_double(Rational(count_sequences(q, n, q, q))), 0.0);
  }
  InfectedMappingSequence jungle;
  jungle.q = 4;
  jungle.a = {{0, 1, 3, 3}, {1, 1, 3, 1}, {0, 1, 2, 3}, {0, 1, 3, 0}};
  jungle.b.assign(4, std::vector<int>(4, 0));
  r.add_close("worked stabilizer", "q=4 n=3", to_double(Rational(stabilizer_formula(jungle))), 4.0, 0.0);
  for (int q : {3, 4}) {
    const int n = 2, k = 1;
    const BigInt fq = factorial(q);
    auto pw = [&](int e) { return boost::multiprecision::pow(fq, static_cast<unsigned>(e)); };
    InfectedMappingSequence f0 = InfectedMappingSequence::identity(q, n), c10 = f0, c01 = f0;
    c10.a[k][1] = 0;
    c01.b[k][0] = 1;
    const std::string inst = tag({{"q", q}, {"n", n}});
    r.add_close("family f0", inst, to_double(Rational(orbit_cardinal(f0).orbit)), to_double(Rational(pw(n + 1))), 0.0);
    r.add_close("family f10", inst, to_double(Rational(orbit_cardinal(c10).orbit)), to_double(Rational(pw(n + 2) / (factorial(q - 2) * 2))), 0.0);
    r.add_close("family f01", inst, to_double(Rational(orbit_cardinal(c01).orbit)), to_double(Rational(pw(n + 1) * q)), 0.0);
  }
}

void scenario_moments(const ScenarioConfig& c, Report& r) {
  const int n = c.n.value_or(2);
  const FeynmanKacModel m = at_horizon(c, n);
  std::vector<int> z;
  for (int k = 0; k <= n; ++k) z.push_back(k % m.finite().dim(k));
  const auto rows = moment_scaling_check(m, z, n, 4, {16, 32, 64, 128});
  std::map<int, std::vector<MomentRow>> byq;
  for (const auto& row : rows) byq[row.q].push_back(row);
  for (std::size_t i = 1; i < byq[2].size(); ++i)
    r.add_range("second moment halving", tag({{"N", byq[2][i - 1].N}, {"N2", byq[2][i].N}}), byq[2][i].moment / byq[2][i - 1].moment, 0.4, 0.6);
  for (std::size_t i = 1; i < byq[4].size(); ++i)
    r.add_bound("scaled fourth moment growth", tag({{"N", byq[4][i - 1].N}, {"N2", byq[4][i].N}}), byq[4][i].scaled / byq[4][i - 1].scaled, 1.5);
  PlotSeries s2{"N m2", {}, {}}, s4{"N^2 m4", {}, {}};
  for (const auto& row : byq[2]) s2.x.push_back(row.N), s2.y.push_back(row.scaled);
  for (const auto& row : byq[4]) s4.x.push_back(row.N), s4.y.push_back(row.scaled);
  r.plots = {s2, s4};
  r.add_close("moment via count engine", tag({{"q", 2}, {"N", 8}}), frozen_moment_counts(m, z, 8, 2, n, c.budget), frozen_moment(m, z, 8, 2, n), 1e-12);
}

void scenario_island(const ScenarioConfig& c, Report& r) {
  const int n = c.n.value_or(1), Np = c.N_inner.value_or(2), N = c.N.value_or(10);
  const int steps = c.steps > 0 ? c.steps : 20000;
  const FeynmanKacModel inner = at_horizon(c, n);
  const FeynmanKacModel lifted = lift_model(inner, Np);
  const FlowResult fi = exact_flow(inner, n), fl = exact_flow(lifted, n);
  auto f = [](const State& x) { return 1.0 + 2.0 * x(0); };
  for (int k = 0; k <= n; ++k) {
    const FiniteFace& lf = lifted.finite();
    Eigen::VectorXd F(lf.dim(k)), g(inner.finite().dim(k));
    for (int i = 0; i < F.size(); ++i) F(i) = island_mean(lf.label(k, i), inner.state_dim, f);
    for (int i = 0; i < g.size(); ++i) g(i) = f(inner.finite().label(k, i));
    r.add_close("island transfer identity", tag({{"N_inner", Np}, {"k", k}}), fl.gamma(k, F), fi.gamma(k, g), 1e-12);
  }
  Rng rng(c.seed, 0);
  const IslandChain chain = island_pg(inner, Np, N, steps, PgVariant::Ancestral, f, rng);
  const int B = 20, len = steps / B;
  std::vector<double> means;
  for (int b = 0; b < B; ++b) {
    double s = 0;
    for (int i = 1 + b * len; i <= (b + 1) * len; ++i) s += chain.terminal_means[static_cast<std::size_t>(i)];
    means.push_back(s / len);
  }
  double mu = 0, sq = 0;
  for (double v : means) mu += v / B;
  for (double v : means) sq += (v - mu) * (v - mu);
  const double se = std::sqrt(sq / (B - 1) / B);
  Eigen::VectorXd g(inner.finite().dim(n));
  for (int i = 0; i < g.size(); ++i) g(i) = f(inner.finite().label(n, i));
  r.add_close("island particle Gibbs average", tag({{"N", N}, {"N_inner", Np}, {"steps", steps}}), mu, fi.eta[static_cast<std::size_t>(n)](g),
              4 * se);
}

}  // namespace

Report run_scenario(const ScenarioConfig& c) {
  Report r;
  r.scenario = c.name;
  r.seed = c.seed;
  static const std::map<std::string, std::function<void(const ScenarioConfig&, Report&)>> table{
      {"unbiasedness", scenario_unbiasedness},
      {"duality", scenario_duality},
      {"reversibility", scenario_reversibility},
      {"backward-equivalence", scenario_backward_equivalence},
      {"contraction", scenario_contraction},
      {"derivative-extrapolation", scenario_derivatives},
      {"combinatorics", scenario_combinatorics},
      {"moments", scenario_moments},
      {"island", scenario_island},
  };
  const auto it = table.find(c.name);
  if (it == table.end()) throw ConfigError("unknown scenario '" + c.name + "'");
  it->second(c, r);
  return r;
}

}  // namespace pmcmc
