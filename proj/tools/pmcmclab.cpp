#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "pmcmc/errors.hpp"
#include "pmcmc/scenarios.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kPass = 0, kCheckFailure = 1, kConfigError = 2, kBudgetExceeded = 3, kOtherError = 4 };

int run(const std::string& config, std::optional<std::uint64_t> seed, std::optional<std::string> out, int jobs) {
  pmcmc::RunConfig rc = pmcmc::load_config(config);
  if (out) rc.out = *out;
  std::vector<pmcmc::Report> reports;
  std::map<std::string, int> seen;
  for (auto& sc : rc.scenarios) {
    if (seed) sc.seed = *seed;
    sc.jobs = jobs;
    pmcmc::Report r = pmcmc::run_scenario(sc);
    const int k = seen[sc.name]++;
    const fs::path dir = fs::path(rc.out) / (k == 0 ? sc.name : sc.name + "-" + std::to_string(k));
    fs::create_directories(dir);
    std::ofstream csv(dir / "report.csv", std::ios::binary);
    pmcmc::write_report_csv(csv, r);
    if (!r.plots.empty()) {
      std::ofstream svg(dir / "plot.svg", std::ios::binary);
      svg << pmcmc::render_svg(sc.name, r.plots);
    }
    reports.push_back(std::move(r));
  }
  fs::create_directories(rc.out);
  std::ofstream summary(fs::path(rc.out) / "summary.csv", std::ios::binary);
  pmcmc::emit_summary(summary, std::cout, reports);
  bool ok = true;
  for (const auto& r : reports)
    for (const auto& row : r.rows)
      if (!row.pass) {
        ok = false;
        std::cerr << "FAILED " << r.scenario << ": " << row.check << " [" << row.instance << "] value=" << pmcmc::format_double(row.value)
                  << " reference=" << pmcmc::format_double(row.reference) << " tolerance=" << pmcmc::format_double(row.tolerance) << '\n';
      }
  return ok ? kPass : kCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pmcmclab: exact and Monte Carlo checks for particle Gibbs samplers"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "run the scenarios of a config file");
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int jobs = 1;
  run_cmd->add_option("--config", config, "config file")->required();
  auto* seed_opt = run_cmd->add_option("--seed", seed, "base seed for every scenario");
  auto* out_opt = run_cmd->add_option("--out", out, "output directory");
  run_cmd->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* list_cmd = app.add_subcommand("list-scenarios", "print the scenario names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (list_cmd->parsed()) {
    for (const auto& n : pmcmc::scenario_names()) std::cout << n << '\n';
    return kPass;
  }
  try {
    return run(config, seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt,
               out_opt->count() ? std::optional<std::string>(out) : std::nullopt, jobs);
  } catch (const pmcmc::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kConfigError;
  } catch (const pmcmc::BudgetExceeded& e) {
    std::cerr << e.what() << '\n';
    return kBudgetExceeded;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kOtherError;
  }
}
