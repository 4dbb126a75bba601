#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmcmc/fkmodel.hpp"
#include "pmcmc/report.hpp"

namespace pmcmc {

struct ScenarioConfig {
  std::string name;
  nlohmann::json model;  // empty: scenario default
  std::optional<int> N, N_inner, n, q, m;
  int replicates = 0;  // 0: scenario default
  int steps = 0;       // chain length for island runs; 0: default
  std::uint64_t seed = 1;
  int jobs = 1;
  std::size_t budget = kDefaultEnumerationBudget;
};

const std::vector<std::string>& scenario_names();

// Top level: {"seed", "budget", "out", "scenarios": [{"name", "model", "N", "N_inner", "n", "q", "m", "replicates", "steps", "seed"}]}
struct RunConfig {
  std::vector<ScenarioConfig> scenarios;
  std::string out = "pmcmclab-out";
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

// {"type": "hmm" | "absorption" | "lg" | "finite", ...}
FeynmanKacModel build_model(const nlohmann::json& spec);

// reference instances
FeynmanKacModel reference_hmm2(int n);
FeynmanKacModel reference_hmm3(int n);
// unit potentials and a sticky two-state chain
FeynmanKacModel sticky_chain(int n, double stay = 1.0);

Report run_scenario(const ScenarioConfig& c);

}  // namespace pmcmc
