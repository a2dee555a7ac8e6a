#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swarmflow/ensembles.hpp"
#include "swarmflow/lti.hpp"
#include "swarmflow/propagation.hpp"
#include "swarmflow/training.hpp"

namespace swarmflow::cli {

// Bad or inconsistent configuration; maps to the config exit code.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Parsed config text: section -> key -> JSON value. Keys before the first
// section header live in section "".
using ConfigTable = std::map<std::string, std::map<std::string, nlohmann::json>>;

ConfigTable parse_config_text(const std::string& text, const std::string& origin = "<config>");

struct EnsembleSpec {
  std::string kind;  // gaussian | ring | pyramid | torus | mixture | csv | points
  nlohmann::json params = nlohmann::json::object();
};

struct PropagateSettings {
  int steps = kDefaultPropagationSteps;
  std::vector<double> explicit_grid;  // empty = uniform
  int members = 0;                    // 0 = whole source ensemble
  bool svg = true;
};

struct ExperimentConfig {
  std::filesystem::path base_dir;  // directory of the config file; relative paths resolve here
  std::string system_description;
  std::optional<LtiSystem> system;
  EnsembleSpec source;
  EnsembleSpec target;
  TrainConfig train;
  PropagateSettings propagate;
  std::filesystem::path output_dir = "swarmflow_out";
  std::uint64_t seed = 0;
  int threads = 1;

  const LtiSystem& sys() const { return *system; }
  PropagationPlan plan(std::optional<int> steps_override = std::nullopt) const;
};

// Reads and validates a config. SWARMFLOW_SEED, when set, overrides the seed.
// Throws ConfigError (including for uncontrollable systems) or IoError.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::filesystem::path& base_dir,
                                         const std::string& origin = "<config>");

// Builds an ensemble from its spec. `salt` decorrelates source and target seeds.
Ensemble build_ensemble(const EnsembleSpec& spec, const ExperimentConfig& cfg, std::uint64_t salt);

}  // namespace swarmflow::cli
