#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "deltarl/ladder.hpp"
#include "deltarl/mdp.hpp"

namespace deltarl {

// Learner tokens accepted in config files. "actor-critic" also accepts the
// short alias "alg2".
inline const std::vector<std::string>& learner_kinds() {
  static const std::vector<std::string> kinds = {
      "baseline-sarsa",  "sarsa-delta-1step", "sarsa-delta-multistep",
      "phased-td",       "phased-delta",      "td-lambda",
      "td-lambda-delta", "actor-critic"};
  return kinds;
}

nlohmann::json mdp_to_json(const MdpSpec& mdp);
MdpSpec mdp_from_json(const nlohmann::json& j);

struct ExperimentConfig {
  std::string learner;
  nlohmann::json doc;  // effective config with defaults filled

  MdpSpec mdp;
  TabularPolicy policy;
  TimescaleLadder ladder;
  bool has_ladder = false;

  long steps = 0;
  int phases = 0;
  int n = 0;
  double confidence_delta = 0.1;
  double gamma = 0.9;
  double alpha = 0.1;
  double lambda = 0.9;
  int k = 1;
  int window = 16;  // T
  double epsilon = 0.1;
  double alpha_policy = 0.05;
  double entropy_coeff = 0.0;
  bool alpha_decay = false;
  bool control = false;
  std::string bootstrap = "on-policy";  // or "greedy"
  int episode_cap = 100;
  int start_state = 0;
  long log_every = 1000;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";
};

// Parses and validates a config document; fills defaults into `doc`.
// Missing required fields raise ConfigError naming the field.
ExperimentConfig config_from_json(const nlohmann::json& j);

// Same from a file; parse errors carry the position reported by the parser.
ExperimentConfig load_config(const std::string& path);

void save_config(const ExperimentConfig& config, const std::string& path);

// FNV-1a of the canonical (sorted-key) dump of the effective config.
std::uint64_t config_hash(const ExperimentConfig& config);

}  // namespace deltarl
