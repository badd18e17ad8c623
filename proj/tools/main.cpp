#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "deltarl/csv.hpp"
#include "deltarl/runner.hpp"

namespace {

using deltarl::ExperimentConfig;

// Precedence for the output directory: --out, then DELTARL_OUT, then config.
void apply_out_dir(ExperimentConfig& config, const std::string& cli_out) {
  if (!cli_out.empty()) {
    config.out_dir = cli_out;
  } else if (const char* env = std::getenv("DELTARL_OUT")) {
    config.out_dir = env;
  }
  config.doc["out_dir"] = config.out_dir;
}

ExperimentConfig load_with_overrides(const std::string& path,
                                     const std::string& out_dir, int ladder_z,
                                     double gamma_max) {
  ExperimentConfig config = deltarl::load_config(path);
  nlohmann::json doc = config.doc;
  bool patched = false;
  if (gamma_max >= 0.0) {
    nlohmann::json ladder =
        doc.contains("ladder") ? doc["ladder"] : nlohmann::json::object();
    ladder["kind"] = "halving";
    ladder["gamma_max"] = gamma_max;
    if (ladder_z >= 0)
      ladder["Z"] = ladder_z;
    else if (!ladder.contains("Z"))
      ladder["Z"] = 3;
    doc["ladder"] = ladder;
    patched = true;
  } else if (ladder_z >= 0) {
    if (!doc.contains("ladder"))
      throw deltarl::ConfigError("--Z needs a ladder in the config");
    doc["ladder"]["Z"] = ladder_z;
    patched = true;
  }
  if (patched) config = deltarl::config_from_json(doc);
  apply_out_dir(config, out_dir);
  return config;
}

void echo_config(const ExperimentConfig& config) {
  std::printf("# effective config (hash %s)\n%s\n",
              deltarl::hex64(deltarl::config_hash(config)).c_str(),
              config.doc.dump(2).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-timescale temporal-difference learners and verifiers"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seed_override;
  int ladder_z = -1;
  double gamma_max = -1.0;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", config_path, "config JSON path");
    if (needs_config) opt->required();
    cmd->add_option("--out", out_dir, "output directory (overrides config)");
    cmd->add_option("--Z", ladder_z, "ladder depth override");
    cmd->add_option("--gamma-max", gamma_max,
                    "build a halving ladder ending at this discount");
  };

  auto* cmd_run = app.add_subcommand("run", "execute one configured learner");
  add_common(cmd_run, true);
  cmd_run->add_option("--seed", seed_override,
                      "run only these seeds (repeatable)");

  auto* cmd_sweep =
      app.add_subcommand("sweep", "cross product of one axis and all seeds");
  add_common(cmd_sweep, true);
  std::string axis;
  std::vector<std::string> value_texts;
  int jobs = 1;
  cmd_sweep->add_option("--axis", axis, "Z | k | n | alpha | lambda")
      ->required();
  cmd_sweep->add_option("--values", value_texts, "axis values (repeatable)");
  cmd_sweep->add_option("--jobs", jobs, "parallel runs");

  auto* cmd_verify =
      app.add_subcommand("verify", "run a verification suite");
  std::string suite = "all";
  cmd_verify->add_option("suite", suite,
                         "t1 | t2 | t3 | t4 | identities | all");
  cmd_verify->add_option("--out", out_dir, "output directory");

  auto* cmd_oracle =
      app.add_subcommand("oracle", "dump the exact tables for the config");
  add_common(cmd_oracle, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      ExperimentConfig config =
          load_with_overrides(config_path, out_dir, ladder_z, gamma_max);
      if (!seed_override.empty()) {
        config.seeds = seed_override;
        config.doc["seeds"] = config.seeds;
      }
      echo_config(config);
      for (std::uint64_t seed : config.seeds) {
        const deltarl::RunResult res = deltarl::run(config, seed);
        std::printf("seed %llu: %s  final_metric=%.6g  bounds_held=%d  "
                    "(%.2fs)\n",
                    static_cast<unsigned long long>(seed),
                    res.csv_path.c_str(), res.final_metric,
                    res.bounds_held ? 1 : 0, res.wall_seconds);
      }
      return 0;
    }
    if (cmd_sweep->parsed()) {
      ExperimentConfig config =
          load_with_overrides(config_path, out_dir, ladder_z, gamma_max);
      echo_config(config);
      std::vector<nlohmann::json> values;
      for (const auto& text : value_texts) {
        try {
          values.push_back(nlohmann::json::parse(text));
        } catch (const nlohmann::json::parse_error&) {
          throw deltarl::ConfigError("cannot parse sweep value '" + text +
                                     "'");
        }
      }
      const auto results = deltarl::sweep(config, axis, values, jobs);
      std::printf("sweep complete: %zu runs, aggregate in %s/sweep.csv\n",
                  results.size(), config.out_dir.c_str());
      return 0;
    }
    if (cmd_verify->parsed()) {
      std::string dir = out_dir;
      if (dir.empty()) {
        if (const char* env = std::getenv("DELTARL_OUT"))
          dir = env;
        else
          dir = "out";
      }
      return deltarl::verify(suite, dir);
    }
    if (cmd_oracle->parsed()) {
      ExperimentConfig config =
          load_with_overrides(config_path, out_dir, ladder_z, gamma_max);
      const std::string path = deltarl::oracle_dump(config);
      std::printf("oracle tables written to %s\n", path.c_str());
      return 0;
    }
  } catch (const deltarl::DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 3;
  } catch (const deltarl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const std::out_of_range& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
