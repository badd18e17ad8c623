#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deltarl/config.hpp"
#include "deltarl/tabular.hpp"

namespace deltarl {

// One row per (level, state, action) with the level estimate and the
// reconstructed prefix sum. Returns the path written.
std::string write_delta_table_csv(const DeltaTable& table,
                                  const std::string& path,
                                  std::uint64_t config_hash);

struct RunResult {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string csv_path;
  // Evaluation runs: final sup-norm error against the exact solve.
  // Control runs: mean return over the last 100 completed episodes.
  double final_metric = 0.0;
  bool bounds_held = true;  // phased runs only; true elsewhere
  double wall_seconds = 0.0;
};

// Dispatches to the configured learner, streaming rows to
// <out_dir>/<learner>-seed<seed>.csv. Output bytes are a pure function of
// (config, seed). Divergence raises DivergenceError.
RunResult run(const ExperimentConfig& config, std::uint64_t seed);

// Cross product of values x seeds; runs execute in parallel up to `jobs`.
// Writes <out_dir>/sweep.csv with one row per run, in deterministic order.
std::vector<RunResult> sweep(const ExperimentConfig& config,
                             const std::string& axis,
                             const std::vector<nlohmann::json>& values,
                             int jobs);

// Exact tables for the configured MDP/policy: per-level rows when a ladder
// is present, single-discount rows otherwise.
std::string oracle_dump(const ExperimentConfig& config);

struct VerifyOutcome {
  bool pass = false;
  std::string detail;
};

VerifyOutcome verify_equivalence(const std::string& out_dir);
VerifyOutcome verify_contraction(const std::string& out_dir);
VerifyOutcome verify_td_bound(const std::string& out_dir);
VerifyOutcome verify_delta_bound(const std::string& out_dir);
VerifyOutcome verify_identities(const std::string& out_dir);

// Suite ids: t1 | equivalence, t2 | contraction, t3 | td-bound,
// t4 | delta-bound, identities, all. Returns 0 on pass, 2 on failure.
int verify(const std::string& suite, const std::string& out_dir);

}  // namespace deltarl
