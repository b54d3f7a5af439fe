#pragma once

// Experiment orchestration: JSON scenario files, per-trial seed derivation,
// A/B variant runs, summary JSON emission, and the plain-text comparison
// table. File layout under the output directory:
//   <variant>_trial<k>_transfers.csv / _peers.csv / _summary.json
//   <variant>_summary.json
//   comparison.txt

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>
#include <rlswarm/config.hpp>
#include <rlswarm/metrics.hpp>

namespace rlswarm {

struct VariantSpec {
  std::string name;
  std::map<std::string, int> strategy_mix;
  int n_freeriders = -1;  // negative means inherit from the base config
};

struct ExperimentSpec {
  std::string scenario = "swarm";
  SwarmConfig base;
  std::vector<VariantSpec> variants;  // empty means regular-vs-rl default
  int trials = 7;
  std::uint64_t master_seed = 1;
  std::string out_dir = "out";

  void validate() const;  // throws ConfigError naming the field

  std::vector<VariantSpec> effective_variants() const;
  std::uint64_t trial_seed(int trial) const;
  SwarmConfig variant_config(const VariantSpec& variant, int trial) const;
};

// Reads and parses the file without schema checks, so overrides can be
// patched in before the strict pass.
nlohmann::json load_raw_config(const std::string& path);

// Strict parse: unknown fields are errors naming the field.
ExperimentSpec parse_experiment(const nlohmann::json& j);
ExperimentSpec load_config(const std::string& path);

// Applies a dotted-path override ("config.l_max=16", "trials=3") onto raw
// JSON before parsing, so typos still fail the strict schema check.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Per-trial metrics block, recomputable from the stored CSV pair.
nlohmann::ordered_json summarize_trial(const MetricsLedger& ledger);

// Cross-trial aggregate for one variant (medians of per-trial scalars).
nlohmann::ordered_json variant_summary(
    const std::string& scenario, const std::string& variant,
    const std::vector<nlohmann::ordered_json>& trial_summaries);

// Plain-text table: one row per metric, one value column per variant and,
// from the second variant on, the percent change against the first.
std::string compare_report(const std::vector<nlohmann::ordered_json>& variants);

// Runs trials for every variant, writes ledgers, summaries, and the
// comparison table into spec.out_dir. Progress goes to `log`. Throws
// std::runtime_error naming variant, trial, and tick if a trial fails.
void run_experiment(const ExperimentSpec& spec, std::ostream& log);

}  // namespace rlswarm
