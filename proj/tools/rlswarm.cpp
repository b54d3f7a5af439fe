// Command-line front end: runs experiments from JSON scenarios, rebuilds
// comparison tables from stored variant summaries, and recomputes trial
// summaries from ledger CSVs. Exit codes: 0 success, 2 configuration
// problem, 3 runtime failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <rlswarm/experiment.hpp>

namespace {

using nlohmann::ordered_json;

struct RunFlags {
  std::string config_path;
  int trials = 0;
  bool trials_set = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  std::vector<std::string> overrides;
};

int cmd_run(const RunFlags& flags) {
  nlohmann::json raw = rlswarm::load_raw_config(flags.config_path);
  for (const std::string& o : flags.overrides) rlswarm::apply_override(raw, o);
  if (flags.trials_set)
    rlswarm::apply_override(raw, "trials=" + std::to_string(flags.trials));
  if (flags.seed_set)
    rlswarm::apply_override(raw, "master_seed=" + std::to_string(flags.seed));
  if (!flags.out_dir.empty())
    rlswarm::apply_override(raw, "out_dir=" + flags.out_dir);

  rlswarm::ExperimentSpec spec = rlswarm::parse_experiment(raw);
  std::cout << "scenario '" << spec.scenario << "': "
            << spec.effective_variants().size() << " variants x " << spec.trials
            << " trials -> " << spec.out_dir << "\n";
  rlswarm::run_experiment(spec, std::cout);
  return 0;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rlswarm::ConfigError("path", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
  out << text;
}

int cmd_compare(const std::vector<std::string>& paths,
                const std::string& out_path) {
  std::vector<ordered_json> summaries;
  for (const std::string& p : paths) {
    try {
      summaries.push_back(ordered_json::parse(read_file(p)));
    } catch (const nlohmann::json::parse_error& e) {
      throw rlswarm::ConfigError("json", std::string(e.what()) + " in '" + p + "'");
    }
  }
  emit(rlswarm::compare_report(summaries), out_path);
  return 0;
}

int cmd_replay(const std::string& transfers_path, const std::string& out_path) {
  const std::string suffix = "_transfers.csv";
  if (transfers_path.size() <= suffix.size() ||
      transfers_path.compare(transfers_path.size() - suffix.size(),
                             suffix.size(), suffix) != 0)
    throw rlswarm::ConfigError("ledger",
                               "expected a path ending in _transfers.csv");
  std::string peers_path =
      transfers_path.substr(0, transfers_path.size() - suffix.size()) +
      "_peers.csv";

  std::ifstream transfers(transfers_path);
  if (!transfers)
    throw rlswarm::ConfigError("path", "cannot open '" + transfers_path + "'");
  std::ifstream peers(peers_path);
  if (!peers)
    throw rlswarm::ConfigError("path", "cannot open '" + peers_path + "'");

  rlswarm::MetricsLedger ledger = rlswarm::read_ledger_csv(transfers, peers);
  emit(rlswarm::summarize_trial(ledger).dump(2) + "\n", out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic peer-to-peer swarm simulator with a learning "
               "peer-selection strategy"};
  app.require_subcommand(1);

  RunFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "Run an experiment from a JSON scenario");
  run->add_option("config", run_flags.config_path, "Scenario JSON file")
      ->required();
  CLI::Option* trials_opt =
      run->add_option("--trials", run_flags.trials, "Trials per variant")
          ->check(CLI::PositiveNumber);
  CLI::Option* seed_opt =
      run->add_option("--seed", run_flags.seed, "Master seed for trial derivation");
  run->add_option("--out", run_flags.out_dir, "Output directory");
  run->add_option("--override", run_flags.overrides,
                  "key=value patch applied to the scenario document");

  std::vector<std::string> compare_paths;
  std::string compare_out;
  CLI::App* compare = app.add_subcommand(
      "compare", "Rebuild a comparison table from variant summary JSON files");
  compare->add_option("summaries", compare_paths, "Variant summary files")
      ->required()
      ->expected(-1);
  compare->add_option("--out", compare_out, "Write the table here instead of stdout");

  std::string replay_path, replay_out;
  CLI::App* replay = app.add_subcommand(
      "replay", "Recompute a trial summary from a stored ledger");
  replay->add_option("ledger", replay_path, "Path to <stem>_transfers.csv")
      ->required();
  replay->add_option("--out", replay_out, "Write the summary here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  run_flags.trials_set = trials_opt->count() > 0;
  run_flags.seed_set = seed_opt->count() > 0;

  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (compare->parsed()) return cmd_compare(compare_paths, compare_out);
    if (replay->parsed()) return cmd_replay(replay_path, replay_out);
    return 2;
  } catch (const rlswarm::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
