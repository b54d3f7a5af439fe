#include <rlswarm/experiment.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <rlswarm/learning.hpp>
#include <rlswarm/random.hpp>
#include <rlswarm/sim.hpp>

namespace rlswarm {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw ConfigError(field, what);
}

void expect_keys(const json& obj, const std::string& prefix,
                 const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) bad(prefix + it.key(), "unknown field");
}

int get_int(const json& v, const std::string& field) {
  if (!v.is_number_integer()) bad(field, "expected an integer");
  return v.get<int>();
}

double get_double(const json& v, const std::string& field) {
  if (!v.is_number()) bad(field, "expected a number");
  return v.get<double>();
}

bool get_bool(const json& v, const std::string& field) {
  if (!v.is_boolean()) bad(field, "expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& v, const std::string& field) {
  if (!v.is_string()) bad(field, "expected a string");
  return v.get<std::string>();
}

std::uint64_t get_u64(const json& v, const std::string& field) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  bad(field, "expected a non-negative integer");
}

std::map<std::string, int> get_mix(const json& v, const std::string& field) {
  if (!v.is_object()) bad(field, "expected an object of counts");
  std::map<std::string, int> mix;
  for (auto it = v.begin(); it != v.end(); ++it)
    mix[it.key()] = get_int(it.value(), field + "." + it.key());
  return mix;
}

SwarmConfig parse_swarm(const json& j, const std::string& prefix) {
  if (!j.is_object()) bad("config", "expected an object");
  expect_keys(j, prefix,
              {"n_leechers", "n_seeds", "seed_capacity_total",
               "capacity_distribution", "file_size", "piece_size",
               "rechoke_period", "strategy_mix", "n_freeriders",
               "churn_enabled", "rng_seed", "max_ticks", "l_max", "alpha",
               "gamma", "target_size", "probe_size", "drop_size", "theta_mode",
               "min_slots", "regular_slots", "seed_slots",
               "solver_eps", "solver_max_sweeps"});

  SwarmConfig c;
  auto has = [&](const char* k) { return j.contains(k); };
  auto f = [&](const char* k) { return prefix + k; };

  if (has("n_leechers")) c.n_leechers = get_int(j["n_leechers"], f("n_leechers"));
  if (has("n_seeds")) c.n_seeds = get_int(j["n_seeds"], f("n_seeds"));
  if (has("seed_capacity_total"))
    c.seed_capacity_total = get_double(j["seed_capacity_total"], f("seed_capacity_total"));
  if (has("capacity_distribution")) {
    const json& arr = j["capacity_distribution"];
    if (!arr.is_array()) bad(f("capacity_distribution"), "expected an array");
    c.capacity_distribution.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      std::string bp = f("capacity_distribution") + "[" + std::to_string(i) + "].";
      const json& b = arr[i];
      if (!b.is_object()) bad(bp + "rate", "expected an object");
      expect_keys(b, bp, {"rate", "fraction"});
      if (!b.contains("rate")) bad(bp + "rate", "required");
      if (!b.contains("fraction")) bad(bp + "fraction", "required");
      c.capacity_distribution.push_back(
          {get_double(b["rate"], bp + "rate"),
           get_double(b["fraction"], bp + "fraction")});
    }
  }
  if (has("file_size")) c.file_size = get_u64(j["file_size"], f("file_size"));
  if (has("piece_size")) c.piece_size = get_u64(j["piece_size"], f("piece_size"));
  if (has("rechoke_period"))
    c.rechoke_period = get_double(j["rechoke_period"], f("rechoke_period"));
  if (has("strategy_mix")) c.strategy_mix = get_mix(j["strategy_mix"], f("strategy_mix"));
  if (has("n_freeriders")) c.n_freeriders = get_int(j["n_freeriders"], f("n_freeriders"));
  if (has("churn_enabled")) c.churn_enabled = get_bool(j["churn_enabled"], f("churn_enabled"));
  if (has("rng_seed")) c.rng_seed = get_u64(j["rng_seed"], f("rng_seed"));
  if (has("max_ticks")) c.max_ticks = get_int(j["max_ticks"], f("max_ticks"));
  if (has("l_max")) c.l_max = get_double(j["l_max"], f("l_max"));
  if (has("alpha")) c.alpha = get_double(j["alpha"], f("alpha"));
  if (has("gamma")) c.gamma = get_double(j["gamma"], f("gamma"));
  if (has("target_size")) c.target_size = get_int(j["target_size"], f("target_size"));
  if (has("probe_size")) c.probe_size = get_int(j["probe_size"], f("probe_size"));
  if (has("drop_size")) c.drop_size = get_int(j["drop_size"], f("drop_size"));
  if (has("theta_mode")) c.theta_mode = get_string(j["theta_mode"], f("theta_mode"));
  if (has("min_slots")) c.min_slots = get_int(j["min_slots"], f("min_slots"));
  if (has("regular_slots")) c.regular_slots = get_int(j["regular_slots"], f("regular_slots"));
  if (has("seed_slots")) c.seed_slots = get_int(j["seed_slots"], f("seed_slots"));
  if (has("solver_eps")) c.solver_eps = get_double(j["solver_eps"], f("solver_eps"));
  if (has("solver_max_sweeps"))
    c.solver_max_sweeps = get_int(j["solver_max_sweeps"], f("solver_max_sweeps"));
  return c;
}

ordered_json stats_json(const SummaryStats& s) {
  ordered_json j;
  j["count"] = s.count;
  j["median"] = s.median;
  j["q25"] = s.q25;
  j["q75"] = s.q75;
  j["whisker_low"] = s.whisker_low;
  j["whisker_high"] = s.whisker_high;
  j["outliers"] = s.outliers;
  return j;
}

std::string fmt_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string fmt_delta(double base, double v) {
  if (base == 0) return v == 0 ? "+0.0%" : "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.1f%%", (v - base) / base * 100.0);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace

void ExperimentSpec::validate() const {
  if (trials < 1) bad("trials", "must be at least 1");
  base.validate();
  std::set<std::string> names;
  for (const VariantSpec& v : effective_variants()) {
    if (v.name.empty()) bad("variants", "variant names must be non-empty");
    if (!names.insert(v.name).second)
      bad("variants", "duplicate variant name '" + v.name + "'");
    variant_config(v, 0).validate();
  }
}

std::vector<VariantSpec> ExperimentSpec::effective_variants() const {
  if (!variants.empty()) return variants;
  return {{"regular", {{"regular", base.n_leechers}}, -1},
          {"rl", {{"rl", base.n_leechers}}, -1}};
}

std::uint64_t ExperimentSpec::trial_seed(int trial) const {
  return mix_seed(master_seed, static_cast<std::uint64_t>(trial));
}

SwarmConfig ExperimentSpec::variant_config(const VariantSpec& variant,
                                           int trial) const {
  SwarmConfig c = base;
  c.strategy_mix = variant.strategy_mix;
  if (variant.n_freeriders >= 0) c.n_freeriders = variant.n_freeriders;
  c.rng_seed = trial_seed(trial);
  return c;
}

ExperimentSpec parse_experiment(const json& j) {
  if (!j.is_object()) bad("json", "top level must be an object");
  expect_keys(j, "", {"scenario", "trials", "master_seed", "out_dir", "config",
                      "variants"});
  ExperimentSpec s;
  if (j.contains("scenario")) s.scenario = get_string(j["scenario"], "scenario");
  if (j.contains("trials")) s.trials = get_int(j["trials"], "trials");
  if (j.contains("master_seed")) s.master_seed = get_u64(j["master_seed"], "master_seed");
  if (j.contains("out_dir")) s.out_dir = get_string(j["out_dir"], "out_dir");
  if (j.contains("config")) s.base = parse_swarm(j["config"], "config.");
  if (j.contains("variants")) {
    const json& arr = j["variants"];
    if (!arr.is_array()) bad("variants", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      std::string vp = "variants[" + std::to_string(i) + "].";
      const json& v = arr[i];
      if (!v.is_object()) bad(vp + "name", "expected an object");
      expect_keys(v, vp, {"name", "strategy_mix", "n_freeriders"});
      VariantSpec vs;
      if (!v.contains("name")) bad(vp + "name", "required");
      vs.name = get_string(v["name"], vp + "name");
      if (!v.contains("strategy_mix")) bad(vp + "strategy_mix", "required");
      vs.strategy_mix = get_mix(v["strategy_mix"], vp + "strategy_mix");
      if (v.contains("n_freeriders"))
        vs.n_freeriders = get_int(v["n_freeriders"], vp + "n_freeriders");
      s.variants.push_back(std::move(vs));
    }
  }
  s.validate();
  return s;
}

json load_raw_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("path", "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    bad("json", e.what());
  }
}

ExperimentSpec load_config(const std::string& path) {
  return parse_experiment(load_raw_config(path));
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    bad("override", "expected key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;  // unquoted strings stay strings
  }

  std::vector<std::string> segs;
  std::string seg;
  std::istringstream ss(path);
  while (std::getline(ss, seg, '.')) {
    if (seg.empty()) bad("override", "empty path segment in '" + path + "'");
    segs.push_back(seg);
  }
  if (segs.empty()) bad("override", "empty key in '" + assignment + "'");

  auto is_index = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
      return std::isdigit(c);
    });
  };

  json* cur = &j;
  for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
    const std::string& k = segs[i];
    if (cur->is_array()) {
      if (!is_index(k)) bad("override", "expected an array index at '" + k + "'");
      std::size_t idx = std::stoul(k);
      if (idx >= cur->size()) bad("override", "index " + k + " out of range");
      cur = &(*cur)[idx];
    } else {
      if (!cur->is_object() && !cur->is_null())
        bad("override", "cannot descend into '" + k + "'");
      cur = &(*cur)[k];
      if (cur->is_null()) *cur = json::object();
    }
  }
  const std::string& last = segs.back();
  if (cur->is_array()) {
    if (!is_index(last)) bad("override", "expected an array index at '" + last + "'");
    std::size_t idx = std::stoul(last);
    if (idx >= cur->size()) bad("override", "index " + last + " out of range");
    (*cur)[idx] = value;
  } else {
    if (!cur->is_object() && !cur->is_null())
      bad("override", "cannot descend into '" + last + "'");
    (*cur)[last] = value;
  }
}

ordered_json summarize_trial(const MetricsLedger& ledger) {
  auto contributing = [](const PeerMeta& m) {
    return m.strategy == StrategyKind::Regular || m.strategy == StrategyKind::Rl;
  };
  const std::set<std::uint32_t> top = top_capacity_lineages(ledger, 0.2);

  ordered_json m;
  m["end_tick"] = ledger.end_tick();
  m["completion"] = stats_json(completion_stats(ledger, contributing));
  m["completion_high_capacity"] = stats_json(
      completion_stats(ledger, [&](const PeerMeta& p) {
        return contributing(p) && top.count(p.lineage) > 0;
      }));
  m["completion_freeriders"] = stats_json(
      completion_stats(ledger, [](const PeerMeta& p) {
        return p.strategy == StrategyKind::FreeRider;
      }));
  m["mean_fluctuation"] = mean_fluctuation(ledger);
  m["top_capacity_unchoke_share"] = top_capacity_unchoke_share(ledger, 0.2);
  const FreeRiderExposure e = freerider_exposure(ledger);
  m["freerider_exposure"] =
      ordered_json{{"leecher_upload_share", e.leecher_upload_share},
                   {"from_leechers", e.from_leechers},
                   {"from_seeds", e.from_seeds}};
  return m;
}

ordered_json variant_summary(
    const std::string& scenario, const std::string& variant,
    const std::vector<ordered_json>& trial_summaries) {
  struct Scalar {
    const char* key;
    std::function<double(const ordered_json&)> get;
  };
  const std::vector<Scalar> scalars = {
      {"median_completion_ticks",
       [](const ordered_json& m) { return m.at("completion").at("median").get<double>(); }},
      {"high_capacity_completion_ticks",
       [](const ordered_json& m) {
         return m.at("completion_high_capacity").at("median").get<double>();
       }},
      {"freerider_completion_ticks",
       [](const ordered_json& m) {
         return m.at("completion_freeriders").at("median").get<double>();
       }},
      {"mean_fluctuation",
       [](const ordered_json& m) { return m.at("mean_fluctuation").get<double>(); }},
      {"top_capacity_unchoke_share",
       [](const ordered_json& m) {
         return m.at("top_capacity_unchoke_share").get<double>();
       }},
      {"freerider_upload_share",
       [](const ordered_json& m) {
         return m.at("freerider_exposure").at("leecher_upload_share").get<double>();
       }},
  };

  ordered_json out;
  out["scenario"] = scenario;
  out["variant"] = variant;
  out["trials"] = static_cast<int>(trial_summaries.size());
  ordered_json metrics;
  std::vector<ordered_json> per_trial(trial_summaries.size());
  for (const Scalar& sc : scalars) {
    std::vector<double> values;
    for (std::size_t i = 0; i < trial_summaries.size(); ++i) {
      const double v = sc.get(trial_summaries[i].at("metrics"));
      values.push_back(v);
      per_trial[i][sc.key] = v;
    }
    metrics[sc.key] = median_of(values);
  }
  out["metrics"] = metrics;
  out["per_trial"] = ordered_json::array();
  for (std::size_t i = 0; i < trial_summaries.size(); ++i) {
    ordered_json t;
    t["trial"] = trial_summaries[i].at("trial");
    t["seed"] = trial_summaries[i].at("seed");
    for (const Scalar& sc : scalars) t[sc.key] = per_trial[i][sc.key];
    out["per_trial"].push_back(t);
  }
  return out;
}

std::string compare_report(const std::vector<ordered_json>& variants) {
  if (variants.empty()) bad("variants", "nothing to compare");

  const std::string scenario = variants[0].at("scenario").get<std::string>();
  std::vector<std::string> keys;
  for (const auto& [k, v] : variants[0].at("metrics").items()) keys.push_back(k);

  for (const ordered_json& v : variants) {
    if (v.at("scenario").get<std::string>() != scenario)
      bad("scenario", "summaries describe different scenarios");
    std::vector<std::string> k2;
    for (const auto& [k, val] : v.at("metrics").items()) k2.push_back(k);
    if (k2 != keys) bad("metrics", "metric sets differ between summaries");
  }

  std::size_t name_w = std::string("metric").size();
  for (const std::string& k : keys) name_w = std::max(name_w, k.size());
  constexpr int kColW = 13;

  auto pad_left = [](const std::string& s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
  };
  auto pad_right = [](const std::string& s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
  };

  std::ostringstream out;
  out << "scenario: " << scenario << "\n";
  out << "trials per variant:";
  for (const ordered_json& v : variants) out << " " << v.at("trials").get<int>();
  out << "\n\n";

  out << pad_right("metric", name_w);
  for (const ordered_json& v : variants)
    out << pad_left(v.at("variant").get<std::string>(), kColW);
  for (std::size_t i = 1; i < variants.size(); ++i) {
    std::string h = variants.size() == 2
                        ? "change"
                        : "change:" + variants[i].at("variant").get<std::string>();
    out << pad_left(h, kColW);
  }
  out << "\n";

  for (const std::string& k : keys) {
    out << pad_right(k, name_w);
    const double base = variants[0].at("metrics").at(k).get<double>();
    for (const ordered_json& v : variants)
      out << pad_left(fmt_value(v.at("metrics").at(k).get<double>()), kColW);
    for (std::size_t i = 1; i < variants.size(); ++i)
      out << pad_left(
          fmt_delta(base, variants[i].at("metrics").at(k).get<double>()), kColW);
    out << "\n";
  }
  return out.str();
}

void run_experiment(const ExperimentSpec& spec, std::ostream& log) {
  spec.validate();
  const std::vector<VariantSpec> variants = spec.effective_variants();
  fs::create_directories(spec.out_dir);

  struct Job {
    int vi = 0;
    int trial = 0;
  };
  std::vector<Job> jobs;
  for (int vi = 0; vi < int(variants.size()); ++vi)
    for (int t = 0; t < spec.trials; ++t) jobs.push_back({vi, t});

  std::vector<MetricsLedger> ledgers(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> cursor{0};

  auto worker = [&] {
    for (std::size_t i; (i = cursor.fetch_add(1)) < jobs.size();) {
      const Job& job = jobs[i];
      try {
        const SwarmConfig cfg = spec.variant_config(variants[job.vi], job.trial);
        World w(cfg);
        try {
          while (w.now() < cfg.max_ticks && !w.initial_peers_done()) w.step();
        } catch (const std::exception& e) {
          throw std::runtime_error("variant '" + variants[job.vi].name +
                                   "' trial " + std::to_string(job.trial) +
                                   " failed at tick " + std::to_string(w.now()) +
                                   ": " + e.what());
        }
        ledgers[i] = w.take_ledger();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t pool =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()),
                            jobs.size());
  if (pool <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < pool; ++i) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  const fs::path out_dir(spec.out_dir);
  std::vector<ordered_json> variant_docs;
  for (int vi = 0; vi < int(variants.size()); ++vi) {
    std::vector<ordered_json> trial_docs;
    for (int t = 0; t < spec.trials; ++t) {
      const MetricsLedger& led = ledgers[std::size_t(vi) * spec.trials + t];
      const std::string stem = variants[vi].name + "_trial" + std::to_string(t);

      std::ostringstream transfers, peers;
      write_transfers_csv(led, transfers);
      write_peers_csv(led, peers);
      write_file(out_dir / (stem + "_transfers.csv"), transfers.str());
      write_file(out_dir / (stem + "_peers.csv"), peers.str());

      ordered_json doc;
      doc["scenario"] = spec.scenario;
      doc["variant"] = variants[vi].name;
      doc["trial"] = t;
      doc["seed"] = spec.trial_seed(t);
      doc["metrics"] = summarize_trial(led);
      write_file(out_dir / (stem + "_summary.json"), doc.dump(2) + "\n");

      log << stem << ": end_tick=" << led.end_tick()
          << " rows=" << led.rows.size() << "\n";
      trial_docs.push_back(std::move(doc));
    }
    ordered_json vs = variant_summary(spec.scenario, variants[vi].name, trial_docs);
    write_file(out_dir / (variants[vi].name + "_summary.json"), vs.dump(2) + "\n");
    variant_docs.push_back(std::move(vs));
  }

  const std::string report = compare_report(variant_docs);
  write_file(out_dir / "comparison.txt", report);
  log << "\n" << report;
}

}  // namespace rlswarm
