#pragma once

// Swarm scenario description: population, capacities, file layout, and the
// learning constants. Rates in config files are KB/s; the engine converts
// them to whole bytes per tick using the rechoke period.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <rlswarm/types.hpp>

namespace rlswarm {

struct CapacityBucket {
  double rate = 0;      // KB/s
  double fraction = 0;  // share of leechers drawn from this bucket
};

struct SwarmConfig {
  int n_leechers = 50;  // contributing leechers; free riders come on top
  int n_seeds = 2;
  double seed_capacity_total = 64;  // KB/s across all seeds
  std::vector<CapacityBucket> capacity_distribution = {
      {2, 0.2}, {3, 0.2}, {4, 0.2}, {6, 0.2}, {8, 0.2}};
  Bytes file_size = 20ull * 1024 * 1024;
  Bytes piece_size = 128ull * 1024;
  double rechoke_period = 10;  // seconds represented by one tick
  std::map<std::string, int> strategy_mix;  // empty means all regular
  int n_freeriders = 0;
  bool churn_enabled = true;
  std::uint64_t rng_seed = 1;
  int max_ticks = 3000;
  // KB/s ceiling for the rate one counterpart can deliver. Rates are per
  // unchoke slot, and slot counts scale with capacity, so this sits just
  // above the fastest realistic per-slot rate rather than at any peer's
  // whole capacity. Keeping it near that rate stops optimistic initial
  // estimates from outranking every measured counterpart.
  double l_max = 1.2;

  double alpha = 0.5;
  double gamma = 0.9;
  int target_size = 7;
  int probe_size = 4;
  int drop_size = 2;
  std::string theta_mode = "median";
  int min_slots = 4;
  int regular_slots = 4;
  int seed_slots = 12;
  double solver_eps = 1e-6;
  int solver_max_sweeps = 1000;

  // Throws ConfigError naming the offending field.
  void validate() const;

  Bytes bytes_per_tick(double kbs) const;
  int n_pieces() const;

  // The mix with the all-regular default applied.
  std::map<std::string, int> effective_mix() const;
};

}  // namespace rlswarm
