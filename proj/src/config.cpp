#include <rlswarm/config.hpp>

#include <cmath>
#include <set>

namespace rlswarm {

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError(field, what);
}

}  // namespace

void SwarmConfig::validate() const {
  if (n_leechers < 0) fail("n_leechers", "must be non-negative");
  if (n_seeds < 0) fail("n_seeds", "must be non-negative");
  if (seed_capacity_total < 0) fail("seed_capacity_total", "must be non-negative");

  if (capacity_distribution.empty())
    fail("capacity_distribution", "needs at least one bucket");
  double total = 0;
  for (const auto& b : capacity_distribution) {
    if (b.rate < 0) fail("capacity_distribution", "bucket rate must be non-negative");
    if (b.fraction < 0) fail("capacity_distribution", "bucket fraction must be non-negative");
    total += b.fraction;
  }
  if (std::abs(total - 1.0) > 1e-9)
    fail("capacity_distribution", "bucket fractions must sum to 1");

  if (file_size == 0) fail("file_size", "must be positive");
  if (piece_size == 0) fail("piece_size", "must be positive");
  if (!(rechoke_period > 0)) fail("rechoke_period", "must be positive");

  if (!strategy_mix.empty()) {
    static const std::set<std::string> allowed = {"regular", "rl"};
    int sum = 0;
    for (const auto& [name, count] : strategy_mix) {
      if (!allowed.count(name))
        fail("strategy_mix", "unknown strategy '" + name + "'");
      if (count < 0) fail("strategy_mix", "counts must be non-negative");
      sum += count;
    }
    if (sum != n_leechers)
      fail("strategy_mix", "counts must sum to n_leechers");
  }

  if (n_freeriders < 0) fail("n_freeriders", "must be non-negative");
  if (max_ticks < 1) fail("max_ticks", "must be positive");
  if (!(l_max > 0)) fail("l_max", "must be positive");

  if (!(alpha > 0) || alpha > 1) fail("alpha", "must be in (0, 1]");
  if (!(gamma >= 0) || gamma >= 1) fail("gamma", "must be in [0, 1)");
  if (target_size < 1) fail("target_size", "must be positive");
  if (drop_size < 1) fail("drop_size", "must be positive");
  if (probe_size <= drop_size)
    fail("probe_size", "must exceed drop_size");
  if (theta_mode != "median")
    fail("theta_mode", "unsupported mode '" + theta_mode + "'");
  if (min_slots < 1 || min_slots > target_size)
    fail("min_slots", "must be in [1, target_size]");
  if (regular_slots < 1) fail("regular_slots", "must be positive");
  if (seed_slots < 1) fail("seed_slots", "must be positive");
  if (!(solver_eps > 0)) fail("solver_eps", "must be positive");
  if (solver_max_sweeps < 1) fail("solver_max_sweeps", "must be positive");
}

Bytes SwarmConfig::bytes_per_tick(double kbs) const {
  return static_cast<Bytes>(std::llround(kbs * 1024.0 * rechoke_period));
}

int SwarmConfig::n_pieces() const {
  return static_cast<int>((file_size + piece_size - 1) / piece_size);
}

std::map<std::string, int> SwarmConfig::effective_mix() const {
  if (!strategy_mix.empty()) return strategy_mix;
  return {{"regular", n_leechers}};
}

}  // namespace rlswarm
