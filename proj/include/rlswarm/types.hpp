#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace rlswarm {

using PeerId = std::uint32_t;
using Tick = std::int64_t;
using Bytes = std::uint64_t;

inline constexpr PeerId kNoPeer = std::numeric_limits<PeerId>::max();
inline constexpr Tick kNever = -1;

enum class StrategyKind { Regular, Seed, FreeRider, Rl };

// Stable names used in config files and CSV metadata.
const char* strategy_name(StrategyKind kind);
bool strategy_from_name(const std::string& name, StrategyKind& out);

// Raised when a configuration value fails validation. Carries the field name
// so the CLI can point at the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Raised when the value-iteration sweep cap is hit before the sup-norm
// change drops below eps. Carries the last residual for diagnostics.
class NotConverged : public std::runtime_error {
 public:
  NotConverged(double residual, int sweeps)
      : std::runtime_error("value iteration did not converge after " +
                           std::to_string(sweeps) +
                           " sweeps; residual = " + std::to_string(residual)),
        residual_(residual),
        sweeps_(sweeps) {}
  double residual() const { return residual_; }
  int sweeps() const { return sweeps_; }

 private:
  double residual_;
  int sweeps_;
};

}  // namespace rlswarm
