#pragma once

// Per-peer choking strategies: the classic rate-based leecher, the seed's
// round-robin rotation, the silent free rider, and the learning leecher
// that models its counterparts and solves for an unchoke policy.

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include <rlswarm/learning.hpp>
#include <rlswarm/mdp.hpp>
#include <rlswarm/types.hpp>

namespace rlswarm {

struct PeerObservation {
  PeerId id = kNoPeer;
  bool interested_in_me = false;   // wants at least one piece I hold
  bool complete = false;           // holds the whole file
  double received_last_tick = 0;   // bytes they sent me in the previous tick
};

struct DecisionInput {
  Tick tick = 0;
  double capacity = 0;  // my upload budget per tick
  std::vector<PeerObservation> peers;
};

struct ChokeDecision {
  Tick tick = 0;
  std::vector<PeerId> unchoked;  // ascending, no duplicates
};

struct PeerTraffic {
  PeerId id = kNoPeer;
  double received = 0;  // bytes they sent me this tick
  double sent = 0;      // bytes I sent them this tick
  bool complete = false;
};

struct TickOutcome {
  Tick tick = 0;
  std::vector<PeerTraffic> traffic;  // every associated peer, exchanged or not
};

class PeerStrategy {
 public:
  virtual ~PeerStrategy() = default;
  virtual ChokeDecision decide(const DecisionInput& in, std::mt19937_64& rng) = 0;
  virtual void observe(const TickOutcome&) {}
  virtual void forget_peer(PeerId) {}
  virtual StrategyKind kind() const = 0;
};

// Rate-ordered selection with one rotating optimistic slot: the top
// (n_slots - 1) peers by last-tick receipts, ties by identifier, plus one
// peer drawn uniformly from the interested remainder. The optimistic pick
// is redrawn on every third tick or when it stops being eligible.
// `optimistic` carries the current pick between calls.
ChokeDecision tft_select(const DecisionInput& in, int n_slots,
                         PeerId& optimistic, std::mt19937_64& rng);

class RegularLeecher : public PeerStrategy {
 public:
  explicit RegularLeecher(int n_slots = 4) : n_slots_(n_slots) {}
  ChokeDecision decide(const DecisionInput& in, std::mt19937_64& rng) override;
  void forget_peer(PeerId id) override;
  StrategyKind kind() const override { return StrategyKind::Regular; }

 private:
  int n_slots_;
  PeerId optimistic_ = kNoPeer;
};

class SeedStrategy : public PeerStrategy {
 public:
  explicit SeedStrategy(int n_slots = 4, std::size_t initial_cursor = 0)
      : n_slots_(n_slots), cursor_(initial_cursor) {}
  ChokeDecision decide(const DecisionInput& in, std::mt19937_64& rng) override;
  StrategyKind kind() const override { return StrategyKind::Seed; }

 private:
  int n_slots_;
  std::size_t cursor_;  // position in the identifier-sorted ring
};

class FreeRider : public PeerStrategy {
 public:
  ChokeDecision decide(const DecisionInput& in, std::mt19937_64& rng) override;
  StrategyKind kind() const override { return StrategyKind::FreeRider; }
};

// True when peer discovery has stalled: over each of the last two disjoint
// three-tick windows the count of peers without reciprocation history
// dropped by at most one. False until six counts exist.
bool phase_switch_check(const std::vector<int>& no_history_counts);

// Unchoke slots for the learning phase: capacity over the median peer rate,
// clamped to [lo, hi]. An unknown (zero) median yields hi.
int rl_slot_count(double capacity, double median_rate, int lo, int hi);

struct RlParams {
  double alpha = 0.5;      // smoothing factor for rate estimates
  double gamma = 0.9;      // discount for the policy objective
  double eps = 1e-6;       // solver convergence threshold
  int max_sweeps = 1000;
  double l_max = 0;        // rate ceiling; must be positive
  int target_size = 7;     // modeled peer-set size
  int probe_size = 4;      // reduction probe group
  int drop_size = 2;       // peers dropped per reduction round
  int min_slots = 4;
  int policy_validity = 3; // extra ticks a solved policy stays usable
  int regular_slots = 4;   // slots while still in the bootstrap phase
};

// Two-phase leecher: bootstraps with regular rate-based choking while it
// gathers reciprocation history, then switches permanently to policy-driven
// selection over a reduced peer set. All learned state lives here.
class RlLeecher : public PeerStrategy {
 public:
  explicit RlLeecher(RlParams params);
  ChokeDecision decide(const DecisionInput& in, std::mt19937_64& rng) override;
  void observe(const TickOutcome& out) override;
  void forget_peer(PeerId id) override;
  StrategyKind kind() const override { return StrategyKind::Rl; }

  bool in_rl_phase() const { return rl_phase_; }
  int fallback_count() const { return fallback_count_; }
  double estimate_for(PeerId id) const;
  double current_theta() const;

 private:
  RateEstimate& ensure_estimate(PeerId id);
  double median_estimate(const std::vector<PeerId>& ids) const;
  bool rebuild_policy(const DecisionInput& in,
                      const std::vector<const PeerObservation*>& candidates);

  RlParams params_;
  std::map<PeerId, RateEstimate> estimates_;
  TransitionTable table_;

  bool rl_phase_ = false;
  std::vector<int> no_history_counts_;  // most recent last, capped at six

  PeerId optimistic_ = kNoPeer;  // bootstrap-phase optimistic slot

  Policy policy_;
  bool policy_valid_ = false;
  double policy_theta_ = 0;
  int policy_slots_ = 0;

  std::vector<PeerId> warm_members_;
  std::vector<double> warm_values_;

  ChokeDecision last_decision_;    // decision made this tick
  ChokeDecision penult_decision_;  // decision made the tick before
  std::map<PeerId, double> prev_rx_;
  int fallback_count_ = 0;
};

}  // namespace rlswarm
