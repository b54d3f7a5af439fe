#pragma once

// Per-peer decision model over a small set of counterpart peers: candidate
// scoring, probe-based peer-set reduction, model assembly from learned
// statistics, and an iterative solver for the discounted objective.
//
// States and actions are bitmasks; bit i refers to the i-th member of the
// model's member list. An action bit grants that member an unchoke slot.

#include <cstdint>
#include <optional>
#include <vector>

#include <rlswarm/learning.hpp>
#include <rlswarm/types.hpp>

namespace rlswarm {

// Expected next-period payoff of unchoking a peer: rate times the
// probability it answers.
double expected_reward(double rate, double recip_prob);

struct ScoredPeer {
  PeerId id = kNoPeer;
  double estimate = 0;    // smoothed upload rate
  double recip_prob = 1;  // probability of reciprocation when unchoked
  double score = 0;       // estimate * recip_prob
};

ScoredPeer score_peer(PeerId id, const RateEstimate& est,
                      const TransitionTable& table);

// Candidate set after reduction; ordered by ascending score, ties by
// ascending identifier.
struct ReducedPeerSet {
  std::vector<ScoredPeer> members;
};

struct ReductionParams {
  int target_size = 7;  // final member count when enough candidates exist
  int probe_size = 4;   // lowest-estimate group examined per iteration
  int drop_size = 2;    // members removed per iteration
  double gamma = 0.9;
  double eps = 1e-6;
  int max_sweeps = 1000;
};

// Iteratively discards the candidates a probe policy is least likely to
// unchoke until at most target_size remain.
ReducedPeerSet reduce_peer_set(std::vector<ScoredPeer> candidates,
                               const ReductionParams& params,
                               const TransitionTable& table);

struct MemberModel {
  double p_one[2][2] = {{0, 1}, {0, 1}};  // Pr(next state 1 | state, action)
  double rate = 0;                        // reward when the member is in state 1
};

struct MdpModel {
  std::vector<PeerId> members;
  std::vector<MemberModel> peer;
  int n_unchoke = 0;
  std::vector<std::uint32_t> actions;  // ascending masks, popcount == n_unchoke

  int n_states() const { return 1 << members.size(); }
  double state_reward(std::uint32_t state) const;
};

// Assembles the model for a reduced set: per-member transition rows from the
// table (with optimistic priors) and rewards from the smoothed rates.
MdpModel build_mdp(const ReducedPeerSet& set, int n_unchoke,
                   const TransitionTable& table);

// Product of per-member rows; the joint chance of moving from `state` to
// `next` under `action_mask`.
double joint_transition_prob(const MdpModel& model, std::uint32_t state,
                             std::uint32_t action_mask, std::uint32_t next);

struct Policy {
  std::vector<PeerId> members;
  std::vector<std::uint32_t> action;  // per state: unchoke mask over members
  std::vector<double> value;
  Tick created_at = 0;
  int validity = 3;  // extra ticks the policy may be reused
};

// Sweeps V'(s) = max_a E[R(s') + gamma V(s')] until the sup-norm change
// drops below eps. Ties pick the smallest action mask. Throws NotConverged
// if the sweep cap is reached first. An optional warm start reuses a value
// vector from an earlier solve of the same member list.
Policy value_iteration(const MdpModel& model, double gamma, double eps,
                       int max_sweeps = 1000,
                       const std::vector<double>* warm_start = nullptr);

// Returns the stored action for the observed per-member bits, or nothing if
// the policy has outlived its validity window.
std::optional<std::uint32_t> policy_lookup(const Policy& policy,
                                           const std::vector<int>& state_bits,
                                           Tick now);

}  // namespace rlswarm
