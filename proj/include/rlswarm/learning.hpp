#pragma once

// Per-peer reciprocation learning: smoothed upload-rate estimates with
// optimistic initialisation, an exponential penalty for peers that never
// answer an upload, and empirical transition statistics over the binary
// "is this peer uploading to me" state.

#include <cstdint>
#include <map>
#include <vector>

#include <rlswarm/types.hpp>

namespace rlswarm {

// 1 iff the observed rate strictly exceeds the threshold.
int binarize_state(double rate, double theta);

// Back-off factor 0.95^(2^n) applied after the n-th consecutive unanswered
// upload to a peer with no reciprocation history. Successive ratios
// f(n-1)/f(n) grow with n, so repeated silence hurts more and more.
double nonreciprocation_decay(int n);

struct RateEstimate {
  double estimate = 0;      // smoothed upload rate, bytes per tick
  bool has_history = false; // set once the peer has uploaded at least once
  int penalty_count = 0;    // consecutive unanswered uploads so far
};

// New peers are assumed to upload at the network-wide maximum rate until
// observed otherwise.
RateEstimate fresh_estimate(double l_max);

// estimate' = alpha*sample + (1-alpha)*estimate, clamped to [0, l_max].
// Marks the peer as having history and resets the penalty counter.
void update_rate_estimate(RateEstimate& est, double sample, double alpha,
                          double l_max);

// Applies the decay schedule to a peer that has never reciprocated.
// Calling this on a peer with history is a caller bug.
void penalize_no_reciprocation(RateEstimate& est, double l_max);

struct TripletCounts {
  std::uint32_t c[2][2][2] = {}; // [state][action][next state]
  std::uint32_t m[2] = {};       // observed next-state marginals
};

// Empirical (state, action, next-state) statistics per counterpart peer.
class TransitionTable {
 public:
  void record_triplet(PeerId peer, int s_prev, int action, int s_next);

  // Empirical frequency c[s][a][s']/row sum. Rows never observed use the
  // optimistic prior: unchoking yields state 1 surely, choking state 0.
  double transition_prob(PeerId peer, int s, int action, int s_next) const;

  // Marginal-weighted probability that the peer is uploading next period
  // given we unchoke it. 1 for peers never observed.
  double reciprocation_prob(PeerId peer) const;

  // Marginal probability of observing the peer in state 1; optimistic
  // prior 1 when nothing has been recorded.
  double state_one_prob(PeerId peer) const;

  const TripletCounts* counts(PeerId peer) const;
  void forget_peer(PeerId peer);

 private:
  std::map<PeerId, TripletCounts> rows_;
};

// Nearest-rank (lower) median; 0 for an empty list.
double median_of(std::vector<double> values);

}  // namespace rlswarm
