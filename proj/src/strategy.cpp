#include <rlswarm/strategy.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <rlswarm/random.hpp>

namespace rlswarm {

namespace {

bool contains(const std::vector<PeerId>& v, PeerId id) {
  return std::find(v.begin(), v.end(), id) != v.end();
}

}  // namespace

ChokeDecision tft_select(const DecisionInput& in, int n_slots,
                         PeerId& optimistic, std::mt19937_64& rng) {
  ChokeDecision dec;
  dec.tick = in.tick;

  std::vector<const PeerObservation*> candidates;
  for (const PeerObservation& p : in.peers)
    if (p.interested_in_me) candidates.push_back(&p);
  std::sort(candidates.begin(), candidates.end(),
            [](const PeerObservation* a, const PeerObservation* b) {
              if (a->received_last_tick != b->received_last_tick)
                return a->received_last_tick > b->received_last_tick;
              return a->id < b->id;
            });

  const std::size_t top_k =
      std::min<std::size_t>(n_slots > 0 ? n_slots - 1 : 0, candidates.size());
  for (std::size_t i = 0; i < top_k; ++i) dec.unchoked.push_back(candidates[i]->id);

  std::vector<PeerId> eligible;
  for (std::size_t i = top_k; i < candidates.size(); ++i)
    eligible.push_back(candidates[i]->id);
  std::sort(eligible.begin(), eligible.end());

  if (eligible.empty()) {
    optimistic = kNoPeer;
  } else if (in.tick % 3 == 0 || !contains(eligible, optimistic)) {
    std::size_t pick = static_cast<std::size_t>(uniform01(rng) * eligible.size());
    if (pick >= eligible.size()) pick = eligible.size() - 1;
    optimistic = eligible[pick];
  }
  if (optimistic != kNoPeer) dec.unchoked.push_back(optimistic);

  std::sort(dec.unchoked.begin(), dec.unchoked.end());
  return dec;
}

ChokeDecision RegularLeecher::decide(const DecisionInput& in,
                                     std::mt19937_64& rng) {
  return tft_select(in, n_slots_, optimistic_, rng);
}

void RegularLeecher::forget_peer(PeerId id) {
  if (optimistic_ == id) optimistic_ = kNoPeer;
}

ChokeDecision SeedStrategy::decide(const DecisionInput& in, std::mt19937_64&) {
  ChokeDecision dec;
  dec.tick = in.tick;
  std::vector<PeerId> ring;
  for (const PeerObservation& p : in.peers)
    if (p.interested_in_me) ring.push_back(p.id);
  if (ring.empty()) return dec;
  std::sort(ring.begin(), ring.end());

  const std::size_t start = cursor_ % ring.size();
  const std::size_t take = std::min<std::size_t>(n_slots_, ring.size());
  for (std::size_t i = 0; i < take; ++i)
    dec.unchoked.push_back(ring[(start + i) % ring.size()]);
  // Advance one position, not a whole window: each target then stays
  // unchoked for n_slots consecutive ticks, long enough to climb the
  // new-transfer ramp instead of restarting it every tick.
  cursor_ = (start + 1) % ring.size();

  std::sort(dec.unchoked.begin(), dec.unchoked.end());
  return dec;
}

ChokeDecision FreeRider::decide(const DecisionInput& in, std::mt19937_64&) {
  return ChokeDecision{in.tick, {}};
}

bool phase_switch_check(const std::vector<int>& counts) {
  if (counts.size() < 6) return false;
  const std::size_t n = counts.size();
  const int older = counts[n - 6] - counts[n - 4];
  const int newer = counts[n - 3] - counts[n - 1];
  return older <= 1 && newer <= 1;
}

int rl_slot_count(double capacity, double median_rate, int lo, int hi) {
  if (median_rate <= 0) return hi;
  long long raw = std::llround(capacity / median_rate);
  if (raw < lo) return lo;
  if (raw > hi) return hi;
  return static_cast<int>(raw);
}

RlLeecher::RlLeecher(RlParams params) : params_(params) {
  if (params_.l_max <= 0)
    throw std::invalid_argument("rate ceiling l_max must be positive");
}

RateEstimate& RlLeecher::ensure_estimate(PeerId id) {
  auto it = estimates_.find(id);
  if (it == estimates_.end())
    it = estimates_.emplace(id, fresh_estimate(params_.l_max)).first;
  return it->second;
}

double RlLeecher::median_estimate(const std::vector<PeerId>& ids) const {
  // The going per-slot rate is the median of rates actually measured.
  // Optimistic initials and decayed never-senders would drag it to the
  // extremes, so only peers with receipt history count; with no history
  // yet, fall back to the ceiling.
  std::vector<double> values;
  values.reserve(ids.size());
  for (PeerId id : ids) {
    auto it = estimates_.find(id);
    if (it != estimates_.end() && it->second.has_history)
      values.push_back(it->second.estimate);
  }
  if (values.empty()) return params_.l_max;
  return median_of(std::move(values));
}

double RlLeecher::estimate_for(PeerId id) const {
  auto it = estimates_.find(id);
  return it != estimates_.end() ? it->second.estimate : params_.l_max;
}

double RlLeecher::current_theta() const {
  return policy_valid_ ? policy_theta_ : 0;
}

bool RlLeecher::rebuild_policy(
    const DecisionInput& in,
    const std::vector<const PeerObservation*>& candidates) {
  std::vector<ScoredPeer> scored;
  std::vector<PeerId> ids;
  scored.reserve(candidates.size());
  for (const PeerObservation* p : candidates) {
    const RateEstimate& est = ensure_estimate(p->id);
    double rate = est.estimate / params_.l_max;  // solver works on [0,1] rates
    double prob = table_.reciprocation_prob(p->id);
    scored.push_back(ScoredPeer{p->id, rate, prob, expected_reward(rate, prob)});
    ids.push_back(p->id);
  }

  ReductionParams rp;
  rp.target_size = params_.target_size;
  rp.probe_size = params_.probe_size;
  rp.drop_size = params_.drop_size;
  rp.gamma = params_.gamma;
  rp.eps = params_.eps;
  rp.max_sweeps = params_.max_sweeps;

  try {
    ReducedPeerSet reduced = reduce_peer_set(std::move(scored), rp, table_);
    // Split capacity into as many slots as the going per-partner rate
    // supports: high-capacity peers spread across more counterparts instead
    // of concentrating, which compresses per-slot rates across the swarm.
    const double median = median_estimate(ids);
    int slots = rl_slot_count(in.capacity, median, params_.min_slots,
                              params_.target_size);
    slots = std::min<int>(slots, static_cast<int>(reduced.members.size()));
    slots = std::max(slots, 1);

    MdpModel model = build_mdp(reduced, slots, table_);
    const std::vector<double>* warm =
        warm_members_ == model.members ? &warm_values_ : nullptr;
    Policy pol = value_iteration(model, params_.gamma, params_.eps,
                                 params_.max_sweeps, warm);
    pol.created_at = in.tick;
    pol.validity = params_.policy_validity;
    warm_members_ = pol.members;
    warm_values_ = pol.value;
    policy_ = std::move(pol);
    policy_theta_ = median;
    policy_slots_ = slots;
    policy_valid_ = true;
    return true;
  } catch (const NotConverged&) {
    return false;
  }
}

ChokeDecision RlLeecher::decide(const DecisionInput& in, std::mt19937_64& rng) {
  for (const PeerObservation& p : in.peers) ensure_estimate(p.id);

  ChokeDecision dec;
  if (!rl_phase_) {
    dec = tft_select(in, params_.regular_slots, optimistic_, rng);
  } else {
    std::vector<const PeerObservation*> candidates;
    for (const PeerObservation& p : in.peers)
      if (p.interested_in_me && !p.complete) candidates.push_back(&p);

    bool stale = !policy_valid_ ||
                 in.tick - policy_.created_at > policy_.validity;
    if (!stale) {
      for (PeerId member : policy_.members) {
        bool present = std::any_of(
            candidates.begin(), candidates.end(),
            [member](const PeerObservation* p) { return p->id == member; });
        if (!present) {
          stale = true;
          break;
        }
      }
    }
    if (stale && !candidates.empty()) {
      if (!rebuild_policy(in, candidates)) {
        ++fallback_count_;
        dec = last_decision_;
        dec.tick = in.tick;
        penult_decision_ = last_decision_;
        last_decision_ = dec;
        return dec;
      }
    }

    dec.tick = in.tick;
    if (policy_valid_ && !candidates.empty()) {
      std::vector<int> bits(policy_.members.size(), 0);
      for (std::size_t i = 0; i < policy_.members.size(); ++i) {
        for (const PeerObservation* p : candidates) {
          if (p->id == policy_.members[i]) {
            bits[i] = binarize_state(p->received_last_tick, policy_theta_);
            break;
          }
        }
      }
      auto action = policy_lookup(policy_, bits, in.tick);
      if (action) {
        for (std::size_t i = 0; i < policy_.members.size(); ++i)
          if ((*action >> i) & 1) dec.unchoked.push_back(policy_.members[i]);
        std::sort(dec.unchoked.begin(), dec.unchoked.end());
      } else {
        ++fallback_count_;
        dec.unchoked = last_decision_.unchoked;
      }
    }
  }

  penult_decision_ = last_decision_;
  last_decision_ = dec;
  return dec;
}

void RlLeecher::observe(const TickOutcome& out) {
  // Smooth receipts into the per-peer rate estimates; silence after an
  // upload decays the optimistic estimate of peers with no track record.
  for (const PeerTraffic& t : out.traffic) {
    RateEstimate& est = ensure_estimate(t.id);
    if (t.received > 0) {
      update_rate_estimate(est, t.received, params_.alpha, params_.l_max);
    } else if (t.sent > 0 && !est.has_history) {
      penalize_no_reciprocation(est, params_.l_max);
    }
  }

  // Record (state, action, next state) triplets against the threshold of
  // the median estimate. Scope: modeled peers plus anyone who uploaded in
  // either period of the triplet.
  std::vector<PeerId> incomplete;
  for (const PeerTraffic& t : out.traffic)
    if (!t.complete) incomplete.push_back(t.id);
  const double theta = median_estimate(incomplete);

  for (const PeerTraffic& t : out.traffic) {
    auto prev = prev_rx_.find(t.id);
    if (prev == prev_rx_.end()) continue;  // not associated last tick
    const bool modeled = policy_valid_ && contains(policy_.members, t.id);
    if (!modeled && prev->second <= 0 && t.received <= 0) continue;
    const int s_prev = binarize_state(prev->second, theta);
    const int action = contains(penult_decision_.unchoked, t.id) ? 1 : 0;
    const int s_next = binarize_state(t.received, theta);
    table_.record_triplet(t.id, s_prev, action, s_next);
  }

  prev_rx_.clear();
  for (const PeerTraffic& t : out.traffic) prev_rx_[t.id] = t.received;

  if (!rl_phase_) {
    int no_history = 0, incomplete = 0;
    for (const PeerTraffic& t : out.traffic)
      if (!t.complete) {
        ++incomplete;
        if (!ensure_estimate(t.id).has_history) ++no_history;
      }
    // A count that never started dropping has not stalled; hold off until
    // at least one counterpart has reciprocated, then watch for the plateau.
    if (no_history < incomplete) {
      no_history_counts_.push_back(no_history);
      if (no_history_counts_.size() > 6)
        no_history_counts_.erase(no_history_counts_.begin());
      if (phase_switch_check(no_history_counts_)) rl_phase_ = true;
    }
  }
}

void RlLeecher::forget_peer(PeerId id) {
  estimates_.erase(id);
  table_.forget_peer(id);
  prev_rx_.erase(id);
  if (optimistic_ == id) optimistic_ = kNoPeer;
  if (policy_valid_ && contains(policy_.members, id)) policy_valid_ = false;
  std::erase(last_decision_.unchoked, id);
  std::erase(penult_decision_.unchoked, id);
}

}  // namespace rlswarm
