#include <rlswarm/learning.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlswarm {

int binarize_state(double rate, double theta) { return rate > theta ? 1 : 0; }

double nonreciprocation_decay(int n) {
  return std::pow(0.95, std::exp2(static_cast<double>(n)));
}

RateEstimate fresh_estimate(double l_max) {
  return RateEstimate{l_max, false, 0};
}

void update_rate_estimate(RateEstimate& est, double sample, double alpha,
                          double l_max) {
  if (sample < 0) throw std::invalid_argument("negative rate sample");
  est.estimate = alpha * sample + (1 - alpha) * est.estimate;
  est.estimate = std::clamp(est.estimate, 0.0, l_max);
  est.has_history = true;
  est.penalty_count = 0;
}

void penalize_no_reciprocation(RateEstimate& est, double l_max) {
  if (est.has_history)
    throw std::logic_error("decay penalty applies only to peers without history");
  est.penalty_count += 1;
  est.estimate = nonreciprocation_decay(est.penalty_count) * l_max;
}

void TransitionTable::record_triplet(PeerId peer, int s_prev, int action,
                                     int s_next) {
  TripletCounts& tc = rows_[peer];
  tc.c[s_prev][action][s_next] += 1;
  tc.m[s_next] += 1;
}

double TransitionTable::transition_prob(PeerId peer, int s, int action,
                                        int s_next) const {
  auto it = rows_.find(peer);
  if (it != rows_.end()) {
    const TripletCounts& tc = it->second;
    std::uint32_t denom = tc.c[s][action][0] + tc.c[s][action][1];
    if (denom > 0)
      return static_cast<double>(tc.c[s][action][s_next]) / denom;
  }
  // Optimistic prior: unchoke leads to reciprocation, choke to silence.
  int predicted = action == 1 ? 1 : 0;
  return s_next == predicted ? 1.0 : 0.0;
}

double TransitionTable::reciprocation_prob(PeerId peer) const {
  auto it = rows_.find(peer);
  if (it == rows_.end()) return 1.0;
  const TripletCounts& tc = it->second;
  std::uint64_t total = static_cast<std::uint64_t>(tc.m[0]) + tc.m[1];
  if (total == 0) return 1.0;
  double p = 0;
  for (int s = 0; s < 2; ++s) {
    double w = static_cast<double>(tc.m[s]) / static_cast<double>(total);
    p += w * transition_prob(peer, s, 1, 1);
  }
  return p;
}

double TransitionTable::state_one_prob(PeerId peer) const {
  auto it = rows_.find(peer);
  if (it == rows_.end()) return 1.0;
  const TripletCounts& tc = it->second;
  std::uint64_t total = static_cast<std::uint64_t>(tc.m[0]) + tc.m[1];
  if (total == 0) return 1.0;
  return static_cast<double>(tc.m[1]) / static_cast<double>(total);
}

const TripletCounts* TransitionTable::counts(PeerId peer) const {
  auto it = rows_.find(peer);
  return it == rows_.end() ? nullptr : &it->second;
}

void TransitionTable::forget_peer(PeerId peer) { rows_.erase(peer); }

double median_of(std::vector<double> values) {
  if (values.empty()) return 0;
  std::size_t k = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + k, values.end());
  return values[k];
}

}  // namespace rlswarm
