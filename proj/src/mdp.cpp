#include <rlswarm/mdp.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>


namespace rlswarm {

double expected_reward(double rate, double recip_prob) {
  return rate * recip_prob;
}

ScoredPeer score_peer(PeerId id, const RateEstimate& est,
                      const TransitionTable& table) {
  double prob = table.reciprocation_prob(id);
  return ScoredPeer{id, est.estimate, prob, expected_reward(est.estimate, prob)};
}

double MdpModel::state_reward(std::uint32_t state) const {
  double r = 0;
  for (std::uint32_t bits = state; bits != 0; bits &= bits - 1)
    r += peer[std::countr_zero(bits)].rate;
  return r;
}

MdpModel build_mdp(const ReducedPeerSet& set, int n_unchoke,
                   const TransitionTable& table) {
  const int m = static_cast<int>(set.members.size());
  if (n_unchoke < 1 || n_unchoke > m)
    throw std::invalid_argument("unchoke slot count must be in [1, member count]");
  if (m > 20) throw std::invalid_argument("member count too large for exact solving");

  MdpModel model;
  model.n_unchoke = n_unchoke;
  model.members.reserve(m);
  model.peer.reserve(m);
  for (const ScoredPeer& sp : set.members) {
    model.members.push_back(sp.id);
    MemberModel mm;
    mm.rate = sp.estimate;
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) mm.p_one[s][a] = table.transition_prob(sp.id, s, a, 1);
    model.peer.push_back(mm);
  }
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask)
    if (std::popcount(mask) == n_unchoke) model.actions.push_back(mask);
  return model;
}

double joint_transition_prob(const MdpModel& model, std::uint32_t state,
                             std::uint32_t action_mask, std::uint32_t next) {
  double p = 1;
  for (std::size_t i = 0; i < model.members.size(); ++i) {
    double p1 = model.peer[i].p_one[(state >> i) & 1][(action_mask >> i) & 1];
    p *= ((next >> i) & 1) ? p1 : 1 - p1;
  }
  return p;
}

namespace {

// One Bellman sweep. Work[d] holds the expectation of W with the first d
// member axes contracted; axis d is contracted for both action bits while
// walking the action lattice depth-first, so shared action prefixes are
// computed once. At a leaf the buffer holds Q(s, mask) for every state s.
struct SweepWorkspace {
  std::vector<std::vector<double>> work;
  std::vector<double> w;       // R(s) + gamma V(s)
  std::vector<double> best_q;
  std::vector<std::uint32_t> best_mask;
  std::vector<double> reward;
};

void contract_axis(const MdpModel& model, int axis, int action_bit,
                   const std::vector<double>& in, std::vector<double>& out) {
  const std::size_t n = in.size();
  const std::size_t lo_mask = (std::size_t{1} << axis) - 1;
  const double q0 = model.peer[axis].p_one[0][action_bit];
  const double q1 = model.peer[axis].p_one[1][action_bit];
  for (std::size_t pair = 0; pair < n / 2; ++pair) {
    std::size_t x0 = ((pair & ~lo_mask) << 1) | (pair & lo_mask);
    std::size_t x1 = x0 | (std::size_t{1} << axis);
    double a = in[x0], b = in[x1];
    out[x0] = a + q0 * (b - a);
    out[x1] = a + q1 * (b - a);
  }
}

void walk_actions(const MdpModel& model, int depth, std::uint32_t mask,
                  int ones, SweepWorkspace& ws) {
  const int m = static_cast<int>(model.members.size());
  if (depth == m) {
    const std::vector<double>& q = ws.work[depth];
    for (std::size_t s = 0; s < q.size(); ++s) {
      if (q[s] > ws.best_q[s] ||
          (q[s] == ws.best_q[s] && mask < ws.best_mask[s])) {
        ws.best_q[s] = q[s];
        ws.best_mask[s] = mask;
      }
    }
    return;
  }
  const int remaining = m - depth;
  const int need = model.n_unchoke - ones;
  if (need < remaining) {  // feasible to leave this member choked
    contract_axis(model, depth, 0, ws.work[depth], ws.work[depth + 1]);
    walk_actions(model, depth + 1, mask, ones, ws);
  }
  if (need > 0) {  // feasible to grant this member a slot
    contract_axis(model, depth, 1, ws.work[depth], ws.work[depth + 1]);
    walk_actions(model, depth + 1, mask | (1u << depth), ones + 1, ws);
  }
}

}  // namespace

Policy value_iteration(const MdpModel& model, double gamma, double eps,
                       int max_sweeps, const std::vector<double>* warm_start) {
  if (gamma < 0 || gamma >= 1) throw std::invalid_argument("gamma must be in [0,1)");
  if (eps <= 0) throw std::invalid_argument("eps must be positive");
  const int m = static_cast<int>(model.members.size());
  const std::size_t n = std::size_t{1} << m;

  SweepWorkspace ws;
  ws.work.assign(m + 1, std::vector<double>(n));
  ws.w.resize(n);
  ws.best_q.resize(n);
  ws.best_mask.resize(n);
  ws.reward.resize(n);
  ws.reward[0] = 0;
  for (std::size_t s = 1; s < n; ++s) {
    std::uint32_t u = static_cast<std::uint32_t>(s);
    ws.reward[s] = ws.reward[s & (s - 1)] + model.peer[std::countr_zero(u)].rate;
  }

  // Seeding with the undiscounted-reward guess R/(1-gamma) lands much
  // closer to the fixpoint than zeros and cuts the sweep count roughly
  // in half; the converged policy is the same either way.
  std::vector<double> value(n);
  for (std::size_t s = 0; s < n; ++s) value[s] = ws.reward[s] / (1 - gamma);
  if (warm_start && warm_start->size() == n) value = *warm_start;

  double delta = 0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (std::size_t s = 0; s < n; ++s) ws.w[s] = ws.reward[s] + gamma * value[s];
    std::fill(ws.best_q.begin(), ws.best_q.end(), -1e300);
    std::fill(ws.best_mask.begin(), ws.best_mask.end(), ~0u);
    ws.work[0] = ws.w;
    walk_actions(model, 0, 0, 0, ws);

    delta = 0;
    for (std::size_t s = 0; s < n; ++s)
      delta = std::max(delta, std::fabs(ws.best_q[s] - value[s]));
    value = ws.best_q;
    if (delta < eps) {
      Policy pol;
      pol.members = model.members;
      pol.action = ws.best_mask;
      pol.value = std::move(value);
      return pol;
    }
  }
  throw NotConverged(delta, max_sweeps);
}

std::optional<std::uint32_t> policy_lookup(const Policy& policy,
                                           const std::vector<int>& state_bits,
                                           Tick now) {
  if (state_bits.size() != policy.members.size())
    throw std::logic_error("observed state length does not match policy members");
  if (now - policy.created_at > policy.validity) return std::nullopt;
  std::uint32_t index = 0;
  for (std::size_t i = 0; i < state_bits.size(); ++i)
    if (state_bits[i]) index |= 1u << i;
  return policy.action[index];
}

ReducedPeerSet reduce_peer_set(std::vector<ScoredPeer> candidates,
                               const ReductionParams& params,
                               const TransitionTable& table) {
  if (params.target_size < 1 || params.probe_size <= params.drop_size ||
      params.drop_size < 1)
    throw std::invalid_argument("reduction needs target >= 1 and probe > drop >= 1");

  // Probe groups are drawn from the low end of the estimated-rate order.
  // Ranking on the raw rate estimate, not the reciprocation-weighted score,
  // keeps a briefly unresponsive fast peer out of the chopping block: its
  // estimate decays slowly even while its observed cooperation is poor, so
  // it stays in the kept set long enough to be re-courted.
  std::sort(candidates.begin(), candidates.end(),
            [](const ScoredPeer& a, const ScoredPeer& b) {
              return a.estimate != b.estimate ? a.estimate < b.estimate
                                              : a.id < b.id;
            });

  while (candidates.size() > static_cast<std::size_t>(params.target_size)) {
    const int g_n = std::min<std::size_t>(params.probe_size, candidates.size());
    ReducedPeerSet probe;
    probe.members.assign(candidates.begin(), candidates.begin() + g_n);
    const int probe_slots = std::max(1, g_n - params.drop_size);
    MdpModel model = build_mdp(probe, probe_slots, table);
    Policy pol = value_iteration(model, params.gamma, params.eps, params.max_sweeps);

    // Long-run chance each probe member gets a slot: policy action mass
    // under the factorized per-member state marginals.
    std::vector<double> marginal(g_n);
    for (int i = 0; i < g_n; ++i) marginal[i] = table.state_one_prob(probe.members[i].id);
    std::vector<double> slot_prob(g_n, 0.0);
    for (std::uint32_t s = 0; s < (1u << g_n); ++s) {
      double mass = 1;
      for (int i = 0; i < g_n; ++i)
        mass *= ((s >> i) & 1) ? marginal[i] : 1 - marginal[i];
      if (mass == 0) continue;
      for (std::uint32_t bits = pol.action[s]; bits != 0; bits &= bits - 1)
        slot_prob[std::countr_zero(bits)] += mass;
    }

    std::vector<int> order(g_n);
    for (int i = 0; i < g_n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (slot_prob[a] != slot_prob[b]) return slot_prob[a] < slot_prob[b];
      return probe.members[a].id < probe.members[b].id;
    });

    const std::size_t n_remove = std::min<std::size_t>(
        params.drop_size, candidates.size() - params.target_size);
    std::vector<PeerId> victims;
    for (std::size_t i = 0; i < n_remove; ++i)
      victims.push_back(probe.members[order[i]].id);
    std::erase_if(candidates, [&](const ScoredPeer& sp) {
      return std::find(victims.begin(), victims.end(), sp.id) != victims.end();
    });
  }
  return ReducedPeerSet{std::move(candidates)};
}

}  // namespace rlswarm
