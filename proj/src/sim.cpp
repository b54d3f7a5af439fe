#include <rlswarm/sim.hpp>

#include <algorithm>
#include <bit>
#include <limits>
#include <stdexcept>

#include <rlswarm/random.hpp>

namespace rlswarm {

Bitfield::Bitfield(int n_pieces)
    : words_((n_pieces + 63) / 64, 0), n_pieces_(n_pieces) {}

bool Bitfield::has(int piece) const {
  return (words_[piece >> 6] >> (piece & 63)) & 1;
}

void Bitfield::set(int piece) {
  std::uint64_t bit = 1ull << (piece & 63);
  std::uint64_t& word = words_[piece >> 6];
  if (!(word & bit)) {
    word |= bit;
    ++count_;
  }
}

void Bitfield::fill() {
  for (int i = 0; i < n_pieces_; ++i) set(i);
}

void Bitfield::merge(const Bitfield& other) {
  count_ = 0;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    words_[i] |= other.words_[i];
    count_ += std::popcount(words_[i]);
  }
}

bool interest(const Bitfield& wanter, const Bitfield& holder) {
  const auto& h = holder.words();
  const auto& w = wanter.words();
  for (std::size_t i = 0; i < h.size(); ++i)
    if (h[i] & ~w[i]) return true;
  return false;
}

int pick_piece(const Bitfield& receiver, const Bitfield& sender,
               const std::vector<int>& availability) {
  int best = -1;
  int best_avail = std::numeric_limits<int>::max();
  const auto& s = sender.words();
  const auto& r = receiver.words();
  for (std::size_t w = 0; w < s.size(); ++w) {
    std::uint64_t cand = s[w] & ~r[w];
    while (cand) {
      int piece = int(w * 64) + std::countr_zero(cand);
      cand &= cand - 1;
      if (availability[piece] < best_avail) {
        best_avail = availability[piece];
        best = piece;
      }
    }
  }
  if (best < 0) throw std::logic_error("no piece eligible for selection");
  return best;
}

struct World::Peer {
  PeerId id = kNoPeer;
  std::uint32_t lineage = 0;
  Bytes capacity = 0;
  StrategyKind kind = StrategyKind::Regular;
  std::unique_ptr<PeerStrategy> strategy;
  Bitfield have;
  int in_flight = -1;   // piece currently being assembled, -1 if none
  Bytes progress = 0;   // bytes collected toward in_flight
  Bytes downloaded = 0; // lifetime bytes credited to this identity
  std::map<PeerId, Bytes> rx_prev;  // per sender, previous tick
  std::map<PeerId, Bytes> rx_now;
  std::map<PeerId, Bytes> tx_now;
  std::map<PeerId, int> streak;     // consecutive ticks each receiver stayed unchoked
  ChokeDecision decision;
  Tick join = 0;
  bool finished = false;
};

World::World(const SwarmConfig& config) : config_(config) {
  config_.validate();
  rng_.seed(config_.rng_seed);
  availability_.assign(config_.n_pieces(), 0);
  claimed_.assign(config_.n_pieces(), 0);
  l_max_bytes_ = config_.bytes_per_tick(config_.l_max);

  Bytes seed_total = config_.bytes_per_tick(config_.seed_capacity_total);
  for (int i = 0; i < config_.n_seeds; ++i) {
    Bytes cap = seed_total / Bytes(config_.n_seeds) +
                (Bytes(i) < seed_total % Bytes(config_.n_seeds) ? 1 : 0);
    spawn_peer(next_id_, cap, StrategyKind::Seed, i, 0);
  }

  // Capacities are assigned before strategies so that two runs differing
  // only in the strategy mix see identical populations. Buckets fill by
  // exact quota (largest remainder) rather than independent draws, so every
  // trial carries the same class counts; the shuffle only decides which
  // peer lands in which class.
  int extras = config_.n_leechers + config_.n_freeriders;
  std::vector<Bytes> caps;
  caps.reserve(extras);
  {
    const auto& dist = config_.capacity_distribution;
    std::vector<int> quota(dist.size());
    std::vector<std::pair<double, std::size_t>> frac;
    int assigned = 0;
    for (std::size_t b = 0; b < dist.size(); ++b) {
      double exact = dist[b].fraction * config_.n_leechers;
      quota[b] = int(exact);
      assigned += quota[b];
      frac.push_back({exact - quota[b], b});
    }
    std::stable_sort(frac.begin(), frac.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (int i = 0; assigned < config_.n_leechers; ++i, ++assigned)
      ++quota[frac[i % frac.size()].second];
    for (std::size_t b = 0; b < dist.size(); ++b)
      for (int i = 0; i < quota[b]; ++i)
        caps.push_back(config_.bytes_per_tick(dist[b].rate));
    std::shuffle(caps.begin(), caps.end(), rng_);
    caps.resize(extras, 0);  // free riders contribute nothing
  }

  auto mix = config_.effective_mix();
  int n_regular = mix.count("regular") ? mix.at("regular") : 0;
  for (int i = 0; i < extras; ++i) {
    StrategyKind kind = i >= config_.n_leechers ? StrategyKind::FreeRider
                        : i < n_regular        ? StrategyKind::Regular
                                               : StrategyKind::Rl;
    spawn_peer(next_id_, caps[i], kind, 0, 0);
  }
  initial_remaining_ = extras;
}

World::~World() = default;

int World::alive_count() const { return int(peers_.size()); }

const PeerStrategy* World::strategy_of(PeerId id) const {
  auto it = peers_.find(id);
  return it == peers_.end() ? nullptr : it->second->strategy.get();
}

std::unique_ptr<PeerStrategy> World::make_strategy(StrategyKind kind,
                                                   int seed_index) const {
  switch (kind) {
    case StrategyKind::Regular:
      return std::make_unique<RegularLeecher>(config_.regular_slots);
    case StrategyKind::Seed:
      return std::make_unique<SeedStrategy>(
          config_.seed_slots, std::size_t(seed_index) * config_.seed_slots);
    case StrategyKind::FreeRider:
      return std::make_unique<FreeRider>();
    case StrategyKind::Rl: {
      RlParams rp;
      rp.alpha = config_.alpha;
      rp.gamma = config_.gamma;
      rp.eps = config_.solver_eps;
      rp.max_sweeps = config_.solver_max_sweeps;
      rp.l_max = double(l_max_bytes_);
      rp.target_size = config_.target_size;
      rp.probe_size = config_.probe_size;
      rp.drop_size = config_.drop_size;
      rp.min_slots = config_.min_slots;
      rp.regular_slots = config_.regular_slots;
      return std::make_unique<RlLeecher>(rp);
    }
  }
  throw std::logic_error("unhandled strategy kind");
}

void World::spawn_peer(std::uint32_t lineage, Bytes capacity, StrategyKind kind,
                       int seed_index, Tick join) {
  auto p = std::make_unique<Peer>();
  p->id = next_id_++;
  p->lineage = lineage;
  p->capacity = capacity;
  p->kind = kind;
  p->strategy = make_strategy(kind, seed_index);
  p->have = Bitfield(config_.n_pieces());
  p->join = join;
  if (kind == StrategyKind::Seed) {
    p->have.fill();
    p->finished = true;
    for (auto& a : availability_) ++a;
  }

  PeerMeta meta;
  meta.id = p->id;
  meta.lineage = lineage;
  meta.capacity = double(capacity);
  meta.strategy = kind;
  meta.join_tick = join;
  meta.complete_tick = kind == StrategyKind::Seed ? 0 : kNever;
  meta_index_[p->id] = ledger_.peers.size();
  ledger_.peers.push_back(meta);
  peers_.emplace(p->id, std::move(p));
}

void World::remove_peer(PeerId id) {
  Peer& p = *peers_.at(id);
  for (int i = 0; i < p.have.size(); ++i)
    if (p.have.has(i)) --availability_[i];
  if (p.in_flight >= 0) --claimed_[p.in_flight];
  peers_.erase(id);
  for (auto& [oid, q] : peers_) {
    q->strategy->forget_peer(id);
    q->rx_prev.erase(id);
    q->streak.erase(id);
  }
}

void World::step() {
  run_decisions();
  run_transfers();
  run_pieces();
  run_learning();
  run_churn();
  ++tick_;
}

void World::run_decisions() {
  for (auto& [id, p] : peers_) {
    DecisionInput in;
    in.tick = tick_;
    in.capacity = double(p->capacity);
    in.peers.reserve(peers_.size() - 1);
    for (auto& [oid, q] : peers_) {
      if (oid == id) continue;
      PeerObservation ob;
      ob.id = oid;
      ob.interested_in_me = interest(q->have, p->have);
      ob.complete = q->have.full();
      auto it = p->rx_prev.find(oid);
      ob.received_last_tick = it == p->rx_prev.end() ? 0.0 : double(it->second);
      in.peers.push_back(ob);
    }
    p->decision = p->strategy->decide(in, rng_);
  }
}

void World::run_transfers() {
  for (auto& [id, p] : peers_) {
    p->rx_now.clear();
    p->tx_now.clear();
  }

  for (auto& [id, p] : peers_) {
    const auto& unchoked = p->decision.unchoked;

    std::map<PeerId, int> fresh;
    for (PeerId to : unchoked) {
      auto it = p->streak.find(to);
      fresh[to] = it == p->streak.end() ? 1 : it->second + 1;
    }
    p->streak = std::move(fresh);

    std::vector<Peer*> active;
    for (PeerId to : unchoked) {
      auto it = peers_.find(to);
      if (it == peers_.end()) continue;  // slot pointing at a departed peer
      if (interest(it->second->have, p->have)) active.push_back(it->second.get());
    }

    std::map<PeerId, Bytes> granted;
    if (!active.empty()) {
      Bytes base = p->capacity / active.size();
      Bytes rem = p->capacity % active.size();
      for (std::size_t i = 0; i < active.size(); ++i) {
        Peer& to = *active[i];
        Bytes share = base + (i < rem ? 1 : 0);
        Bytes ramp = Bytes(std::min(p->streak.at(to.id), 3));
        Bytes eff = share * ramp / 3;

        Bytes pending = 0;
        for (const auto& [sid, v] : to.rx_now) pending += v;
        Bytes got = to.downloaded + pending;
        Bytes need = got >= config_.file_size ? 0 : config_.file_size - got;
        eff = std::min(eff, need);

        to.rx_now[p->id] += eff;
        p->tx_now[to.id] += eff;
        granted[to.id] = eff;
      }
    }

    for (PeerId to : unchoked) {
      if (!peers_.count(to)) continue;
      auto it = granted.find(to);
      Bytes bytes = it == granted.end() ? 0 : it->second;
      ledger_.rows.push_back({tick_, p->id, to, bytes});
    }
  }
}

void World::run_pieces() {
  for (auto& [id, p] : peers_) {
    if (p->rx_now.empty()) continue;
    Bytes pool = 0;
    Bitfield senders(config_.n_pieces());
    for (const auto& [sid, bytes] : p->rx_now) {
      pool += bytes;
      if (bytes > 0) senders.merge(peers_.at(sid)->have);
    }
    if (pool == 0) continue;
    p->downloaded += pool;
    p->progress += pool;

    while (true) {
      if (p->in_flight < 0) {
        if (!interest(p->have, senders)) break;
        // Pieces other receivers are already assembling rank as more
        // available, so concurrent downloads spread across the file
        // instead of drafting the same piece in lockstep.
        std::vector<int> selection(availability_);
        for (std::size_t i = 0; i < selection.size(); ++i)
          selection[i] += claimed_[i];
        p->in_flight = pick_piece(p->have, senders, selection);
        ++claimed_[p->in_flight];
      }
      Bytes len = piece_length(p->in_flight);
      if (p->progress < len) break;
      p->progress -= len;
      p->have.set(p->in_flight);
      ++availability_[p->in_flight];
      --claimed_[p->in_flight];
      p->in_flight = -1;
    }
  }
}

void World::run_learning() {
  for (auto& [id, p] : peers_) {
    if (p->strategy->kind() != StrategyKind::Rl) continue;
    TickOutcome out;
    out.tick = tick_;
    out.traffic.reserve(peers_.size() - 1);
    for (auto& [oid, q] : peers_) {
      if (oid == id) continue;
      PeerTraffic t;
      t.id = oid;
      auto r = p->rx_now.find(oid);
      t.received = r == p->rx_now.end() ? 0.0 : double(r->second);
      auto s = p->tx_now.find(oid);
      t.sent = s == p->tx_now.end() ? 0.0 : double(s->second);
      t.complete = q->have.full();
      out.traffic.push_back(t);
    }
    p->strategy->observe(out);
  }
  for (auto& [id, p] : peers_) {
    p->rx_prev = std::move(p->rx_now);
    p->rx_now.clear();
  }
}

void World::run_churn() {
  std::vector<PeerId> done;
  for (auto& [id, p] : peers_)
    if (!p->finished && p->have.full()) done.push_back(id);

  for (PeerId id : done) {
    Peer& p = *peers_.at(id);
    p.finished = true;
    PeerMeta& meta = ledger_.peers[meta_index_.at(id)];
    meta.complete_tick = tick_;
    if (p.join == 0) --initial_remaining_;

    if (config_.churn_enabled) {
      std::uint32_t lineage = p.lineage;
      Bytes capacity = p.capacity;
      StrategyKind kind = p.kind;
      meta.leave_tick = tick_;
      remove_peer(id);
      spawn_peer(lineage, capacity, kind, 0, tick_);
    } else {
      // The finished leecher stays online and serves like a seed.
      p.strategy = std::make_unique<SeedStrategy>(config_.seed_slots, 0);
    }
  }
}

Bytes World::piece_length(int piece) const {
  Bytes start = Bytes(piece) * config_.piece_size;
  return std::min(config_.piece_size, config_.file_size - start);
}

MetricsLedger run_world(const SwarmConfig& config) {
  World w(config);
  while (w.now() < config.max_ticks && !w.initial_peers_done()) w.step();
  return w.take_ledger();
}

}  // namespace rlswarm
