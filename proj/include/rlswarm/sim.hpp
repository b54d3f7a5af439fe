#pragma once

// Discrete-time swarm engine. Each tick runs five phases in a fixed order:
// choking decisions, byte transfers, piece acquisition, learning updates,
// and churn. All state changes are driven by one generator, so a config
// plus a seed reproduces a run byte for byte.

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <vector>

#include <rlswarm/config.hpp>
#include <rlswarm/metrics.hpp>
#include <rlswarm/strategy.hpp>
#include <rlswarm/types.hpp>

namespace rlswarm {

// Piece ownership as a packed bitset with a cached count.
class Bitfield {
 public:
  Bitfield() = default;
  explicit Bitfield(int n_pieces);

  bool has(int piece) const;
  void set(int piece);
  bool full() const { return count_ == n_pieces_; }
  int count() const { return count_; }
  int size() const { return n_pieces_; }
  void fill();
  void merge(const Bitfield& other);  // bitwise union

  const std::vector<std::uint64_t>& words() const { return words_; }

 private:
  std::vector<std::uint64_t> words_;
  int n_pieces_ = 0;
  int count_ = 0;
};

// True when `holder` owns at least one piece that `wanter` lacks.
bool interest(const Bitfield& wanter, const Bitfield& holder);

// Rarest-first selection among pieces the receiver lacks and the sender
// holds: lowest availability wins, ties go to the lowest index. Calling
// this with no eligible piece is a programming error.
int pick_piece(const Bitfield& receiver, const Bitfield& sender,
               const std::vector<int>& availability);

class World {
 public:
  explicit World(const SwarmConfig& config);
  ~World();

  World(const World&) = delete;
  World& operator=(const World&) = delete;

  void step();
  Tick now() const { return tick_; }

  // All peers created at tick 0 (other than seeds) have finished their
  // first download.
  bool initial_peers_done() const { return initial_remaining_ == 0; }

  const MetricsLedger& ledger() const { return ledger_; }
  MetricsLedger take_ledger() { return std::move(ledger_); }

  int alive_count() const;

  // The live strategy instance for a peer, or null if it is not present.
  const PeerStrategy* strategy_of(PeerId id) const;

 private:
  struct Peer;

  std::unique_ptr<PeerStrategy> make_strategy(StrategyKind kind,
                                              int seed_index) const;
  void spawn_peer(std::uint32_t lineage, Bytes capacity, StrategyKind kind,
                  int seed_index, Tick join);
  void remove_peer(PeerId id);
  void run_decisions();
  void run_transfers();
  void run_pieces();
  void run_learning();
  void run_churn();
  Bytes piece_length(int piece) const;

  SwarmConfig config_;
  std::mt19937_64 rng_;
  Tick tick_ = 0;
  PeerId next_id_ = 0;
  std::map<PeerId, std::unique_ptr<Peer>> peers_;
  std::vector<int> availability_;  // completed copies per piece
  std::vector<int> claimed_;       // receivers currently assembling each piece
  MetricsLedger ledger_;
  std::map<PeerId, std::size_t> meta_index_;
  int initial_remaining_ = 0;
  Bytes l_max_bytes_ = 0;
};

// Runs a world until every tick-0 leecher has completed once, or until
// max_ticks, and returns the recorded ledger.
MetricsLedger run_world(const SwarmConfig& config);

}  // namespace rlswarm
