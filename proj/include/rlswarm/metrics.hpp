#pragma once

// Post-run analysis over the transfer ledger: completion-time summaries,
// selection-churn averages, capacity clustering, fairness points, and
// free-rider exposure, plus the CSV forms the CLI writes and replays.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <set>
#include <vector>

#include <rlswarm/types.hpp>

namespace rlswarm {

// One unchoke grant for one tick. A zero-byte row still records that the
// slot was granted, so unchoke sets are recoverable from the ledger.
struct TransferRow {
  Tick tick = 0;
  PeerId from = kNoPeer;
  PeerId to = kNoPeer;
  Bytes bytes = 0;
};

struct PeerMeta {
  PeerId id = kNoPeer;
  std::uint32_t lineage = 0;  // stable across leave-and-rejoin
  double capacity = 0;        // upload budget, bytes per tick
  StrategyKind strategy = StrategyKind::Regular;
  Tick join_tick = 0;
  Tick complete_tick = kNever;
  Tick leave_tick = kNever;
};

struct MetricsLedger {
  std::vector<TransferRow> rows;  // appended in (tick, from, to) order
  std::vector<PeerMeta> peers;

  // Last simulated tick, taken from the final row (rows are tick-ordered).
  Tick end_tick() const { return rows.empty() ? 0 : rows.back().tick; }
};

struct SummaryStats {
  int count = 0;
  double median = 0;
  double q25 = 0;
  double q75 = 0;
  double whisker_low = 0;   // smallest value above the 1.5 IQR fence
  double whisker_high = 0;  // largest value below the 1.5 IQR fence
  std::vector<double> outliers;
};

// Nearest-rank five-number summary; an empty input yields count 0.
SummaryStats summarize(std::vector<double> values);

// Selection churn between two consecutive unchoke sets (sorted vectors):
// the larger one-sided difference, so a swap counts once.
int fluctuation_count(const std::vector<PeerId>& prev,
                      const std::vector<PeerId>& cur);

using PeerFilter = std::function<bool(const PeerMeta&)>;

// Five-number summary of first-lifetime completion times (complete minus
// join, earliest identity per lineage) over peers passing the filter.
SummaryStats completion_stats(const MetricsLedger& ledger,
                              const PeerFilter& filter);

// Mean unchoke-set change per tick, averaged per contributing leecher over
// its lifetime and then across leechers. Seeds and free riders are not
// selection-churn subjects and are excluded.
double mean_fluctuation(const MetricsLedger& ledger);

// Lineages of the top `top_fraction` contributing leechers ranked by
// capacity, ties broken toward the lower lineage.
std::set<std::uint32_t> top_capacity_lineages(const MetricsLedger& ledger,
                                              double top_fraction = 0.2);

// Of the unchoke grants made by the top `top_fraction` of contributing
// leechers by lineage capacity, the fraction that go to that same group.
double top_capacity_unchoke_share(const MetricsLedger& ledger,
                                  double top_fraction = 0.2);

struct FairnessPoint {
  PeerId id = kNoPeer;
  std::uint32_t lineage = 0;
  double capacity = 0;
  StrategyKind strategy = StrategyKind::Regular;
  Tick lifetime = 0;        // ticks the identity was present
  double avg_down_rate = 0; // bytes per tick over the lifetime
  double avg_up_rate = 0;
};

// One point per non-seed identity, ordered by identifier.
std::vector<FairnessPoint> fairness_ratios(const MetricsLedger& ledger);

struct FreeRiderExposure {
  double leecher_upload_share = 0;  // leecher bytes sent to free riders / all leecher uploads
  double from_leechers = 0;         // split of free-rider downloads by source
  double from_seeds = 0;
};

FreeRiderExposure freerider_exposure(const MetricsLedger& ledger);

// CSV forms. Transfers: "tick,from,to,bytes". Peers:
// "id,lineage,capacity,strategy,join,complete,leave" with -1 for never.
// Writing then reading reproduces the ledger exactly.
void write_transfers_csv(const MetricsLedger& ledger, std::ostream& out);
void write_peers_csv(const MetricsLedger& ledger, std::ostream& out);
MetricsLedger read_ledger_csv(std::istream& transfers, std::istream& peers);

}  // namespace rlswarm
