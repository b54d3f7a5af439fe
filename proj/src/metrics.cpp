#include <rlswarm/metrics.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

namespace rlswarm {

const char* strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Regular: return "regular";
    case StrategyKind::Seed: return "seed";
    case StrategyKind::FreeRider: return "freerider";
    case StrategyKind::Rl: return "rl";
  }
  return "regular";
}

bool strategy_from_name(const std::string& name, StrategyKind& out) {
  if (name == "regular") out = StrategyKind::Regular;
  else if (name == "seed") out = StrategyKind::Seed;
  else if (name == "freerider") out = StrategyKind::FreeRider;
  else if (name == "rl") out = StrategyKind::Rl;
  else return false;
  return true;
}

namespace {

bool is_contributing_leecher(const PeerMeta& m) {
  return m.strategy == StrategyKind::Regular || m.strategy == StrategyKind::Rl;
}

double nearest_rank(const std::vector<double>& sorted, double p) {
  const int n = static_cast<int>(sorted.size());
  int rank = static_cast<int>(std::ceil(p * n));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

Tick last_present_tick(const PeerMeta& m, Tick end) {
  return m.leave_tick == kNever ? end : m.leave_tick;
}

// Once a peer finishes the file it uploads as a de-facto seed, so
// leecher-phase metrics stop counting it at its completion tick.
Tick leech_phase_end(const PeerMeta& m, Tick end) {
  const Tick last = last_present_tick(m, end);
  return m.complete_tick == kNever ? last : std::min(last, m.complete_tick);
}

}  // namespace

SummaryStats summarize(std::vector<double> values) {
  SummaryStats s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.count = static_cast<int>(values.size());
  s.q25 = nearest_rank(values, 0.25);
  s.median = nearest_rank(values, 0.5);
  s.q75 = nearest_rank(values, 0.75);
  const double iqr = s.q75 - s.q25;
  const double lo_fence = s.q25 - 1.5 * iqr;
  const double hi_fence = s.q75 + 1.5 * iqr;
  s.whisker_low = s.q25;
  s.whisker_high = s.q75;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      s.outliers.push_back(v);
    } else {
      s.whisker_low = std::min(s.whisker_low, v);
      s.whisker_high = std::max(s.whisker_high, v);
    }
  }
  return s;
}

int fluctuation_count(const std::vector<PeerId>& prev,
                      const std::vector<PeerId>& cur) {
  std::size_t shared = 0;
  std::size_t i = 0, j = 0;
  while (i < prev.size() && j < cur.size()) {
    if (prev[i] == cur[j]) ++shared, ++i, ++j;
    else if (prev[i] < cur[j]) ++i;
    else ++j;
  }
  return static_cast<int>(std::max(prev.size(), cur.size()) - shared);
}

SummaryStats completion_stats(const MetricsLedger& ledger,
                              const PeerFilter& filter) {
  // Earliest identity per lineage is the first lifetime.
  std::map<std::uint32_t, const PeerMeta*> first;
  for (const PeerMeta& m : ledger.peers) {
    auto [it, inserted] = first.emplace(m.lineage, &m);
    if (!inserted && m.join_tick < it->second->join_tick) it->second = &m;
  }
  std::vector<double> times;
  for (const auto& [lineage, m] : first)
    if (m->complete_tick != kNever && filter(*m))
      times.push_back(static_cast<double>(m->complete_tick - m->join_tick));
  return summarize(std::move(times));
}

double mean_fluctuation(const MetricsLedger& ledger) {
  // Rebuild each contributing leecher's unchoke set per tick; ticks with no
  // grant rows are genuinely empty sets.
  std::map<PeerId, std::map<Tick, std::vector<PeerId>>> sets;
  for (const TransferRow& r : ledger.rows) sets[r.from][r.tick].push_back(r.to);

  const Tick end = ledger.end_tick();
  double total = 0;
  int peers = 0;
  static const std::vector<PeerId> kEmpty;
  for (const PeerMeta& m : ledger.peers) {
    if (!is_contributing_leecher(m)) continue;
    const Tick last = leech_phase_end(m, end);
    if (last <= m.join_tick) continue;  // no consecutive tick pair
    const auto it = sets.find(m.id);
    double changes = 0;
    for (Tick t = m.join_tick + 1; t <= last; ++t) {
      const std::vector<PeerId>* prev = &kEmpty;
      const std::vector<PeerId>* cur = &kEmpty;
      if (it != sets.end()) {
        auto p = it->second.find(t - 1);
        if (p != it->second.end()) prev = &p->second;
        auto c = it->second.find(t);
        if (c != it->second.end()) cur = &c->second;
      }
      changes += fluctuation_count(*prev, *cur);
    }
    total += changes / static_cast<double>(last - m.join_tick);
    ++peers;
  }
  return peers == 0 ? 0.0 : total / peers;
}

std::set<std::uint32_t> top_capacity_lineages(const MetricsLedger& ledger,
                                              double top_fraction) {
  // Rank contributing-leecher lineages by capacity, ties by lineage.
  std::map<std::uint32_t, double> lineage_cap;
  for (const PeerMeta& m : ledger.peers)
    if (is_contributing_leecher(m)) lineage_cap.emplace(m.lineage, m.capacity);
  std::vector<std::pair<double, std::uint32_t>> ranked;
  for (const auto& [lineage, cap] : lineage_cap) ranked.push_back({cap, lineage});
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  const std::size_t k = static_cast<std::size_t>(
      std::llround(top_fraction * static_cast<double>(ranked.size())));
  std::set<std::uint32_t> top;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
    top.insert(ranked[i].second);
  return top;
}

double top_capacity_unchoke_share(const MetricsLedger& ledger,
                                  double top_fraction) {
  const std::set<std::uint32_t> top = top_capacity_lineages(ledger, top_fraction);

  const Tick end = ledger.end_tick();
  std::map<PeerId, std::uint32_t> lineage_of;
  std::map<PeerId, bool> leecher;
  std::map<PeerId, Tick> cutoff;
  for (const PeerMeta& m : ledger.peers) {
    lineage_of[m.id] = m.lineage;
    leecher[m.id] = is_contributing_leecher(m);
    cutoff[m.id] = leech_phase_end(m, end);
  }
  auto in_top = [&](PeerId id) {
    auto it = lineage_of.find(id);
    return it != lineage_of.end() && leecher[id] && top.count(it->second) > 0;
  };

  std::uint64_t granted = 0, within = 0;
  for (const TransferRow& r : ledger.rows) {
    if (!in_top(r.from) || r.tick > cutoff[r.from]) continue;
    ++granted;
    if (in_top(r.to)) ++within;
  }
  return granted == 0 ? 0.0
                      : static_cast<double>(within) / static_cast<double>(granted);
}

std::vector<FairnessPoint> fairness_ratios(const MetricsLedger& ledger) {
  const Tick end = ledger.end_tick();
  std::map<PeerId, Tick> cutoff;
  for (const PeerMeta& m : ledger.peers) cutoff[m.id] = leech_phase_end(m, end);

  std::map<PeerId, Bytes> up, down;
  for (const TransferRow& r : ledger.rows) {
    if (r.tick <= cutoff[r.from]) up[r.from] += r.bytes;
    if (r.tick <= cutoff[r.to]) down[r.to] += r.bytes;
  }
  std::vector<FairnessPoint> points;
  for (const PeerMeta& m : ledger.peers) {
    if (m.strategy == StrategyKind::Seed) continue;
    FairnessPoint p;
    p.id = m.id;
    p.lineage = m.lineage;
    p.capacity = m.capacity;
    p.strategy = m.strategy;
    p.lifetime = cutoff[m.id] - m.join_tick + 1;
    if (p.lifetime > 0) {
      p.avg_down_rate = static_cast<double>(down[m.id]) / p.lifetime;
      p.avg_up_rate = static_cast<double>(up[m.id]) / p.lifetime;
    }
    points.push_back(p);
  }
  std::sort(points.begin(), points.end(),
            [](const FairnessPoint& a, const FairnessPoint& b) { return a.id < b.id; });
  return points;
}

FreeRiderExposure freerider_exposure(const MetricsLedger& ledger) {
  const Tick end = ledger.end_tick();
  std::map<PeerId, StrategyKind> kind;
  std::map<PeerId, Tick> cutoff;
  for (const PeerMeta& m : ledger.peers) {
    kind[m.id] = m.strategy;
    cutoff[m.id] = leech_phase_end(m, end);
  }

  Bytes leecher_up = 0, leecher_to_fr = 0;
  Bytes fr_from_leechers = 0, fr_from_seeds = 0;
  for (const TransferRow& r : ledger.rows) {
    auto from = kind.find(r.from);
    auto to = kind.find(r.to);
    if (from == kind.end() || to == kind.end()) continue;
    const bool to_fr = to->second == StrategyKind::FreeRider;
    const bool leeching_sender = (from->second == StrategyKind::Regular ||
                                  from->second == StrategyKind::Rl) &&
                                 r.tick <= cutoff[r.from];
    if (leeching_sender) {
      leecher_up += r.bytes;
      if (to_fr) {
        leecher_to_fr += r.bytes;
        fr_from_leechers += r.bytes;
      }
    } else if (to_fr && from->second != StrategyKind::FreeRider) {
      // Seeds proper plus finished contributors now uploading as seeds.
      fr_from_seeds += r.bytes;
    }
  }
  FreeRiderExposure e;
  if (leecher_up > 0)
    e.leecher_upload_share =
        static_cast<double>(leecher_to_fr) / static_cast<double>(leecher_up);
  const Bytes fr_total = fr_from_leechers + fr_from_seeds;
  if (fr_total > 0) {
    e.from_leechers =
        static_cast<double>(fr_from_leechers) / static_cast<double>(fr_total);
    e.from_seeds =
        static_cast<double>(fr_from_seeds) / static_cast<double>(fr_total);
  }
  return e;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& s, const char* field) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError(field, "not a number: '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const char* field) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError(field, "not an integer: '" + s + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& s, const char* field) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError(field, "not an unsigned integer: '" + s + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

void expect_header(std::istream& in, const char* want, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(what, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != want)
    throw ConfigError(what, "unexpected header '" + line + "'");
}

}  // namespace

void write_transfers_csv(const MetricsLedger& ledger, std::ostream& out) {
  out << "tick,from,to,bytes\n";
  for (const TransferRow& r : ledger.rows)
    out << r.tick << ',' << r.from << ',' << r.to << ',' << r.bytes << '\n';
}

void write_peers_csv(const MetricsLedger& ledger, std::ostream& out) {
  out << "id,lineage,capacity,strategy,join,complete,leave\n";
  for (const PeerMeta& m : ledger.peers)
    out << m.id << ',' << m.lineage << ',' << format_double(m.capacity) << ','
        << strategy_name(m.strategy) << ',' << m.join_tick << ','
        << m.complete_tick << ',' << m.leave_tick << '\n';
}

MetricsLedger read_ledger_csv(std::istream& transfers, std::istream& peers) {
  MetricsLedger ledger;
  expect_header(transfers, "tick,from,to,bytes", "transfers csv");
  std::string line;
  while (std::getline(transfers, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 4) throw ConfigError("transfers csv", "bad row: '" + line + "'");
    TransferRow r;
    r.tick = parse_int(f[0], "tick");
    r.from = static_cast<PeerId>(parse_int(f[1], "from"));
    r.to = static_cast<PeerId>(parse_int(f[2], "to"));
    r.bytes = parse_uint(f[3], "bytes");
    ledger.rows.push_back(r);
  }
  expect_header(peers, "id,lineage,capacity,strategy,join,complete,leave",
                "peers csv");
  while (std::getline(peers, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 7) throw ConfigError("peers csv", "bad row: '" + line + "'");
    PeerMeta m;
    m.id = static_cast<PeerId>(parse_int(f[0], "id"));
    m.lineage = static_cast<std::uint32_t>(parse_int(f[1], "lineage"));
    m.capacity = parse_double(f[2], "capacity");
    if (!strategy_from_name(f[3], m.strategy))
      throw ConfigError("strategy", "unknown strategy '" + f[3] + "'");
    m.join_tick = parse_int(f[4], "join");
    m.complete_tick = parse_int(f[5], "complete");
    m.leave_tick = parse_int(f[6], "leave");
    ledger.peers.push_back(m);
  }
  return ledger;
}

}  // namespace rlswarm
