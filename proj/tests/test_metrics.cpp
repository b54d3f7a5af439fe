#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>
#include <sstream>
#include <vector>

#include <rlswarm/metrics.hpp>

using namespace rlswarm;

namespace {

PeerMeta meta(PeerId id, std::uint32_t lineage, double capacity,
              StrategyKind kind, Tick join, Tick complete, Tick leave) {
  PeerMeta m;
  m.id = id;
  m.lineage = lineage;
  m.capacity = capacity;
  m.strategy = kind;
  m.join_tick = join;
  m.complete_tick = complete;
  m.leave_tick = leave;
  return m;
}

}  // namespace

TEST_CASE("fluctuation count is the larger one-sided set difference") {
  CHECK(fluctuation_count({1, 2, 3, 4}, {1, 2, 3, 4}) == 0);
  CHECK(fluctuation_count({1, 2, 3, 4}, {1, 2, 3, 5}) == 1);
  CHECK(fluctuation_count({1, 2}, {3, 4, 5}) == 3);
  CHECK(fluctuation_count({}, {}) == 0);
  CHECK(fluctuation_count({}, {9}) == 1);

  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::set<PeerId> a, b;
    for (int i = 0; i < 6; ++i) {
      if (rng() & 1) a.insert(static_cast<PeerId>(rng() % 10));
      if (rng() & 1) b.insert(static_cast<PeerId>(rng() % 10));
    }
    std::vector<PeerId> va(a.begin(), a.end()), vb(b.begin(), b.end());
    int fwd = fluctuation_count(va, vb);
    CHECK(fwd == fluctuation_count(vb, va));
    CHECK((fwd == 0) == (a == b));
    CHECK(fwd <= static_cast<int>(std::max(a.size(), b.size())));
  }
}

TEST_CASE("summary statistics follow the nearest-rank rule") {
  SummaryStats s = summarize({1, 2, 3, 4, 5, 6, 7});
  CHECK(s.count == 7);
  CHECK(s.median == 4);
  CHECK(s.q25 == 2);
  CHECK(s.q75 == 6);
  CHECK(s.whisker_low == 1);
  CHECK(s.whisker_high == 7);
  CHECK(s.outliers.empty());
}

TEST_CASE("summary of a single value collapses to that value") {
  SummaryStats s = summarize({5});
  CHECK(s.count == 1);
  CHECK(s.median == 5);
  CHECK(s.q25 == 5);
  CHECK(s.q75 == 5);
  CHECK(s.whisker_low == 5);
  CHECK(s.whisker_high == 5);
  CHECK(s.outliers.empty());
}

TEST_CASE("summary flags values beyond the whisker fences as outliers") {
  SummaryStats s = summarize({100, 1, 2, 3, 4});
  CHECK(s.count == 5);
  CHECK(s.q25 == 2);
  CHECK(s.median == 3);
  CHECK(s.q75 == 4);
  CHECK(s.whisker_low == 1);
  CHECK(s.whisker_high == 4);
  REQUIRE(s.outliers.size() == 1);
  CHECK(s.outliers[0] == 100);
}

TEST_CASE("summary of nothing reports an explicit empty result") {
  SummaryStats s = summarize({});
  CHECK(s.count == 0);
  CHECK(s.median == 0);
  CHECK(s.outliers.empty());
}

TEST_CASE("completion stats cover first lifetimes and honor the filter") {
  MetricsLedger ledger;
  for (PeerId id = 1; id <= 7; ++id)
    ledger.peers.push_back(meta(id, id, 10, StrategyKind::Regular, 0,
                                static_cast<Tick>(id), static_cast<Tick>(id)));
  // Lineage 3 churned and completed again later; only the first lifetime counts.
  ledger.peers.push_back(meta(17, 3, 10, StrategyKind::Regular, 5, 9, 9));
  // A free rider finishing late must not leak into the regular group.
  ledger.peers.push_back(meta(20, 20, 10, StrategyKind::FreeRider, 0, 100, 100));

  SummaryStats s = completion_stats(ledger, [](const PeerMeta& m) {
    return m.strategy == StrategyKind::Regular;
  });
  CHECK(s.count == 7);
  CHECK(s.median == 4);
  CHECK(s.q25 == 2);
  CHECK(s.q75 == 6);

  SummaryStats fr = completion_stats(ledger, [](const PeerMeta& m) {
    return m.strategy == StrategyKind::FreeRider;
  });
  CHECK(fr.count == 1);
  CHECK(fr.median == 100);

  SummaryStats none = completion_stats(ledger, [](const PeerMeta& m) {
    return m.strategy == StrategyKind::Seed;
  });
  CHECK(none.count == 0);
}

TEST_CASE("completion stats measure time relative to the join tick") {
  MetricsLedger ledger;
  ledger.peers.push_back(meta(1, 1, 10, StrategyKind::Rl, 10, 25, 25));
  SummaryStats s = completion_stats(ledger, [](const PeerMeta&) { return true; });
  CHECK(s.count == 1);
  CHECK(s.median == 15);
}

TEST_CASE("top capacity unchoke share counts slot grants inside the top group") {
  MetricsLedger ledger;
  // Ten contributing leechers; capacities make lineages 8 and 9 the top 20%.
  for (PeerId id = 0; id < 10; ++id)
    ledger.peers.push_back(meta(id, id, 10 * (id + 1), StrategyKind::Regular, 0,
                                kNever, kNever));
  auto grant = [&](Tick t, PeerId from, PeerId to, Bytes b) {
    ledger.rows.push_back(TransferRow{t, from, to, b});
  };
  grant(0, 8, 9, 10);  // top to top
  grant(0, 8, 1, 10);  // top to low
  grant(1, 9, 8, 0);   // top to top, idle slot still counts
  grant(1, 9, 2, 10);  // top to low
  grant(2, 9, 8, 10);  // top to top again the next tick
  grant(1, 1, 8, 10);  // low to top: not part of the share
  grant(2, 1, 2, 10);  // low to low: not part of the share
  CHECK(top_capacity_unchoke_share(ledger, 0.2) == doctest::Approx(3.0 / 5.0));
}

TEST_CASE("top capacity share handles the all-or-nothing edges") {
  MetricsLedger ledger;
  for (PeerId id = 0; id < 5; ++id)
    ledger.peers.push_back(meta(id, id, 10 * (id + 1), StrategyKind::Rl, 0,
                                kNever, kNever));
  ledger.rows.push_back(TransferRow{0, 4, 3, 5});
  CHECK(top_capacity_unchoke_share(ledger, 0.4) == 1.0);  // top = {3, 4}
  ledger.rows.clear();
  ledger.rows.push_back(TransferRow{0, 4, 0, 5});
  CHECK(top_capacity_unchoke_share(ledger, 0.4) == 0.0);
  ledger.rows.clear();
  CHECK(top_capacity_unchoke_share(ledger, 0.4) == 0.0);  // no grants at all
}

TEST_CASE("fairness points report lifetime average rates") {
  MetricsLedger ledger;
  ledger.peers.push_back(meta(1, 1, 100, StrategyKind::Regular, 0, kNever, kNever));
  ledger.peers.push_back(meta(2, 2, 100, StrategyKind::Regular, 0, kNever, kNever));
  ledger.peers.push_back(meta(3, 3, 50, StrategyKind::FreeRider, 0, kNever, kNever));
  for (Tick t = 0; t < 10; ++t) {
    ledger.rows.push_back(TransferRow{t, 1, 2, 100});
    ledger.rows.push_back(TransferRow{t, 2, 1, 100});
    ledger.rows.push_back(TransferRow{t, 1, 3, 40});
  }
  std::vector<FairnessPoint> pts = fairness_ratios(ledger);
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].id == 1);
  CHECK(pts[0].avg_down_rate == doctest::Approx(100));
  CHECK(pts[0].avg_up_rate == doctest::Approx(140));
  CHECK(pts[0].capacity == 100);
  CHECK(pts[1].avg_down_rate == doctest::Approx(100));
  CHECK(pts[1].avg_up_rate == doctest::Approx(100));
  CHECK(pts[2].avg_up_rate == 0);  // free rider: ratio left to the caller
  CHECK(pts[2].avg_down_rate == doctest::Approx(40));
}

TEST_CASE("fairness rates respect a shorter lifetime window") {
  MetricsLedger ledger;
  ledger.peers.push_back(meta(1, 1, 100, StrategyKind::Regular, 2, 6, 6));
  ledger.peers.push_back(meta(2, 2, 100, StrategyKind::Seed, 0, 0, kNever));
  for (Tick t = 2; t <= 6; ++t) ledger.rows.push_back(TransferRow{t, 2, 1, 60});
  ledger.rows.push_back(TransferRow{9, 2, 9, 1});  // stretches the run to tick 9
  std::vector<FairnessPoint> pts = fairness_ratios(ledger);
  REQUIRE(pts.size() >= 1);
  CHECK(pts[0].id == 1);
  CHECK(pts[0].lifetime == 5);  // ticks 2..6 inclusive
  CHECK(pts[0].avg_down_rate == doctest::Approx(60));
}

TEST_CASE("free rider exposure splits upload shares and download sources") {
  MetricsLedger ledger;
  ledger.peers.push_back(meta(1, 1, 10, StrategyKind::Regular, 0, kNever, kNever));
  ledger.peers.push_back(meta(2, 2, 10, StrategyKind::Rl, 0, kNever, kNever));
  ledger.peers.push_back(meta(3, 3, 10, StrategyKind::FreeRider, 0, kNever, kNever));
  ledger.peers.push_back(meta(4, 4, 10, StrategyKind::Seed, 0, 0, kNever));
  ledger.rows.push_back(TransferRow{0, 1, 2, 300});
  ledger.rows.push_back(TransferRow{0, 1, 3, 100});
  ledger.rows.push_back(TransferRow{1, 2, 3, 100});
  ledger.rows.push_back(TransferRow{1, 4, 3, 300});
  ledger.rows.push_back(TransferRow{1, 4, 1, 500});
  FreeRiderExposure e = freerider_exposure(ledger);
  CHECK(e.leecher_upload_share == doctest::Approx(0.4));
  CHECK(e.from_leechers == doctest::Approx(0.4));
  CHECK(e.from_seeds == doctest::Approx(0.6));
}

TEST_CASE("exposure without free riders is zero everywhere") {
  MetricsLedger ledger;
  ledger.peers.push_back(meta(1, 1, 10, StrategyKind::Regular, 0, kNever, kNever));
  ledger.peers.push_back(meta(2, 2, 10, StrategyKind::Regular, 0, kNever, kNever));
  ledger.rows.push_back(TransferRow{0, 1, 2, 100});
  FreeRiderExposure e = freerider_exposure(ledger);
  CHECK(e.leecher_upload_share == 0);
  CHECK(e.from_leechers == 0);
  CHECK(e.from_seeds == 0);
}

TEST_CASE("mean fluctuation averages per-leecher selection changes") {
  MetricsLedger ledger;
  ledger.peers.push_back(meta(1, 1, 10, StrategyKind::Regular, 0, kNever, kNever));
  ledger.peers.push_back(meta(2, 2, 10, StrategyKind::Rl, 0, kNever, kNever));
  ledger.peers.push_back(meta(3, 3, 10, StrategyKind::FreeRider, 0, kNever, kNever));
  ledger.peers.push_back(meta(4, 4, 10, StrategyKind::Seed, 0, 0, kNever));
  auto grant = [&](Tick t, PeerId from, PeerId to) {
    ledger.rows.push_back(TransferRow{t, from, to, 1});
  };
  // Peer 1: {5,6} -> {5,7} -> {5,7}: changes 1 then 0, mean 0.5.
  grant(0, 1, 5);
  grant(0, 1, 6);
  grant(1, 1, 5);
  grant(1, 1, 7);
  grant(2, 1, 5);
  grant(2, 1, 7);
  // Peer 2: {8} -> {9} -> {9}: changes 1 then 0, mean 0.5.
  grant(0, 2, 8);
  grant(1, 2, 9);
  grant(2, 2, 9);
  // Seed churns its slots every tick; it must not enter the average.
  grant(0, 4, 1);
  grant(1, 4, 2);
  grant(2, 4, 5);
  CHECK(mean_fluctuation(ledger) == doctest::Approx(0.5));
}

TEST_CASE("mean fluctuation respects identity lifetimes") {
  MetricsLedger ledger;
  // Joined at tick 1, left at tick 3: pairs (1,2) and (2,3) only.
  ledger.peers.push_back(meta(1, 1, 10, StrategyKind::Regular, 1, 3, 3));
  ledger.rows.push_back(TransferRow{1, 1, 5, 1});
  ledger.rows.push_back(TransferRow{2, 1, 6, 1});
  ledger.rows.push_back(TransferRow{3, 1, 6, 1});
  ledger.rows.push_back(TransferRow{4, 9, 9, 1});  // unrelated traffic at tick 4
  CHECK(mean_fluctuation(ledger) == doctest::Approx(0.5));
}

TEST_CASE("ledger survives a CSV round trip bit-exactly") {
  MetricsLedger ledger;
  ledger.peers.push_back(meta(0, 0, 32768, StrategyKind::Seed, 0, 0, kNever));
  ledger.peers.push_back(meta(1, 1, 2048.5, StrategyKind::Regular, 0, 41, kNever));
  ledger.peers.push_back(meta(2, 2, 6144, StrategyKind::Rl, 3, kNever, 17));
  ledger.peers.push_back(meta(3, 3, 1024, StrategyKind::FreeRider, 0, kNever, kNever));
  std::mt19937_64 rng(5);
  for (Tick t = 0; t < 20; ++t)
    ledger.rows.push_back(TransferRow{t, static_cast<PeerId>(rng() % 4),
                                      static_cast<PeerId>(rng() % 4), rng()});

  std::ostringstream transfers, peers;
  write_transfers_csv(ledger, transfers);
  write_peers_csv(ledger, peers);

  std::istringstream tin(transfers.str()), pin(peers.str());
  MetricsLedger back = read_ledger_csv(tin, pin);
  REQUIRE(back.rows.size() == ledger.rows.size());
  REQUIRE(back.peers.size() == ledger.peers.size());
  for (std::size_t i = 0; i < ledger.rows.size(); ++i) {
    CHECK(back.rows[i].tick == ledger.rows[i].tick);
    CHECK(back.rows[i].from == ledger.rows[i].from);
    CHECK(back.rows[i].to == ledger.rows[i].to);
    CHECK(back.rows[i].bytes == ledger.rows[i].bytes);
  }
  for (std::size_t i = 0; i < ledger.peers.size(); ++i) {
    CHECK(back.peers[i].id == ledger.peers[i].id);
    CHECK(back.peers[i].lineage == ledger.peers[i].lineage);
    CHECK(back.peers[i].capacity == ledger.peers[i].capacity);
    CHECK(back.peers[i].strategy == ledger.peers[i].strategy);
    CHECK(back.peers[i].join_tick == ledger.peers[i].join_tick);
    CHECK(back.peers[i].complete_tick == ledger.peers[i].complete_tick);
    CHECK(back.peers[i].leave_tick == ledger.peers[i].leave_tick);
  }

  std::ostringstream transfers2, peers2;
  write_transfers_csv(back, transfers2);
  write_peers_csv(back, peers2);
  CHECK(transfers2.str() == transfers.str());
  CHECK(peers2.str() == peers.str());
}

TEST_CASE("strategy names map both ways") {
  for (StrategyKind k : {StrategyKind::Regular, StrategyKind::Seed,
                         StrategyKind::FreeRider, StrategyKind::Rl}) {
    StrategyKind back;
    REQUIRE(strategy_from_name(strategy_name(k), back));
    CHECK(back == k);
  }
  StrategyKind out;
  CHECK(!strategy_from_name("bogus", out));
}
