#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <rlswarm/learning.hpp>

using namespace rlswarm;

// 0.95^32, precomputed at high precision.
static const double kDecay5 = 0.19371148445850114;

TEST_CASE("binarize_state uses a strict threshold") {
  CHECK(binarize_state(5, 3) == 1);
  CHECK(binarize_state(3, 3) == 0);
  CHECK(binarize_state(0, 0) == 0);
  CHECK(binarize_state(3.0000001, 3) == 1);
}

TEST_CASE("update_rate_estimate blends sample and estimate") {
  RateEstimate e = fresh_estimate(100);
  e.estimate = 10;
  e.has_history = true;

  SUBCASE("fixed point") {
    update_rate_estimate(e, 10, 0.5, 100);
    CHECK(e.estimate == doctest::Approx(10).epsilon(1e-12));
  }
  SUBCASE("midpoint at alpha one half") {
    update_rate_estimate(e, 20, 0.5, 100);
    CHECK(e.estimate == doctest::Approx(15).epsilon(1e-12));
  }
  SUBCASE("from zero estimate") {
    e.estimate = 0;
    update_rate_estimate(e, 8, 0.5, 100);
    CHECK(e.estimate == doctest::Approx(4).epsilon(1e-12));
  }
  SUBCASE("clears penalty state") {
    RateEstimate f = fresh_estimate(100);
    penalize_no_reciprocation(f, 100);
    CHECK(f.penalty_count == 1);
    update_rate_estimate(f, 7, 0.5, 100);
    CHECK(f.has_history);
    CHECK(f.penalty_count == 0);
  }
  SUBCASE("rejects negative samples") {
    CHECK_THROWS_AS(update_rate_estimate(e, -1, 0.5, 100), std::invalid_argument);
  }
  SUBCASE("clamped to the rate cap") {
    e.estimate = 90;
    update_rate_estimate(e, 1000, 0.5, 100);
    CHECK(e.estimate == 100);
  }
}

TEST_CASE("ewma closed form after k identical samples") {
  // After k samples of value v from estimate e0: v + (1-a)^k (e0 - v).
  const double alpha = 0.5, v = 12.0, e0 = 96.0, l_max = 200.0;
  RateEstimate e = fresh_estimate(l_max);
  e.estimate = e0;
  e.has_history = true;
  for (int k = 1; k <= 40; ++k) {
    update_rate_estimate(e, v, alpha, l_max);
    double expect = v + std::pow(1 - alpha, k) * (e0 - v);
    CHECK(std::fabs(e.estimate - expect) < 1e-9);
  }
}

TEST_CASE("fresh peers start fully optimistic") {
  RateEstimate e = fresh_estimate(100);
  CHECK(e.estimate == 100);
  CHECK_FALSE(e.has_history);
  CHECK(e.penalty_count == 0);

  TransitionTable t;
  CHECK(t.reciprocation_prob(7) == 1.0);
}

TEST_CASE("non-reciprocation decay schedule") {
  RateEstimate e = fresh_estimate(100);

  SUBCASE("first unanswered upload") {
    penalize_no_reciprocation(e, 100);
    CHECK(e.penalty_count == 1);
    CHECK(e.estimate == doctest::Approx(90.25).epsilon(1e-12));
  }
  SUBCASE("fifth unanswered upload") {
    for (int i = 0; i < 5; ++i) penalize_no_reciprocation(e, 100);
    CHECK(e.penalty_count == 5);
    CHECK(std::fabs(e.estimate - kDecay5 * 100) < 1e-6);
  }
  SUBCASE("rejected once history exists") {
    e.has_history = true;
    CHECK_THROWS_AS(penalize_no_reciprocation(e, 100), std::logic_error);
  }
}

TEST_CASE("decay function is strictly decreasing and accelerating") {
  CHECK(nonreciprocation_decay(0) == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(nonreciprocation_decay(1) == doctest::Approx(0.9025).epsilon(1e-12));
  CHECK(std::fabs(nonreciprocation_decay(5) - kDecay5) < 1e-15);
  for (int n = 1; n <= 11; ++n) {
    CHECK(nonreciprocation_decay(n) < nonreciprocation_decay(n - 1));
  }
  // Successive ratios grow: f(n-1)/f(n) < f(n)/f(n+1).
  for (int n = 1; n <= 10; ++n) {
    double lhs = nonreciprocation_decay(n - 1) / nonreciprocation_decay(n);
    double rhs = nonreciprocation_decay(n) / nonreciprocation_decay(n + 1);
    CHECK(lhs < rhs);
  }
}

TEST_CASE("triplet counters and empirical rows") {
  TransitionTable t;
  const PeerId p = 3;

  SUBCASE("single increment") {
    t.record_triplet(p, 1, 1, 1);
    REQUIRE(t.counts(p) != nullptr);
    CHECK(t.counts(p)->c[1][1][1] == 1);
    CHECK(t.counts(p)->m[1] == 1);
  }
  SUBCASE("two of three reciprocations") {
    t.record_triplet(p, 1, 1, 1);
    t.record_triplet(p, 1, 1, 1);
    t.record_triplet(p, 1, 1, 0);
    CHECK(t.transition_prob(p, 1, 1, 1) == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(t.transition_prob(p, 1, 1, 0) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }
  SUBCASE("one in four") {
    t.record_triplet(p, 0, 1, 1);
    for (int i = 0; i < 3; ++i) t.record_triplet(p, 0, 1, 0);
    CHECK(t.transition_prob(p, 0, 1, 1) == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("deterministic reciprocator") {
    for (int i = 0; i < 3; ++i) t.record_triplet(p, 1, 1, 1);
    CHECK(t.transition_prob(p, 1, 1, 1) == 1.0);
  }
}

TEST_CASE("unobserved rows fall back to optimistic priors") {
  TransitionTable t;
  const PeerId p = 9;
  CHECK(t.transition_prob(p, 0, 1, 1) == 1.0);
  CHECK(t.transition_prob(p, 1, 1, 1) == 1.0);
  CHECK(t.transition_prob(p, 0, 1, 0) == 0.0);
  CHECK(t.transition_prob(p, 0, 0, 1) == 0.0);
  CHECK(t.transition_prob(p, 1, 0, 0) == 1.0);
  // Also applies per-row when the peer has counts elsewhere.
  t.record_triplet(p, 0, 0, 0);
  CHECK(t.transition_prob(p, 1, 1, 1) == 1.0);
}

TEST_CASE("reciprocation probability weights rows by state marginals") {
  TransitionTable t;
  const PeerId p = 4;

  SUBCASE("fresh peer") { CHECK(t.reciprocation_prob(p) == 1.0); }
  SUBCASE("perfect reciprocator") {
    t.record_triplet(p, 0, 1, 1);
    t.record_triplet(p, 1, 1, 1);
    CHECK(t.reciprocation_prob(p) == 1.0);
  }
  SUBCASE("equal marginals average the two rows") {
    // Pr(1|0,1) = 1/5, Pr(1|1,1) = 4/5, marginals m = [5, 5].
    t.record_triplet(p, 0, 1, 1);
    for (int i = 0; i < 4; ++i) t.record_triplet(p, 0, 1, 0);
    for (int i = 0; i < 4; ++i) t.record_triplet(p, 1, 1, 1);
    t.record_triplet(p, 1, 1, 0);
    REQUIRE(t.counts(p)->m[0] == 5);
    REQUIRE(t.counts(p)->m[1] == 5);
    CHECK(t.reciprocation_prob(p) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("rows always sum to one") {
  TransitionTable t;
  std::mt19937_64 rng(123);
  for (int i = 0; i < 2000; ++i) {
    PeerId p = static_cast<PeerId>(rng() % 5);
    t.record_triplet(p, static_cast<int>(rng() % 2), static_cast<int>(rng() % 2),
                     static_cast<int>(rng() % 2));
  }
  for (PeerId p = 0; p < 6; ++p) {
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 2; ++a) {
        double sum = t.transition_prob(p, s, a, 0) + t.transition_prob(p, s, a, 1);
        CHECK(std::fabs(sum - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("recovers a known two-state chain from samples") {
  // True next-state-one probabilities by (state, action).
  const double q[2][2] = {{0.1, 0.7}, {0.3, 0.9}};
  TransitionTable t;
  const PeerId p = 1;
  std::mt19937_64 rng(20240817);
  auto uniform = [&rng]() { return (rng() >> 11) * 0x1.0p-53; };
  int s = 0;
  for (int i = 0; i < 10000; ++i) {
    int a = static_cast<int>(rng() % 2);
    int s_next = uniform() < q[s][a] ? 1 : 0;
    t.record_triplet(p, s, a, s_next);
    s = s_next;
  }
  for (int st = 0; st < 2; ++st) {
    for (int a = 0; a < 2; ++a) {
      CHECK(std::fabs(t.transition_prob(p, st, a, 1) - q[st][a]) < 0.05);
    }
  }
}

TEST_CASE("estimates stay inside [0, l_max] under arbitrary updates") {
  std::mt19937_64 rng(77);
  auto uniform = [&rng]() { return (rng() >> 11) * 0x1.0p-53; };
  const double l_max = 50;
  RateEstimate e = fresh_estimate(l_max);
  for (int i = 0; i < 5000; ++i) {
    if (!e.has_history && uniform() < 0.3) {
      penalize_no_reciprocation(e, l_max);
    } else {
      update_rate_estimate(e, uniform() * 3 * l_max, 0.5, l_max);
    }
    CHECK(e.estimate >= 0);
    CHECK(e.estimate <= l_max);
  }
}

TEST_CASE("median threshold uses the nearest-rank rule") {
  CHECK(median_of({1, 2, 3, 4, 5, 6, 7}) == 4);
  CHECK(median_of({4, 1, 3, 2}) == 2);
  CHECK(median_of({9}) == 9);
  CHECK(median_of({}) == 0);
}

TEST_CASE("forgetting a peer drops its statistics") {
  TransitionTable t;
  t.record_triplet(2, 1, 1, 0);
  CHECK(t.counts(2) != nullptr);
  t.forget_peer(2);
  CHECK(t.counts(2) == nullptr);
  CHECK(t.reciprocation_prob(2) == 1.0);
}

TEST_CASE("state marginal probability with optimistic prior") {
  TransitionTable t;
  CHECK(t.state_one_prob(5) == 1.0);
  t.record_triplet(5, 0, 1, 1);
  t.record_triplet(5, 0, 1, 0);
  t.record_triplet(5, 0, 1, 0);
  t.record_triplet(5, 0, 1, 0);
  CHECK(t.state_one_prob(5) == doctest::Approx(0.25).epsilon(1e-12));
}
