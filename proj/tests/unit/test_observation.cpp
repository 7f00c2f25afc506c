#include <doctest.h>

#include <cmath>

#include "flatsplat/observation.hpp"
#include "oracles.hpp"

using namespace flatsplat;

TEST_CASE("effective observation uses a strict threshold") {
  CHECK(effective_observation(0.0) == 0);
  CHECK(effective_observation(1e-7) == 0);
  CHECK(effective_observation(std::nextafter(1e-7, 1.0)) == 1);
  CHECK(effective_observation(1e-3) == 1);
}

TEST_CASE("statistics only move on effective observations") {
  ObservationStats s;
  s = update_stats(s, {0.4, 0.6}, 1);
  s = update_stats(s, {0.1, 0.9}, 1);
  const ObservationStats before = s;
  CHECK(update_stats(s, {0.7, 0.2}, 0) == before);
}

TEST_CASE("the first observation sets the mean and a zero variance") {
  const ObservationStats s = update_stats({}, {0.25, 0.75}, 1);
  CHECK(s.m == 1);
  CHECK(s.mean_pos == Vec2(0.25, 0.75));
  CHECK(s.var_pos == Vec2::Zero());
  CHECK(s.epoch_observation_count == 1);
}

TEST_CASE("streaming statistics equal two-pass batch statistics") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng = make_stream(seed, "unit-welford");
    ObservationStats s;
    std::vector<Vec2> seen;
    const int n = 2 + static_cast<int>(seed % 60);
    for (int k = 0; k < n; ++k) {
      const Vec2 p(oracle::uniform(rng, 0, 1), oracle::uniform(rng, 0, 1));
      s = update_stats(s, p, 1);
      seen.push_back(p);
    }
    Vec2 mean = Vec2::Zero();
    for (const Vec2& p : seen) mean += p;
    mean /= n;
    Vec2 var = Vec2::Zero();
    for (const Vec2& p : seen) var += (p - mean).cwiseProduct(p - mean);
    var /= n - 1;
    for (int a = 0; a < 2; ++a) {
      CHECK(std::abs(s.mean_pos[a] - mean[a]) <= 1e-9 * std::abs(mean[a]));
      CHECK(std::abs(s.var_pos[a] - var[a]) <= 1e-9 * std::abs(var[a]));
    }
    CHECK(s.m == static_cast<std::uint64_t>(n));
  }
}

TEST_CASE("completeness update examples") {
  ObservationStats s;
  s.var_pos = {0.6, 0.8};  // norm 1
  CHECK(update_oc(s, 1).oc == doctest::Approx(0.02).epsilon(1e-15));
  s.oc = 0.37;
  CHECK(update_oc(s, 0).oc == 0.98 * 0.37);
}

TEST_CASE("constant increments converge to their value and never overshoot") {
  ObservationStats s;
  s.var_pos = {0.03, 0.04};  // norm 0.05
  for (int k = 0; k < 1000; ++k) {
    s = update_oc(s, 1);
    CHECK(s.oc <= 0.05 + 1e-15);
  }
  CHECK(std::abs(s.oc - 0.05) < 1e-6);
}

TEST_CASE("completeness pruning examples") {
  std::vector<ObservationStats> stats(4);
  stats[0].oc = 0.02;
  stats[0].epoch_observation_count = 2;
  stats[1].oc = 0.02;
  stats[1].epoch_observation_count = 5;
  stats[2].oc = 0.5;
  stats[2].epoch_observation_count = 0;
  stats[3].oc = 0.0299;
  stats[3].epoch_observation_count = 3;
  CHECK(ocp_prune(stats) == std::vector<std::size_t>{0});
  for (const auto& s : stats) CHECK(s.epoch_observation_count == 0);
}

TEST_CASE("pruning never removes a primitive observed three or more times") {
  Rng rng = make_stream(20, "ocp");
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ObservationStats> stats(20);
    for (auto& s : stats) {
      s.oc = oracle::uniform(rng, 0, 0.06);
      s.epoch_observation_count = static_cast<std::uint32_t>(oracle::uniform(rng, 0, 6));
    }
    const auto before = stats;
    for (std::size_t i : ocp_prune(stats)) {
      CHECK(before[i].epoch_observation_count < 3);
      CHECK(before[i].oc < 0.03);
    }
  }
}

TEST_CASE("widely spread cameras give higher completeness than clustered ones") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng = make_stream(seed, "monotone");
    ObservationStats spread, clustered;
    const Vec2 base(oracle::uniform(rng, 0, 1), oracle::uniform(rng, 0, 1));
    for (int k = 0; k < 30; ++k) {
      spread = update_stats(spread, {oracle::uniform(rng, 0, 1), oracle::uniform(rng, 0, 1)}, 1);
      spread = update_oc(spread, 1);
    }
    for (int k = 0; k < 2; ++k) {
      const Vec2 p = base + Vec2(oracle::uniform(rng, -0.01, 0.01), oracle::uniform(rng, -0.01, 0.01));
      clustered = update_oc(update_stats(clustered, p, 1), 1);
    }
    wins += spread.oc > clustered.oc;
  }
  CHECK(wins >= 95);
}
