#pragma once

// Per-primitive observation completeness: an exponentially smoothed measure of
// how widely spread the cameras that effectively observe a primitive are.

#include <cstdint>
#include <span>
#include <vector>

#include "flatsplat/scene.hpp"

namespace flatsplat {

inline constexpr double kEffectiveGradThreshold = 1e-7;
inline constexpr double kOcDecay = 0.98;
inline constexpr double kOcpThreshold = 0.03;
inline constexpr std::uint32_t kOcpMinObservations = 3;

struct ObservationStats {
  std::uint64_t m = 0;                // effective observations so far, never reset
  Vec2 mean_pos = Vec2::Zero();       // running mean of observing camera positions
  Vec2 var_pos = Vec2::Zero();        // running (m-1)-normalised variance per axis
  double oc = 0.0;
  std::uint32_t epoch_observation_count = 0;

  bool operator==(const ObservationStats&) const = default;
};

// 1 iff grad_p > 1e-7.
int effective_observation(double grad_p);

ObservationStats update_stats(ObservationStats stats, const Vec2& camera_position, int u);

// oc <- 0.98 oc + 0.02 |var_pos|_2 u
ObservationStats update_oc(ObservationStats stats, int u);

// Indices with oc < 0.03 and fewer than 3 observations this round, ascending.
// Resets every epoch counter.
std::vector<std::size_t> ocp_prune(std::span<ObservationStats> stats);

}  // namespace flatsplat
