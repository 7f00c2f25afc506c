#include "flatsplat/observation.hpp"

namespace flatsplat {

int effective_observation(double grad_p) { return grad_p > kEffectiveGradThreshold ? 1 : 0; }

ObservationStats update_stats(ObservationStats stats, const Vec2& camera_position, int u) {
  if (u == 0) return stats;
  stats.m += 1;
  const auto m = static_cast<double>(stats.m);
  const Vec2 delta = camera_position - stats.mean_pos;
  if (stats.m == 1) {
    // (m-2)/(m-1) is singular here; one sample carries no spread.
    stats.var_pos = Vec2::Zero();
  } else {
    stats.var_pos = ((m - 2.0) / (m - 1.0)) * stats.var_pos + delta.cwiseProduct(delta) / m;
  }
  stats.mean_pos += delta / m;
  stats.epoch_observation_count += 1;
  return stats;
}

ObservationStats update_oc(ObservationStats stats, int u) {
  const double delta = u == 0 ? 0.0 : stats.var_pos.norm();
  stats.oc = kOcDecay * stats.oc + (1.0 - kOcDecay) * delta;
  return stats;
}

std::vector<std::size_t> ocp_prune(std::span<ObservationStats> stats) {
  std::vector<std::size_t> removed;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (stats[i].oc < kOcpThreshold && stats[i].epoch_observation_count < kOcpMinObservations) {
      removed.push_back(i);
    }
    stats[i].epoch_observation_count = 0;
  }
  return removed;
}

}  // namespace flatsplat
