#pragma once

// Depth-ordered alpha blending of projected 1D Gaussians, plus the analytic
// backward pass.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "flatsplat/scene.hpp"

namespace flatsplat {

inline constexpr double kVarianceFloor = 0.25;         // pixels^2
inline constexpr double kEarlyStopTransmittance = 1e-4;
inline constexpr double kCullSigmas = 4.0;

struct Splat1D {
  double mean_u = 0.0;
  double var_u = kVarianceFloor;
  double depth = 1.0;
  double opacity = 0.0;
  Color color{0.0, 0.0, 0.0};
  std::size_t source_index = 0;
};

struct RenderSettings {
  Color background{0.0, 0.0, 0.0};
  bool early_stop = true;
  int threads = 1;
};

// One splat's effect on one pixel: its effective alpha (opacity * g) and the
// transmittance in front of it. The blending weight is alpha * transmittance.
struct Contribution {
  std::uint32_t splat;  // index into RenderOutput::splats
  double alpha;
  double transmittance;

  double weight() const { return alpha * transmittance; }
};

struct RenderOutput {
  int width = 0;
  Image color;
  std::vector<double> oc;  // empty unless per-primitive OC values were supplied
  std::vector<double> weight_sums;
  std::vector<double> final_transmittance;
  std::vector<Splat1D> splats;  // depth-sorted
  std::vector<std::size_t> offsets;  // width + 1 entries into contributions
  std::vector<Contribution> contributions;

  std::span<const Contribution> pixel(std::size_t x) const {
    return {contributions.data() + offsets[x], offsets[x + 1] - offsets[x]};
  }
};

// std::nullopt when the primitive is culled (behind the near plane, or its
// mean more than 4 sigma outside [0, width)).
std::optional<Splat1D> project_gaussian(const GaussianPrimitive& g, const CameraPose& camera,
                                        std::size_t index = 0);

// Projects every primitive and sorts the survivors by (depth, index).
std::vector<Splat1D> project_scene(std::span<const GaussianPrimitive> scene, const CameraPose& camera);

void sort_by_depth(std::vector<Splat1D>& splats);

inline double splat_profile(const Splat1D& s, double x) {
  const double d = x - s.mean_u;
  return std::exp(-0.5 * d * d / s.var_u);
}

// Blends `splats` (sorted here) into a width-pixel image. When `oc_values` is
// non-empty it is indexed by Splat1D::source_index and the OC image is
// rendered from the same weights.
RenderOutput render_color(std::vector<Splat1D> splats, int width, const RenderSettings& settings = {},
                          std::span<const double> oc_values = {});

// O(x) = sum_k w_k O_k with the weights of a fresh blend of `splats`.
std::vector<double> render_oc(std::vector<Splat1D> splats, std::span<const double> oc_values, int width,
                              const RenderSettings& settings = {});

// Reuses the weights retained by an earlier render.
std::vector<double> render_oc(const RenderOutput& rendered, std::span<const double> oc_values);

RenderOutput render(std::span<const GaussianPrimitive> scene, const CameraPose& camera,
                    const RenderSettings& settings = {}, std::span<const double> oc_values = {});

struct PrimitiveGradients {
  std::vector<Vec2> position;
  std::vector<Vec2> scale;
  std::vector<double> rotation;
  std::vector<double> opacity_logit;
  std::vector<Color> color;
  std::vector<double> grad_p;  // |d loss / d position|

  explicit PrimitiveGradients(std::size_t n = 0)
      : position(n, Vec2::Zero()),
        scale(n, Vec2::Zero()),
        rotation(n, 0.0),
        opacity_logit(n, 0.0),
        color(n, Color{0.0, 0.0, 0.0}),
        grad_p(n, 0.0) {}
};

// Chains d loss / d C(x) through the retained forward pass of `scene` seen
// from `camera`.
PrimitiveGradients backward(std::span<const GaussianPrimitive> scene, const CameraPose& camera,
                            const RenderOutput& forward, std::span<const Color> dloss_dcolor,
                            const RenderSettings& settings = {});

}  // namespace flatsplat
