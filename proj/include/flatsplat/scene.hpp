#pragma once

// Flatland scene model: a 2D world observed by 1D pinhole cameras.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

namespace flatsplat {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Color = std::array<double, 3>;
using Image = std::vector<Color>;
using Mask = std::vector<std::uint8_t>;

inline constexpr double kNearPlane = 0.01;

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

struct GaussianPrimitive {
  Vec2 position = Vec2::Zero();
  Vec2 scale = Vec2::Ones();  // standard deviations along the rotated axes
  double rotation = 0.0;
  double opacity_logit = 0.0;
  Color color{0.0, 0.0, 0.0};

  double opacity() const { return sigmoid(opacity_logit); }
  // R(rotation) * diag(scale^2) * R(rotation)^T
  Mat2 covariance() const;

  bool operator==(const GaussianPrimitive&) const = default;
};

struct CameraPose {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;  // direction of the optical axis, radians
  double focal = 1.0;    // pixels
  int width = 8;

  Vec2 forward() const { return {std::cos(heading), std::sin(heading)}; }
  Vec2 lateral() const { return {-std::sin(heading), std::cos(heading)}; }

  bool operator==(const CameraPose&) const = default;
};

void validate(const CameraPose& camera);

struct ViewRecord {
  CameraPose camera;
  Image image;
  std::optional<Mask> gt_mask;  // 1 = distractor pixel; evaluation only
  int image_id = 0;

  bool operator==(const ViewRecord&) const = default;
};

void validate(const ViewRecord& view);

struct PointProjection {
  double u;      // pixel coordinate; pixel i is sampled at u = i
  double depth;  // forward coordinate in the camera frame
};

// Throws BehindCamera when the camera-frame depth is at or below the near plane.
PointProjection project_point(const CameraPose& camera, const Vec2& point);

// d u / d point at `point`.
Vec2 projection_jacobian(const CameraPose& camera, const Vec2& point);

}  // namespace flatsplat
