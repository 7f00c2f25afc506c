#include "flatsplat/scene.hpp"

#include <cmath>
#include <string>

#include "flatsplat/errors.hpp"

namespace flatsplat {

Mat2 GaussianPrimitive::covariance() const {
  const double c = std::cos(rotation);
  const double s = std::sin(rotation);
  const double vx = scale.x() * scale.x();
  const double vy = scale.y() * scale.y();
  // Written out so the off-diagonal terms are bitwise equal.
  const double off = c * s * (vx - vy);
  Mat2 cov;
  cov << c * c * vx + s * s * vy, off, off, s * s * vx + c * c * vy;
  return cov;
}

void validate(const CameraPose& camera) {
  if (!(camera.focal > 0.0) || !std::isfinite(camera.focal)) {
    throw ConfigError("camera focal must be positive");
  }
  if (camera.width < 8) {
    throw ConfigError("camera width must be at least 8 pixels, got " + std::to_string(camera.width));
  }
}

void validate(const ViewRecord& view) {
  validate(view.camera);
  const auto width = static_cast<std::size_t>(view.camera.width);
  if (view.image.size() != width) {
    throw SchemaError("view image length does not match camera width");
  }
  if (view.gt_mask && view.gt_mask->size() != width) {
    throw SchemaError("view mask length does not match camera width");
  }
}

PointProjection project_point(const CameraPose& camera, const Vec2& point) {
  const Vec2 d = point - camera.position;
  const double depth = camera.forward().dot(d);
  if (!(depth > kNearPlane)) {
    throw BehindCamera();
  }
  const double lateral = camera.lateral().dot(d);
  return {camera.focal * (lateral / depth) + 0.5 * camera.width, depth};
}

Vec2 projection_jacobian(const CameraPose& camera, const Vec2& point) {
  const Vec2 d = point - camera.position;
  const Vec2 fwd = camera.forward();
  const Vec2 lat = camera.lateral();
  const double depth = fwd.dot(d);
  const double lateral = lat.dot(d);
  return camera.focal * (lat / depth - (lateral / (depth * depth)) * fwd);
}

}  // namespace flatsplat
