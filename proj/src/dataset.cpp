#include "flatsplat/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "flatsplat/errors.hpp"
#include "flatsplat/json_io.hpp"
#include "flatsplat/render.hpp"
#include "flatsplat/rng.hpp"

namespace flatsplat {

std::string to_string(CameraLayout layout) {
  return layout == CameraLayout::Spread ? "spread" : "clustered";
}

CameraLayout camera_layout_from_string(const std::string& s) {
  if (s == "spread") return CameraLayout::Spread;
  if (s == "clustered") return CameraLayout::Clustered;
  throw SchemaError("unknown camera layout '" + s + "'");
}

void validate(const SceneConfig& c) {
  if (c.n_background_gaussians <= 0 || c.n_views <= 0 || c.distractors_per_view <= 0 || c.distractor_parts <= 0 || c.wall_color_jitter < 0.0 ||
      !(c.detailed_fraction >= 0.0 && c.detailed_fraction <= 1.0) || c.n_test_views < 0) {
    throw ConfigError("scene counts must be positive");
  }
  if (c.image_width < 11) throw ConfigError("image_width must be at least the SSIM window (11)");
  if (!(c.distractor_view_fraction >= 0.0 && c.distractor_view_fraction <= 1.0)) {
    throw ConfigError("distractor_view_fraction must lie in [0,1]");
  }
  if (!(c.world_extent > 0.0) || !(c.focal_ratio > 0.0)) {
    throw ConfigError("world_extent and focal_ratio must be positive");
  }
  if (!(c.distractor_min_px > 0.0 && c.distractor_min_px <= c.distractor_max_px)) {
    throw ConfigError("distractor pixel sizes must satisfy 0 < min <= max");
  }
  if (!(c.hotspot_width >= 0.0) || !(c.image_noise_std >= 0.0)) {
    throw ConfigError("hotspot_width and image_noise_std must be non-negative");
  }
  if (c.layout == CameraLayout::Clustered && (c.sparse_views < 1 || c.sparse_views >= c.n_views)) {
    throw ConfigError("clustered layout needs 1 <= sparse_views < n_views");
  }
}

namespace {

constexpr double kWallDepth = 2.0;      // mean y of the wall
constexpr double kWallWave = 0.15;
constexpr double kWallThickness = 0.03;
constexpr double kWallOpacityLogit = 4.0;
constexpr double kDistractorOpacityLogit = 5.0;

double wall_y(double x, double extent) {
  return kWallDepth + kWallWave * std::sin(2.0 * std::numbers::pi * 1.3 * x / extent);
}

std::vector<GaussianPrimitive> make_wall(const SceneConfig& c, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double left = 0.5 - 0.5 * c.world_extent;
  const double spacing = c.world_extent / c.n_background_gaussians;

  std::vector<GaussianPrimitive> wall;
  wall.reserve(c.n_background_gaussians);
  Color base{};
  int segment_left = 0;
  for (int i = 0; i < c.n_background_gaussians; ++i) {
    const bool detailed = i >= c.n_background_gaussians * (1.0 - c.detailed_fraction);
    if (detailed) {
      for (double& ch : base) ch = unit(rng) < 0.5 ? 0.15 : 0.85;
      segment_left = 1;
    } else if (segment_left == 0) {
      // Muted palette: channels in [0.25, 0.75], pulled towards their grey level.
      for (double& ch : base) ch = 0.25 + 0.5 * unit(rng);
      const double grey = (base[0] + base[1] + base[2]) / 3.0;
      for (double& ch : base) ch = grey + 0.7 * (ch - grey);
      segment_left = 2 + static_cast<int>(unit(rng) * 5.0);
    }
    --segment_left;

    GaussianPrimitive g;
    const double x = left + (i + 0.5) * spacing + 0.2 * spacing * (unit(rng) - 0.5);
    g.position = Vec2(x, wall_y(x, c.world_extent) + 0.02 * (unit(rng) - 0.5));
    const double slope = std::cos(2.0 * std::numbers::pi * 1.3 * x / c.world_extent) * kWallWave * 2.0 *
                         std::numbers::pi * 1.3 / c.world_extent;
    g.rotation = std::atan(slope);
    g.scale = Vec2(spacing * (0.55 + 0.25 * unit(rng)), kWallThickness);
    g.opacity_logit = kWallOpacityLogit;
    for (int ch = 0; ch < 3; ++ch) g.color[ch] = std::clamp(base[ch] + c.wall_color_jitter * (unit(rng) - 0.5), 0.0, 1.0);
    wall.push_back(g);
  }
  return wall;
}

// Test cameras aim at the middle half of the range training cameras cover, so
// held-out views interpolate the training coverage.
CameraPose make_camera(const SceneConfig& c, Rng& rng, bool sparse, double spread = 1.0) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CameraPose cam;
  cam.width = c.image_width;
  cam.focal = c.focal_ratio * c.image_width;
  cam.position = Vec2(unit(rng), 0.5 * unit(rng));
  double target_x = 0.0;
  const double half = 0.5 * c.world_extent;
  if (c.layout == CameraLayout::Spread) {
    target_x = 0.5 + spread * (unit(rng) - 0.5) * 0.375 * c.world_extent;
  } else if (!sparse) {
    target_x = 0.5 - 0.2 * half + spread * (unit(rng) - 0.5) * 0.3 * c.world_extent;
  } else {
    cam.position.x() = 0.8 + 0.2 * cam.position.x();
    cam.position.y() = 0.3 * cam.position.y();
    target_x = 0.5 + 0.8 * half + (unit(rng) - 0.5) * 0.1 * c.world_extent;
  }
  const Vec2 target(target_x, wall_y(target_x, c.world_extent));
  const Vec2 d = target - cam.position;
  cam.heading = std::atan2(d.y(), d.x());
  return cam;
}

bool sees(const CameraPose& cam, const Vec2& point) {
  const Vec2 d = point - cam.position;
  const double depth = d.dot(cam.forward());
  if (depth <= kNearPlane) return false;
  const double u = cam.focal * d.dot(cam.lateral()) / depth + 0.5 * cam.width;
  return u >= 0.0 && u < cam.width;
}

std::vector<GaussianPrimitive> make_distractor(const SceneConfig& c, const CameraPose& cam, Rng& rng,
                                               double hotspot_x) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = cam.width * (0.1 + 0.8 * unit(rng));
  double depth = 0.3 + 0.6 * unit(rng);
  if (c.hotspot_width > 0.0) {
    const double x = hotspot_x + (unit(rng) - 0.5) * c.hotspot_width;
    const Vec2 target(x, wall_y(x, c.world_extent));
    if (sees(cam, target)) {
      const Vec2 d = target - cam.position;
      const double wall_depth = d.dot(cam.forward());
      u = cam.focal * d.dot(cam.lateral()) / wall_depth + 0.5 * cam.width;
      depth = wall_depth * (0.4 + 0.5 * unit(rng));
    }
  }
  const double lateral = (u - 0.5 * cam.width) * depth / cam.focal;
  const double sigma_px = c.distractor_min_px + (c.distractor_max_px - c.distractor_min_px) * unit(rng);

  GaussianPrimitive g;
  g.position = cam.position + depth * cam.forward() + lateral * cam.lateral();
  g.rotation = cam.heading + 0.5 * std::numbers::pi;
  g.scale = Vec2(sigma_px * depth / cam.focal, 0.02);
  g.opacity_logit = kDistractorOpacityLogit;
  const int dominant = static_cast<int>(unit(rng) * 3.0) % 3;
  for (int ch = 0; ch < 3; ++ch) {
    if (c.dark_distractors) {
      g.color[ch] = ch == dominant ? 0.1 + 0.1 * unit(rng) : 0.08 * unit(rng);
    } else {
      // Saturated: one dominant channel, the others near zero or near one.
      g.color[ch] = ch == dominant ? 0.85 + 0.15 * unit(rng) : (unit(rng) < 0.3 ? 0.8 + 0.2 * unit(rng) : 0.15 * unit(rng));
    }
  }
  if (c.distractor_parts == 1) return {g};
  // A row of narrower splats at one depth: a flat core with short tails.
  const double part_px = 2.0 * sigma_px / (c.distractor_parts + 1);
  std::vector<GaussianPrimitive> parts;
  for (int j = 0; j < c.distractor_parts; ++j) {
    GaussianPrimitive part = g;
    const double offset_px = (j - 0.5 * (c.distractor_parts - 1)) * part_px;
    part.position += offset_px * depth / cam.focal * cam.lateral();
    part.scale.x() = part_px * depth / cam.focal;
    parts.push_back(part);
  }
  return parts;
}

ViewRecord make_view(const std::vector<GaussianPrimitive>& wall, const std::vector<GaussianPrimitive>& distractors,
                     const CameraPose& cam, int image_id) {
  std::vector<GaussianPrimitive> joint = wall;
  joint.insert(joint.end(), distractors.begin(), distractors.end());
  const RenderOutput out = render(joint, cam);

  ViewRecord v;
  v.camera = cam;
  v.image = out.color;
  v.image_id = image_id;
  Mask mask(out.color.size(), 0);
  for (std::size_t x = 0; x < mask.size(); ++x) {
    double w = 0.0;
    for (const Contribution& contrib : out.pixel(x)) {
      if (out.splats[contrib.splat].source_index >= wall.size()) w += contrib.weight();
    }
    mask[x] = w > kDistractorMaskWeight ? 1 : 0;
  }
  v.gt_mask = std::move(mask);
  return v;
}

}  // namespace

Dataset generate_dataset(const SceneConfig& config) {
  validate(config);
  Rng rng = make_stream(config.rng_seed, "dataset");
  Dataset ds;
  ds.config = config;
  ds.primitives = make_wall(config, rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double hotspot_x = 0.5 + (unit(rng) - 0.5) * 0.2 * config.world_extent;

  const auto n_views = static_cast<std::size_t>(config.n_views);
  std::vector<std::size_t> order(n_views);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> sparse(n_views, false);
  if (config.layout == CameraLayout::Clustered) {
    // The sparse views are the last ones in the shuffled order, so they are not
    // preferentially the distracted ones.
    for (int i = 0; i < config.sparse_views; ++i) sparse[order[n_views - 1 - i]] = true;
  }
  std::vector<CameraPose> cameras;
  for (std::size_t i = 0; i < n_views; ++i) cameras.push_back(make_camera(config, rng, sparse[i]));

  if (config.hotspot_width > 0.0) {
    const Vec2 hotspot(hotspot_x, wall_y(hotspot_x, config.world_extent));
    std::stable_partition(order.begin(), order.end(), [&](std::size_t v) { return sees(cameras[v], hotspot); });
  }
  const auto n_distracted = static_cast<std::size_t>(std::lround(config.distractor_view_fraction * config.n_views));
  std::vector<bool> distracted(n_views, false);
  for (std::size_t i = 0; i < n_distracted; ++i) distracted[order[i]] = true;

  for (std::size_t i = 0; i < n_views; ++i) {
    std::vector<GaussianPrimitive> distractors;
    if (distracted[i]) {
      for (int d = 0; d < config.distractors_per_view; ++d) {
        const std::vector<GaussianPrimitive> object = make_distractor(config, cameras[i], rng, hotspot_x);
        distractors.insert(distractors.end(), object.begin(), object.end());
      }
    }
    ds.views.push_back(make_view(ds.primitives, distractors, cameras[i], static_cast<int>(i)));
  }
  if (config.image_noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, config.image_noise_std);
    for (ViewRecord& v : ds.views) {
      for (Color& px : v.image) {
        for (double& ch : px) ch = std::clamp(ch + noise(rng), 0.0, 1.0);
      }
    }
  }
  for (int i = 0; i < config.n_test_views; ++i) {
    const CameraPose cam = make_camera(config, rng, false, 0.5);
    ds.test_views.push_back(make_view(ds.primitives, {}, cam, config.n_views + i));
  }
  return ds;
}

std::string serialize_dataset(const Dataset& ds) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "dataset";
  doc["config"] = to_json(ds.config);
  doc["primitives"] = json::array();
  for (const auto& g : ds.primitives) doc["primitives"].push_back(to_json(g));
  doc["views"] = json::array();
  for (const auto& v : ds.views) doc["views"].push_back(to_json(v));
  doc["test_views"] = json::array();
  for (const auto& v : ds.test_views) doc["test_views"].push_back(to_json(v));
  return doc.dump();
}

namespace {

Dataset dataset_from_document(const json& doc) {
  return with_schema_errors([&] {
    Dataset ds;
    ds.config = scene_config_from_json(doc.at("config"));
    for (const json& g : doc.at("primitives")) ds.primitives.push_back(primitive_from_json(g));
    for (const json& v : doc.at("views")) ds.views.push_back(view_from_json(v));
    for (const json& v : doc.at("test_views")) ds.test_views.push_back(view_from_json(v));
    return ds;
  });
}

}  // namespace

Dataset parse_dataset(const std::string& text) { return dataset_from_document(parse_document(text, "dataset")); }

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_text_atomic(path, serialize_dataset(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) {
  return dataset_from_document(read_document(path, "dataset"));
}

}  // namespace flatsplat
