#pragma once

// Synthetic flatland benchmark: a static wall of Gaussians seen by cameras in
// [0,1]^2, with transient distractor Gaussians composited into some training
// views, and the text file format the datasets are stored in.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flatsplat/scene.hpp"

namespace flatsplat {

enum class CameraLayout {
  Spread,     // every camera aims somewhere across the middle of the wall
  Clustered,  // most cameras aim left; a few views cover the right end
};

std::string to_string(CameraLayout layout);
CameraLayout camera_layout_from_string(const std::string& s);

struct SceneConfig {
  int n_background_gaussians = 48;
  int n_views = 40;
  int image_width = 64;
  double distractor_view_fraction = 0.3;
  int distractors_per_view = 1;
  std::uint64_t rng_seed = 0;
  double world_extent = 4.0;  // length of the wall

  int n_test_views = 8;
  double wall_color_jitter = 0.06;  // per-splat colour spread within a wall segment
  double detailed_fraction = 0.0;   // right-hand share of the wall where every splat has its own colour
  double focal_ratio = 1.0;  // focal = focal_ratio * image_width
  double distractor_min_px = 3.0;  // projected distractor std, pixels
  double distractor_max_px = 7.0;
  int distractor_parts = 1;  // splats per distractor, laid side by side
  CameraLayout layout = CameraLayout::Spread;
  int sparse_views = 3;  // Clustered only: views aimed at the right end
  // World length of a busy wall segment. When positive, distractors stand in
  // front of it and the views that see it are the first to carry them.
  double hotspot_width = 0.0;
  double image_noise_std = 0.0;  // Gaussian sensor noise on training images, clamped to [0,1]
  bool dark_distractors = false;  // distractors darker than every wall colour

  bool operator==(const SceneConfig&) const = default;
};

void validate(const SceneConfig& config);

struct Dataset {
  SceneConfig config;
  std::vector<GaussianPrimitive> primitives;  // static scene only
  std::vector<ViewRecord> views;              // training views
  std::vector<ViewRecord> test_views;         // held out, never contain distractors

  bool operator==(const Dataset&) const = default;
};

inline constexpr double kDistractorMaskWeight = 0.5;

Dataset generate_dataset(const SceneConfig& config);

inline constexpr int kSchemaVersion = 1;

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

std::string serialize_dataset(const Dataset& dataset);
Dataset parse_dataset(const std::string& text);

}  // namespace flatsplat
