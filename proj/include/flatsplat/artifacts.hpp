#pragma once

// Files written by the command-line tool: checkpoints, metrics, anchors,
// per-primitive OC tables and rendered scanlines.

#include <filesystem>
#include <string>
#include <vector>

#include "flatsplat/json_io.hpp"
#include "flatsplat/trainer.hpp"

namespace flatsplat {

json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const json& j);

// Everything needed to evaluate or render without retraining. Optimiser
// moments are not stored.
std::string serialize_checkpoint(const TrainState& state, const TrainConfig& config);
void save_checkpoint(const TrainState& state, const TrainConfig& config, const std::filesystem::path& path);

struct Checkpoint {
  TrainConfig config;
  TrainState state;  // features and caches are rebuilt from the dataset by restore()
};

Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint parse_checkpoint(const std::string& text);

// Attaches a dataset's static per-view features to a loaded state.
void restore(TrainState& state, const Dataset& dataset);

inline constexpr const char* kMetricsHeader = "iter,psnr,ssim,mask_iou,mask_f1,n_gaussians";
inline constexpr const char* kAnchorsHeader = "t_star,sigma2_max,T_o,T_b,T_b2o,T_o2b,mode";
inline constexpr const char* kOcHeader = "index,m,oc";

std::string metrics_row(const MetricsRow& row);
std::string anchors_row(const ThresholdAnchors& anchors);

std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::string oc_csv(const std::vector<ObservationStats>& stats);

// "SPLAT1D <width>" then one "r g b" line per pixel.
std::string image_text(const Image& image);
Image parse_image_text(const std::string& text);

// One value per line.
std::string scalar_text(const std::vector<double>& values);

std::string read_text(const std::filesystem::path& path);

}  // namespace flatsplat
