#pragma once

// Per-view noise assessment maps: residual, hybrid residual/uncertainty mix,
// texture intensity, and the observation correction that damps assessments in
// textured regions the scene has not yet seen enough of.

#include <span>
#include <vector>

#include "flatsplat/scene.hpp"

namespace flatsplat {

inline constexpr double kHybridResidualWeight = 0.5;
inline constexpr double kCorrectionGain = 3.0;
inline constexpr double kCorrectionCeiling = 0.3;

struct AssessmentMaps {
  std::vector<double> residual;
  std::vector<double> beta;
  std::vector<double> hybrid;
  std::vector<double> texture;
  std::vector<double> ocr;
  std::vector<double> corrected;
  std::vector<double> oc_pixels;
};

// Mean absolute channel difference per pixel. Throws ConfigError on width mismatch.
std::vector<double> residual_map(const Image& rendered, const Image& reference);

// 0.5 R + 0.5 beta_norm
std::vector<double> hybrid_map(std::span<const double> residual, std::span<const double> beta_normalized);

// Central-difference gradient magnitude averaged over channels, replicate
// padded, divided by its maximum (all zeros when the maximum is below 1e-12).
std::vector<double> texture_map(const Image& reference);

struct CorrectionResult {
  std::vector<double> ocr;
  std::vector<double> corrected;
};

// OCR = clamp(1 - 3 (0.3 - clamp(O, 0, 0.3)) S, 0, 1); corrected = hybrid * OCR.
CorrectionResult occ_correct(std::span<const double> hybrid, std::span<const double> oc_pixels,
                             std::span<const double> texture);

// Linear-interpolation percentile (q in [0, 100]) of a non-empty sample.
double percentile(std::span<const double> values, double q);

// beta / scale clamped to [0, 1].
std::vector<double> normalize_beta(std::span<const double> beta, double scale);

}  // namespace flatsplat
