#pragma once

// Self-supervised clean/noise labels from a histogram of corrected noise
// assessments: a maximum inter-class variance anchor, a background centroid
// anchor, and the refined thresholds interpolated between them.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace flatsplat {

struct AnchorConfig {
  double lambda4 = 0.25;
  double lambda5 = 0.25;
  int bins = 1000;
  double fallback_k = 2000.0;
  double fixed_bg_percentile = 50.0;
  double fixed_fg_percentile = 90.0;
  double normalization_percentile = 99.5;

  bool operator==(const AnchorConfig&) const = default;
};

void validate(const AnchorConfig& config);

inline constexpr double kOtsuEpsilon = 1e-8;
inline constexpr std::size_t kMinHistogramSamples = 1000;

struct AssessmentHistogram {
  std::vector<std::uint64_t> bins;
  std::uint64_t total = 0;
  double normalization_scale = 1.0;  // value mapped to the top bin
};

// Throws EmptyInput for fewer than 1000 samples.
AssessmentHistogram build_histogram(std::span<const double> values, int bins = 1000,
                                    double normalization_percentile = 99.5);

std::size_t histogram_bin(double value, double scale, std::size_t bins);

struct OtsuResult {
  std::size_t t_star = 0;
  double sigma2_max = 0.0;
  double threshold = 0.0;  // t_star / L
};

// sigma^2(t) = [w(t) (M_global - M(t))]^2 / (w(t) (1 - w(t)) + eps), argmax with
// the lowest index winning ties.
OtsuResult otsu(const AssessmentHistogram& hist);

// Centroid of the mass at or below t_star, divided by L. Throws EmptyBackgroundClass.
double background_centroid(const AssessmentHistogram& hist, std::size_t t_star);

struct RefinedThresholds {
  double background_to_object;  // (1 - l4) T_b + l4 T_o
  double object_to_background;  // l5 T_b + (1 - l5) T_o
};

// Throws InvalidLambda unless l4, l5 in [0, 1] and l4 <= 1 - l5.
RefinedThresholds combine_anchors(double t_b, double t_o, double lambda4, double lambda5);

enum class ThresholdMode { Dynamic, FixedFallback };

std::string to_string(ThresholdMode mode);
ThresholdMode threshold_mode_from_string(const std::string& s);

// Dynamic iff sigma2_max > k.
ThresholdMode select_mode(double sigma2_max, double k = 2000.0);

// Thresholds are in normalised units (value / normalization_scale).
struct ThresholdAnchors {
  std::size_t t_star = 0;
  double sigma2_max = 0.0;
  double t_o = 0.0;
  double t_b = 0.0;
  double t_b2o = 0.0;
  double t_o2b = 0.0;
  ThresholdMode mode = ThresholdMode::FixedFallback;
  double normalization_scale = 1.0;
  double fixed_bg = 0.0;  // fallback percentiles, normalised
  double fixed_fg = 0.0;

  bool operator==(const ThresholdAnchors&) const = default;
};

// Full anchor pipeline over every sample of a round. With allow_dynamic false
// the fixed-percentile fallback is forced.
ThresholdAnchors compute_anchors(std::span<const double> values, const AnchorConfig& config,
                                 bool allow_dynamic = true);

struct LabelMaps {
  std::vector<std::uint8_t> clean;  // M_self
  std::vector<std::uint8_t> valid;  // M_u
};

// M_self = v < T_b2o, M_u = M_self or v > T_o2b (dynamic mode), or the
// percentile thresholds in fallback mode, with v = value / normalization_scale.
LabelMaps make_labels(std::span<const double> corrected, const ThresholdAnchors& anchors);

// Fallback labels over `values` alone: clean below the bg percentile, noise above the fg percentile.
LabelMaps fixed_labels(std::span<const double> values, double bg_percentile = 50.0,
                       double fg_percentile = 90.0);

}  // namespace flatsplat
