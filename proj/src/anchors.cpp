#include "flatsplat/anchors.hpp"

#include <algorithm>
#include <cmath>

#include "flatsplat/assessment.hpp"
#include "flatsplat/errors.hpp"

namespace flatsplat {

void validate(const AnchorConfig& config) {
  if (config.bins < 2) throw ConfigError("histogram needs at least two bins");
  if (!(config.fallback_k >= 0.0)) throw ConfigError("fallback_K must be non-negative");
  if (!(config.fixed_bg_percentile >= 0.0 && config.fixed_bg_percentile <= config.fixed_fg_percentile &&
        config.fixed_fg_percentile <= 100.0)) {
    throw ConfigError("fixed percentiles must satisfy 0 <= bg <= fg <= 100");
  }
  combine_anchors(0.0, 1.0, config.lambda4, config.lambda5);
}

std::size_t histogram_bin(double value, double scale, std::size_t bins) {
  const double v = std::clamp(value / scale, 0.0, 1.0);
  const double b = std::floor(v * static_cast<double>(bins - 1) + 0.5);
  return std::min(static_cast<std::size_t>(std::max(b, 0.0)), bins - 1);
}

AssessmentHistogram build_histogram(std::span<const double> values, int bins, double normalization_percentile) {
  if (values.size() < kMinHistogramSamples) {
    throw EmptyInput("histogram needs at least 1000 samples, got " + std::to_string(values.size()));
  }
  AssessmentHistogram h;
  h.bins.assign(static_cast<std::size_t>(bins), 0);
  double scale = percentile(values, normalization_percentile);
  if (!(scale > 0.0)) scale = *std::max_element(values.begin(), values.end());
  if (!(scale > 0.0)) scale = 1.0;
  h.normalization_scale = scale;
  for (double v : values) ++h.bins[histogram_bin(v, scale, h.bins.size())];
  h.total = values.size();
  return h;
}

OtsuResult otsu(const AssessmentHistogram& hist) {
  const std::size_t levels = hist.bins.size();
  const auto n = static_cast<double>(hist.total);
  std::vector<double> omega(levels);
  std::vector<double> mean(levels);
  double w = 0.0;
  double m = 0.0;
  for (std::size_t i = 0; i < levels; ++i) {
    const double p = static_cast<double>(hist.bins[i]) / n;
    w += p;
    m += static_cast<double>(i) * p;
    omega[i] = w;
    mean[i] = m;
  }
  const double global_mean = mean[levels - 1];

  OtsuResult best;
  best.sigma2_max = -1.0;
  for (std::size_t t = 0; t < levels; ++t) {
    const double num = omega[t] * (global_mean - mean[t]);
    const double sigma2 = num * num / (omega[t] * (1.0 - omega[t]) + kOtsuEpsilon);
    if (sigma2 > best.sigma2_max) {
      best.sigma2_max = sigma2;
      best.t_star = t;
    }
  }
  best.threshold = static_cast<double>(best.t_star) / static_cast<double>(levels);
  return best;
}

double background_centroid(const AssessmentHistogram& hist, std::size_t t_star) {
  const auto n = static_cast<double>(hist.total);
  double mass = 0.0;
  double moment = 0.0;
  for (std::size_t i = 0; i <= t_star && i < hist.bins.size(); ++i) {
    const double p = static_cast<double>(hist.bins[i]) / n;
    mass += p;
    moment += static_cast<double>(i) * p;
  }
  if (!(mass > 0.0)) throw EmptyBackgroundClass();
  return moment / mass / static_cast<double>(hist.bins.size());
}

RefinedThresholds combine_anchors(double t_b, double t_o, double lambda4, double lambda5) {
  const bool in_range = lambda4 >= 0.0 && lambda4 <= 1.0 && lambda5 >= 0.0 && lambda5 <= 1.0;
  if (!in_range || lambda4 > 1.0 - lambda5) {
    throw InvalidLambda("lambda4/lambda5 must lie in [0,1] with lambda4 <= 1 - lambda5");
  }
  return {(1.0 - lambda4) * t_b + lambda4 * t_o, lambda5 * t_b + (1.0 - lambda5) * t_o};
}

std::string to_string(ThresholdMode mode) {
  return mode == ThresholdMode::Dynamic ? "dynamic" : "fixed_fallback";
}

ThresholdMode threshold_mode_from_string(const std::string& s) {
  if (s == "dynamic") return ThresholdMode::Dynamic;
  if (s == "fixed_fallback") return ThresholdMode::FixedFallback;
  throw SchemaError("unknown threshold mode '" + s + "'");
}

ThresholdMode select_mode(double sigma2_max, double k) {
  return sigma2_max > k ? ThresholdMode::Dynamic : ThresholdMode::FixedFallback;
}

ThresholdAnchors compute_anchors(std::span<const double> values, const AnchorConfig& config,
                                 bool allow_dynamic) {
  const AssessmentHistogram hist = build_histogram(values, config.bins, config.normalization_percentile);
  ThresholdAnchors a;
  a.normalization_scale = hist.normalization_scale;
  const OtsuResult o = otsu(hist);
  a.t_star = o.t_star;
  a.sigma2_max = o.sigma2_max;
  a.t_o = o.threshold;
  a.fixed_bg = percentile(values, config.fixed_bg_percentile) / hist.normalization_scale;
  a.fixed_fg = percentile(values, config.fixed_fg_percentile) / hist.normalization_scale;

  a.mode = allow_dynamic ? select_mode(o.sigma2_max, config.fallback_k) : ThresholdMode::FixedFallback;
  try {
    a.t_b = background_centroid(hist, o.t_star);
  } catch (const EmptyBackgroundClass&) {
    a.t_b = a.t_o;
    a.mode = ThresholdMode::FixedFallback;
  }
  const RefinedThresholds r = combine_anchors(a.t_b, a.t_o, config.lambda4, config.lambda5);
  a.t_b2o = r.background_to_object;
  a.t_o2b = r.object_to_background;
  return a;
}

LabelMaps make_labels(std::span<const double> corrected, const ThresholdAnchors& anchors) {
  const bool dynamic = anchors.mode == ThresholdMode::Dynamic;
  const double lo = dynamic ? anchors.t_b2o : anchors.fixed_bg;
  const double hi = dynamic ? anchors.t_o2b : anchors.fixed_fg;
  LabelMaps labels;
  labels.clean.resize(corrected.size());
  labels.valid.resize(corrected.size());
  for (std::size_t x = 0; x < corrected.size(); ++x) {
    const double v = corrected[x] / anchors.normalization_scale;
    const bool clean = v < lo;
    labels.clean[x] = clean ? 1 : 0;
    labels.valid[x] = (clean || v > hi) ? 1 : 0;
  }
  return labels;
}

LabelMaps fixed_labels(std::span<const double> values, double bg_percentile, double fg_percentile) {
  const double lo = percentile(values, bg_percentile);
  const double hi = percentile(values, fg_percentile);
  LabelMaps labels;
  labels.clean.resize(values.size());
  labels.valid.resize(values.size());
  for (std::size_t x = 0; x < values.size(); ++x) {
    const bool clean = values[x] < lo;
    labels.clean[x] = clean ? 1 : 0;
    labels.valid[x] = (clean || values[x] > hi) ? 1 : 0;
  }
  return labels;
}

}  // namespace flatsplat
