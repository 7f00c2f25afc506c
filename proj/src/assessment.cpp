#include "flatsplat/assessment.hpp"

#include <algorithm>
#include <cmath>

#include "flatsplat/errors.hpp"

namespace flatsplat {

std::vector<double> residual_map(const Image& rendered, const Image& reference) {
  if (rendered.size() != reference.size()) {
    throw ConfigError("residual_map: width mismatch");
  }
  std::vector<double> r(rendered.size());
  for (std::size_t x = 0; x < r.size(); ++x) {
    double sum = 0.0;
    for (int ch = 0; ch < 3; ++ch) sum += std::abs(rendered[x][ch] - reference[x][ch]);
    r[x] = sum / 3.0;
  }
  return r;
}

std::vector<double> hybrid_map(std::span<const double> residual, std::span<const double> beta_normalized) {
  std::vector<double> h(residual.size());
  for (std::size_t x = 0; x < h.size(); ++x) {
    h[x] = kHybridResidualWeight * residual[x] + (1.0 - kHybridResidualWeight) * beta_normalized[x];
  }
  return h;
}

std::vector<double> texture_map(const Image& reference) {
  const std::size_t n = reference.size();
  std::vector<double> s(n, 0.0);
  if (n == 0) return s;
  for (std::size_t x = 0; x < n; ++x) {
    const Color& left = reference[x == 0 ? 0 : x - 1];
    const Color& right = reference[x + 1 < n ? x + 1 : n - 1];
    double sum = 0.0;
    for (int ch = 0; ch < 3; ++ch) sum += std::abs(right[ch] - left[ch]) / 2.0;
    s[x] = sum / 3.0;
  }
  const double peak = *std::max_element(s.begin(), s.end());
  if (peak < 1e-12) {
    std::fill(s.begin(), s.end(), 0.0);
  } else {
    for (double& v : s) v /= peak;
  }
  return s;
}

CorrectionResult occ_correct(std::span<const double> hybrid, std::span<const double> oc_pixels,
                             std::span<const double> texture) {
  CorrectionResult out;
  out.ocr.resize(hybrid.size());
  out.corrected.resize(hybrid.size());
  for (std::size_t x = 0; x < hybrid.size(); ++x) {
    const double o = std::clamp(oc_pixels[x], 0.0, kCorrectionCeiling);
    const double ratio = std::clamp(1.0 - kCorrectionGain * (kCorrectionCeiling - o) * texture[x], 0.0, 1.0);
    out.ocr[x] = ratio;
    out.corrected[x] = hybrid[x] * ratio;
  }
  return out;
}

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw EmptyInput("percentile of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> normalize_beta(std::span<const double> beta, double scale) {
  std::vector<double> out(beta.size());
  for (std::size_t x = 0; x < beta.size(); ++x) {
    out[x] = scale > 0.0 ? std::clamp(beta[x] / scale, 0.0, 1.0) : 0.0;
  }
  return out;
}

}  // namespace flatsplat
