#pragma once

// Photometric + structural similarity reconstruction loss for 1D images.

#include <span>
#include <vector>

#include "flatsplat/scene.hpp"

namespace flatsplat {

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

// Normalised Gaussian taps, centre at index window / 2.
std::vector<double> gaussian_window(const SsimParams& params = {});

// Per pixel and channel SSIM with the window truncated and renormalised at the borders.
std::vector<Color> ssim_map(const Image& a, const Image& b, const SsimParams& params = {});

// Mean of ssim_map over pixels and channels.
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

struct GsLoss {
  double value = 0.0;                // mean_x weight(x) * pixel_loss(x)
  std::vector<double> pixel_loss;    // unweighted per-pixel loss
  std::vector<Color> gradient;       // d value / d rendered
};

// pixel_loss(x) = lambda_s (1 - mean_c SSIM(x, c)) / 2 + (1 - lambda_s) mean_c |C - C_gt|.
// `pixel_weights`, when given, weights each pixel's loss term (the clean mask).
// Throws ConfigError when widths differ or are below the SSIM window.
GsLoss gs_loss(const Image& rendered, const Image& reference, double lambda_s,
               std::span<const double> pixel_weights = {}, const SsimParams& params = {});

double mse(const Image& a, const Image& b);

// 10 log10(1 / MSE), capped at 99 dB.
double psnr(const Image& a, const Image& b);

inline constexpr double kPsnrCap = 99.0;

}  // namespace flatsplat
