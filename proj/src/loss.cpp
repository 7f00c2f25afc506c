#include "flatsplat/loss.hpp"

#include <algorithm>
#include <cmath>

#include "flatsplat/errors.hpp"

namespace flatsplat {

std::vector<double> gaussian_window(const SsimParams& params) {
  std::vector<double> w(static_cast<std::size_t>(params.window));
  const int half = params.window / 2;
  double sum = 0.0;
  for (int i = 0; i < params.window; ++i) {
    const double d = i - half;
    w[i] = std::exp(-d * d / (2.0 * params.sigma * params.sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

namespace {

// Windowed first and second moments of one channel pair at every pixel.
struct Moments {
  std::vector<double> mu_a, mu_b, var_a, var_b, cov;
  std::vector<double> norm;  // sum of taps inside the image, per pixel
};

Moments window_moments(const Image& a, const Image& b, int ch, const std::vector<double>& taps) {
  const auto n = static_cast<long>(a.size());
  const long half = static_cast<long>(taps.size()) / 2;
  Moments m;
  m.mu_a.assign(n, 0.0);
  m.mu_b.assign(n, 0.0);
  m.var_a.assign(n, 0.0);
  m.var_b.assign(n, 0.0);
  m.cov.assign(n, 0.0);
  m.norm.assign(n, 0.0);
  for (long x = 0; x < n; ++x) {
    double s = 0.0, sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
    for (long k = -half; k <= half; ++k) {
      const long j = x + k;
      if (j < 0 || j >= n) continue;
      const double w = taps[k + half];
      const double va = a[j][ch];
      const double vb = b[j][ch];
      s += w;
      sa += w * va;
      sb += w * vb;
      saa += w * va * va;
      sbb += w * vb * vb;
      sab += w * va * vb;
    }
    const double ma = sa / s;
    const double mb = sb / s;
    m.norm[x] = s;
    m.mu_a[x] = ma;
    m.mu_b[x] = mb;
    m.var_a[x] = saa / s - ma * ma;
    m.var_b[x] = sbb / s - mb * mb;
    m.cov[x] = sab / s - ma * mb;
  }
  return m;
}

void check_widths(const Image& a, const Image& b, const SsimParams& params) {
  if (a.size() != b.size()) throw ConfigError("image widths differ");
  if (a.size() < static_cast<std::size_t>(params.window)) {
    throw ConfigError("image narrower than the SSIM window");
  }
}

}  // namespace

std::vector<Color> ssim_map(const Image& a, const Image& b, const SsimParams& params) {
  check_widths(a, b, params);
  const auto taps = gaussian_window(params);
  std::vector<Color> out(a.size());
  for (int ch = 0; ch < 3; ++ch) {
    const Moments m = window_moments(a, b, ch, taps);
    for (std::size_t x = 0; x < a.size(); ++x) {
      const double num = (2.0 * m.mu_a[x] * m.mu_b[x] + params.c1) * (2.0 * m.cov[x] + params.c2);
      const double den = (m.mu_a[x] * m.mu_a[x] + m.mu_b[x] * m.mu_b[x] + params.c1) *
                         (m.var_a[x] + m.var_b[x] + params.c2);
      out[x][ch] = num / den;
    }
  }
  return out;
}

double ssim(const Image& a, const Image& b, const SsimParams& params) {
  const auto map = ssim_map(a, b, params);
  double sum = 0.0;
  for (const Color& c : map) sum += c[0] + c[1] + c[2];
  return sum / (3.0 * static_cast<double>(map.size()));
}

GsLoss gs_loss(const Image& rendered, const Image& reference, double lambda_s,
               std::span<const double> pixel_weights, const SsimParams& params) {
  check_widths(rendered, reference, params);
  const std::size_t n = rendered.size();
  if (!pixel_weights.empty() && pixel_weights.size() != n) throw ConfigError("pixel weights do not match the width");
  const auto taps = gaussian_window(params);
  const long half = static_cast<long>(taps.size()) / 2;
  const double inv_n = 1.0 / static_cast<double>(n);
  auto weight = [&](std::size_t x) { return pixel_weights.empty() ? 1.0 : pixel_weights[x]; };

  GsLoss out;
  out.pixel_loss.assign(n, 0.0);
  out.gradient.assign(n, Color{0.0, 0.0, 0.0});
  std::vector<double> ssim_sum(n, 0.0);

  for (int ch = 0; ch < 3; ++ch) {
    const Moments m = window_moments(rendered, reference, ch, taps);
    // dSSIM(x)/dC(j) = w_xj / norm_x * (p(x) + q(x) C(j) + r(x) C_gt(j))
    std::vector<double> p(n), q(n), r(n);
    for (std::size_t x = 0; x < n; ++x) {
      const double a1 = 2.0 * m.mu_a[x] * m.mu_b[x] + params.c1;
      const double a2 = 2.0 * m.cov[x] + params.c2;
      const double b1 = m.mu_a[x] * m.mu_a[x] + m.mu_b[x] * m.mu_b[x] + params.c1;
      const double b2 = m.var_a[x] + m.var_b[x] + params.c2;
      const double s = a1 * a2 / (b1 * b2);
      ssim_sum[x] += s;
      const double d_mu = 2.0 * m.mu_b[x] * a2 / (b1 * b2) - s * 2.0 * m.mu_a[x] / b1;
      const double d_var = -s / b2;
      const double d_cov = 2.0 * a1 / (b1 * b2);
      p[x] = d_mu - 2.0 * m.mu_a[x] * d_var - m.mu_b[x] * d_cov;
      q[x] = 2.0 * d_var;
      r[x] = d_cov;
    }
    // value_ssim = inv_n * sum_x weight(x) * lambda_s * (1 - mean_c SSIM) / 2
    const double coef = -lambda_s * inv_n / 6.0;
    for (std::size_t j = 0; j < n; ++j) {
      double g = 0.0;
      for (long k = -half; k <= half; ++k) {
        const long x = static_cast<long>(j) - k;
        if (x < 0 || x >= static_cast<long>(n)) continue;
        const double w = taps[k + half] / m.norm[x];
        g += weight(x) * w * (p[x] + q[x] * rendered[j][ch] + r[x] * reference[j][ch]);
      }
      const double diff = rendered[j][ch] - reference[j][ch];
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      out.gradient[j][ch] = coef * g + (1.0 - lambda_s) * weight(j) * sign * inv_n / 3.0;
    }
  }

  double total = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    double l1 = 0.0;
    for (int ch = 0; ch < 3; ++ch) l1 += std::abs(rendered[x][ch] - reference[x][ch]);
    const double ssim_term = lambda_s * (1.0 - ssim_sum[x] / 3.0) / 2.0;
    out.pixel_loss[x] = ssim_term + (1.0 - lambda_s) * l1 / 3.0;
    total += weight(x) * out.pixel_loss[x];
  }
  out.value = total * inv_n;
  return out;
}

double mse(const Image& a, const Image& b) {
  if (a.size() != b.size()) throw ConfigError("image widths differ");
  double sum = 0.0;
  for (std::size_t x = 0; x < a.size(); ++x) {
    for (int ch = 0; ch < 3; ++ch) {
      const double d = a[x][ch] - b[x][ch];
      sum += d * d;
    }
  }
  return sum / (3.0 * static_cast<double>(a.size()));
}

double psnr(const Image& a, const Image& b) {
  const double e = mse(a, b);
  if (e <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / e));
}

}  // namespace flatsplat
