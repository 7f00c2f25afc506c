#include "flatsplat/render.hpp"

#include <algorithm>
#include <cmath>

#include "flatsplat/parallel.hpp"

namespace flatsplat {

std::optional<Splat1D> project_gaussian(const GaussianPrimitive& g, const CameraPose& camera,
                                        std::size_t index) {
  const Vec2 d = g.position - camera.position;
  const double depth = camera.forward().dot(d);
  if (!(depth > kNearPlane)) return std::nullopt;

  const PointProjection p = project_point(camera, g.position);
  const Vec2 jac = projection_jacobian(camera, g.position);
  const double var_u = jac.dot(g.covariance() * jac) + kVarianceFloor;
  const double reach = kCullSigmas * std::sqrt(var_u);
  if (p.u < -reach || p.u >= camera.width + reach) return std::nullopt;

  Splat1D s;
  s.mean_u = p.u;
  s.var_u = var_u;
  s.depth = p.depth;
  s.opacity = g.opacity();
  s.color = g.color;
  s.source_index = index;
  return s;
}

void sort_by_depth(std::vector<Splat1D>& splats) {
  std::sort(splats.begin(), splats.end(), [](const Splat1D& a, const Splat1D& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.source_index < b.source_index;
  });
}

std::vector<Splat1D> project_scene(std::span<const GaussianPrimitive> scene, const CameraPose& camera) {
  std::vector<Splat1D> splats;
  splats.reserve(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (auto s = project_gaussian(scene[i], camera, i)) splats.push_back(*s);
  }
  sort_by_depth(splats);
  return splats;
}

RenderOutput render_color(std::vector<Splat1D> splats, int width, const RenderSettings& settings,
                          std::span<const double> oc_values) {
  sort_by_depth(splats);
  const auto n = static_cast<std::size_t>(width);
  RenderOutput out;
  out.width = width;
  out.color.assign(n, settings.background);
  out.weight_sums.assign(n, 0.0);
  out.final_transmittance.assign(n, 1.0);
  if (!oc_values.empty()) out.oc.assign(n, 0.0);
  out.splats = std::move(splats);

  const std::size_t blocks = block_count(n);
  std::vector<std::vector<Contribution>> block_contribs(blocks);
  std::vector<std::size_t> counts(n, 0);

  for_each_block(n, settings.threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
    auto& local = block_contribs[b];
    for (std::size_t x = begin; x < end; ++x) {
      const double px = static_cast<double>(x);
      double t = 1.0;
      Color c{0.0, 0.0, 0.0};
      double wsum = 0.0;
      double o = 0.0;
      std::size_t count = 0;
      for (std::size_t k = 0; k < out.splats.size(); ++k) {
        const Splat1D& s = out.splats[k];
        const double alpha = s.opacity * splat_profile(s, px);
        if (alpha == 0.0) continue;
        const double w = alpha * t;
        for (int ch = 0; ch < 3; ++ch) c[ch] += w * s.color[ch];
        wsum += w;
        if (!oc_values.empty()) o += w * oc_values[s.source_index];
        local.push_back({static_cast<std::uint32_t>(k), alpha, t});
        ++count;
        t *= 1.0 - alpha;
        if (settings.early_stop && t < kEarlyStopTransmittance) break;
      }
      for (int ch = 0; ch < 3; ++ch) out.color[x][ch] = c[ch] + t * settings.background[ch];
      out.weight_sums[x] = wsum;
      out.final_transmittance[x] = t;
      if (!oc_values.empty()) out.oc[x] = o;
      counts[x] = count;
    }
  });

  out.offsets.assign(n + 1, 0);
  for (std::size_t x = 0; x < n; ++x) out.offsets[x + 1] = out.offsets[x] + counts[x];
  out.contributions.reserve(out.offsets[n]);
  for (auto& local : block_contribs) {
    out.contributions.insert(out.contributions.end(), local.begin(), local.end());
  }
  return out;
}

std::vector<double> render_oc(const RenderOutput& rendered, std::span<const double> oc_values) {
  const auto n = static_cast<std::size_t>(rendered.width);
  std::vector<double> oc(n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    double o = 0.0;
    for (const Contribution& c : rendered.pixel(x)) {
      o += c.weight() * oc_values[rendered.splats[c.splat].source_index];
    }
    oc[x] = o;
  }
  return oc;
}

std::vector<double> render_oc(std::vector<Splat1D> splats, std::span<const double> oc_values, int width,
                              const RenderSettings& settings) {
  return render_oc(render_color(std::move(splats), width, settings), oc_values);
}

RenderOutput render(std::span<const GaussianPrimitive> scene, const CameraPose& camera,
                    const RenderSettings& settings, std::span<const double> oc_values) {
  return render_color(project_scene(scene, camera), camera.width, settings, oc_values);
}

namespace {

struct SplatAccum {
  double d_mean = 0.0;
  double d_var = 0.0;
  double d_alpha = 0.0;  // w.r.t. the splat opacity (before the profile)
  Color d_color{0.0, 0.0, 0.0};
};

}  // namespace

PrimitiveGradients backward(std::span<const GaussianPrimitive> scene, const CameraPose& camera,
                            const RenderOutput& forward, std::span<const Color> dloss_dcolor,
                            const RenderSettings& settings) {
  const auto n = static_cast<std::size_t>(forward.width);
  const std::size_t n_splats = forward.splats.size();
  const std::size_t blocks = block_count(n);
  std::vector<std::vector<SplatAccum>> partial(blocks);

  for_each_block(n, settings.threads, [&](std::size_t b, std::size_t begin, std::size_t end) {
    auto& acc = partial[b];
    acc.assign(n_splats, SplatAccum{});
    for (std::size_t x = begin; x < end; ++x) {
      const Color& g = dloss_dcolor[x];
      if (g[0] == 0.0 && g[1] == 0.0 && g[2] == 0.0) continue;
      const double px = static_cast<double>(x);
      const auto contribs = forward.pixel(x);
      // Colour composited behind the current splat, without the transmittance in front of it.
      Color behind = settings.background;
      for (std::size_t i = contribs.size(); i-- > 0;) {
        const Contribution& c = contribs[i];
        const Splat1D& s = forward.splats[c.splat];
        SplatAccum& a = acc[c.splat];
        double d_alpha_eff = 0.0;
        for (int ch = 0; ch < 3; ++ch) {
          a.d_color[ch] += g[ch] * c.weight();
          d_alpha_eff += g[ch] * c.transmittance * (s.color[ch] - behind[ch]);
        }
        const double profile = c.alpha / s.opacity;
        const double dx = px - s.mean_u;
        a.d_alpha += d_alpha_eff * profile;
        a.d_mean += d_alpha_eff * c.alpha * dx / s.var_u;
        a.d_var += d_alpha_eff * c.alpha * 0.5 * dx * dx / (s.var_u * s.var_u);
        for (int ch = 0; ch < 3; ++ch) behind[ch] = c.alpha * s.color[ch] + (1.0 - c.alpha) * behind[ch];
      }
    }
  });

  std::vector<SplatAccum> total(n_splats);
  for (const auto& acc : partial) {
    for (std::size_t k = 0; k < n_splats; ++k) {
      total[k].d_mean += acc[k].d_mean;
      total[k].d_var += acc[k].d_var;
      total[k].d_alpha += acc[k].d_alpha;
      for (int ch = 0; ch < 3; ++ch) total[k].d_color[ch] += acc[k].d_color[ch];
    }
  }

  PrimitiveGradients grads(scene.size());
  const Vec2 fwd = camera.forward();
  const Vec2 lat = camera.lateral();
  for (std::size_t k = 0; k < n_splats; ++k) {
    const Splat1D& s = forward.splats[k];
    const std::size_t i = s.source_index;
    const GaussianPrimitive& prim = scene[i];
    const SplatAccum& a = total[k];

    const Vec2 d = prim.position - camera.position;
    const double z = fwd.dot(d);
    const double l = lat.dot(d);
    const Vec2 jac = projection_jacobian(camera, prim.position);
    const Mat2 cov = prim.covariance();
    const Vec2 cov_j = cov * jac;

    // var = J^T Sigma J + floor; J depends on position through depth and lateral offset.
    const double cj_lat = cov_j.dot(lat);
    const double cj_fwd = cov_j.dot(fwd);
    const Vec2 dvar_dpos = 2.0 * camera.focal *
                           ((-cj_lat / (z * z)) * fwd - (cj_fwd / (z * z)) * lat +
                            (2.0 * l * cj_fwd / (z * z * z)) * fwd);
    const Vec2 d_pos = a.d_mean * jac + a.d_var * dvar_dpos;

    const double cr = std::cos(prim.rotation);
    const double sr = std::sin(prim.rotation);
    const double a1 = jac.dot(Vec2(cr, sr));
    const double a2 = jac.dot(Vec2(-sr, cr));
    const double s1 = prim.scale.x();
    const double s2 = prim.scale.y();

    grads.position[i] = d_pos;
    grads.scale[i] = Vec2(a.d_var * 2.0 * s1 * a1 * a1, a.d_var * 2.0 * s2 * a2 * a2);
    grads.rotation[i] = a.d_var * 2.0 * a1 * a2 * (s1 * s1 - s2 * s2);
    grads.opacity_logit[i] = a.d_alpha * s.opacity * (1.0 - s.opacity);
    grads.color[i] = a.d_color;
    grads.grad_p[i] = d_pos.norm();
  }
  return grads;
}

}  // namespace flatsplat
