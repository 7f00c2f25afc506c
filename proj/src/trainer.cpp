#include "flatsplat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flatsplat/errors.hpp"
#include "flatsplat/loss.hpp"

namespace flatsplat {

void disable(Ablations& a, const std::string& name) {
  if (name == "occ") {
    a.occ = false;
  } else if (name == "ocp") {
    a.ocp = false;
  } else if (name == "hybrid") {
    a.assessment = AssessmentMode::ResidualOnly;
  } else if (name == "dynamic-threshold") {
    a.dynamic_threshold = false;
  } else if (name == "masking") {
    a.masking = false;
  } else {
    throw ConfigError("unknown ablation '" + name + "'");
  }
}

void validate(const TrainConfig& c) {
  if (c.iterations < 0) throw ConfigError("iterations must be non-negative");
  if (!(c.lambda_s >= 0.0 && c.lambda_s <= 1.0)) throw ConfigError("lambda_s must lie in [0,1]");
  if (c.densify_interval < 0 || c.eval_every < 0 || c.warmup_iters < -1) {
    throw ConfigError("intervals must be non-negative");
  }
  if (!(c.densify_grad_threshold > 0.0) || !(c.opacity_prune_threshold > 0.0) || !(c.split_scale > 0.0)) {
    throw ConfigError("densification thresholds must be positive");
  }
  if (c.threads < 1) throw ConfigError("threads must be at least 1");
  if (c.n_init_primitives < 1 || c.max_primitives < c.n_init_primitives) {
    throw ConfigError("need 1 <= n_init_primitives <= max_primitives");
  }
  if (!(c.init_jitter >= 0.0)) throw ConfigError("init_jitter must be non-negative");
  validate(c.anchors);
}

int densify_interval(const TrainConfig& c, const Dataset& ds) {
  return c.densify_interval > 0 ? c.densify_interval : static_cast<int>(ds.views.size());
}

int warmup_iterations(const TrainConfig& c, const Dataset& ds) {
  return c.warmup_iters >= 0 ? c.warmup_iters : 3 * densify_interval(c, ds);
}

namespace {

constexpr double kInitScale = 0.05;
constexpr double kInitOpacityLogit = -2.0;
constexpr double kSplitScaleDivisor = 1.6;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;

RenderSettings render_settings(const TrainConfig& c) {
  RenderSettings s;
  s.threads = c.threads;
  return s;
}

std::vector<double> oc_values(const TrainState& state) {
  std::vector<double> oc(state.stats.size());
  for (std::size_t i = 0; i < oc.size(); ++i) oc[i] = state.stats[i].oc;
  return oc;
}

template <typename T>
void keep_rows(std::vector<T>& v, const std::vector<bool>& removed) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < v.size(); ++r) {
    if (!removed[r]) v[w++] = std::move(v[r]);
  }
  v.resize(w);
}

void remove_rows(TrainState& s, const std::vector<bool>& removed) {
  keep_rows(s.primitives, removed);
  keep_rows(s.stats, removed);
  keep_rows(s.moments, removed);
  keep_rows(s.grad_accum, removed);
  keep_rows(s.grad_count, removed);
  keep_rows(s.origin, removed);
}

// Adam on the internal parameterisation: position, log scale, rotation, opacity logit, colour.
void step_primitives(TrainState& s, const PrimitiveGradients& g, const LearningRates& lr) {
  s.primitive_steps += 1;
  const auto t = static_cast<double>(s.primitive_steps);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  const std::array<double, 9> rates{lr.position,      lr.position, lr.log_scale, lr.log_scale, lr.rotation,
                                    lr.opacity_logit, lr.color,    lr.color,     lr.color};
  for (std::size_t i = 0; i < s.primitives.size(); ++i) {
    GaussianPrimitive& p = s.primitives[i];
    const std::array<double, 9> grad{g.position[i].x(), g.position[i].y(), g.scale[i].x() * p.scale.x(),
                                     g.scale[i].y() * p.scale.y(), g.rotation[i], g.opacity_logit[i],
                                     g.color[i][0], g.color[i][1], g.color[i][2]};
    if (std::all_of(grad.begin(), grad.end(), [](double v) { return v == 0.0; })) continue;
    PrimitiveMoments& mo = s.moments[i];
    std::array<double, 9> delta{};
    for (std::size_t k = 0; k < 9; ++k) {
      mo.m[k] = kAdamBeta1 * mo.m[k] + (1.0 - kAdamBeta1) * grad[k];
      mo.v[k] = kAdamBeta2 * mo.v[k] + (1.0 - kAdamBeta2) * grad[k] * grad[k];
      delta[k] = -rates[k] * (mo.m[k] / c1) / (std::sqrt(mo.v[k] / c2) + kAdamEps);
    }
    p.position += Vec2(delta[0], delta[1]);
    p.scale = Vec2(p.scale.x() * std::exp(delta[2]), p.scale.y() * std::exp(delta[3]));
    p.rotation += delta[4];
    p.opacity_logit += delta[5];
    for (int c = 0; c < 3; ++c) p.color[c] = std::clamp(p.color[c] + delta[6 + c], 0.0, 1.0);
  }
}

bool finite(const GaussianPrimitive& p) {
  return p.position.allFinite() && p.scale.allFinite() && std::isfinite(p.rotation) &&
         std::isfinite(p.opacity_logit) && std::isfinite(p.color[0]) && std::isfinite(p.color[1]) &&
         std::isfinite(p.color[2]);
}

double beta_normaliser(const TrainState& s, std::span<const double> beta, const AnchorConfig& cfg) {
  const double scale = s.beta_scale > 0.0 ? s.beta_scale : percentile(beta, cfg.normalization_percentile);
  return scale > 0.0 ? scale : 1.0;
}

AssessmentMaps assess(const TrainState& s, const TrainConfig& cfg, const Image& rendered, const Image& reference,
                      std::vector<double> beta, std::vector<double> oc_pixels) {
  AssessmentMaps maps;
  maps.residual = residual_map(rendered, reference);
  maps.beta = std::move(beta);
  const std::vector<double> beta_norm = normalize_beta(maps.beta, beta_normaliser(s, maps.beta, cfg.anchors));
  switch (cfg.ablations.assessment) {
    case AssessmentMode::Hybrid:
      maps.hybrid = hybrid_map(maps.residual, beta_norm);
      break;
    case AssessmentMode::ResidualOnly:
      maps.hybrid = maps.residual;
      break;
    case AssessmentMode::BetaOnly:
      maps.hybrid = beta_norm;
      break;
  }
  maps.texture = texture_map(reference);
  maps.oc_pixels = std::move(oc_pixels);
  if (cfg.ablations.occ) {
    CorrectionResult r = occ_correct(maps.hybrid, maps.oc_pixels, maps.texture);
    maps.ocr = std::move(r.ocr);
    maps.corrected = std::move(r.corrected);
  } else {
    maps.ocr.assign(maps.hybrid.size(), 1.0);
    maps.corrected = maps.hybrid;
  }
  return maps;
}

}  // namespace

std::uint64_t add_primitive(TrainState& s, const GaussianPrimitive& g) {
  s.primitives.push_back(g);
  s.stats.emplace_back();
  s.moments.emplace_back();
  s.grad_accum.push_back(0.0);
  s.grad_count.push_back(0);
  s.origin.push_back(s.next_origin);
  return s.next_origin++;
}

TrainState init_state(const Dataset& ds, const TrainConfig& cfg) {
  validate(cfg);
  if (ds.views.empty()) throw ConfigError("dataset has no training views");
  TrainState s;

  // Sparse-point initialisation: static-scene points with positional noise,
  // grey, small and mostly transparent.
  Rng init_rng = make_stream(cfg.seed, "init");
  std::normal_distribution<double> jitter(0.0, 1.0);
  if (ds.primitives.empty()) throw ConfigError("dataset has no static points to initialise from");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n_random = static_cast<int>(std::lround(cfg.init_random_fraction * cfg.n_init_primitives));
  const int n_points = cfg.n_init_primitives - n_random;
  double lo_x = 0.0, hi_x = 1.0, hi_y = 0.0;
  for (const GaussianPrimitive& p : ds.primitives) {
    lo_x = std::min(lo_x, p.position.x());
    hi_x = std::max(hi_x, p.position.x());
    hi_y = std::max(hi_y, p.position.y());
  }
  for (int i = 0; i < cfg.n_init_primitives; ++i) {
    GaussianPrimitive g;
    if (i < n_points) {
      const std::size_t src = static_cast<std::size_t>(i) * ds.primitives.size() / n_points;
      g.position = ds.primitives[src].position + cfg.init_jitter * Vec2(jitter(init_rng), jitter(init_rng));
    } else {
      g.position = Vec2(lo_x + (hi_x - lo_x) * unit(init_rng), hi_y * unit(init_rng));
    }
    g.scale = Vec2(kInitScale, kInitScale);
    g.rotation = 0.0;
    g.opacity_logit = kInitOpacityLogit;
    g.color = Color{0.5, 0.5, 0.5};
    add_primitive(s, g);
  }

  const int n_images = static_cast<int>(ds.views.size());
  Rng head_rng = make_stream(cfg.seed, "heads");
  s.uncertainty = UncertaintyHead(n_images, head_rng, cfg.head_adam);
  s.mask = MaskHead(head_rng, cfg.head_adam);
  for (std::size_t v = 0; v < ds.views.size(); ++v) {
    ViewFeatures f = view_features(ds.views[v]);
    f.image_id = static_cast<int>(v);
    s.features.push_back(std::move(f));
  }
  s.cache.resize(ds.views.size());
  s.shuffle_rng = make_stream(cfg.seed, "shuffle");
  return s;
}

StepReport train_step(TrainState& s, const Dataset& ds, const TrainConfig& cfg, const StepOptions& opt) {
  const auto n_views = ds.views.size();
  const auto z = static_cast<std::uint64_t>(densify_interval(cfg, ds));
  const auto warmup = static_cast<std::uint64_t>(warmup_iterations(cfg, ds));
  const RenderSettings rs = render_settings(cfg);

  StepReport report;
  if (opt.view) {
    report.view = *opt.view;
  } else {
    if (s.epoch_order.size() != n_views || s.iteration % n_views == 0) {
      s.epoch_order.resize(n_views);
      std::iota(s.epoch_order.begin(), s.epoch_order.end(), std::size_t{0});
      std::shuffle(s.epoch_order.begin(), s.epoch_order.end(), s.shuffle_rng);
    }
    report.view = s.epoch_order[s.iteration % n_views];
  }
  const ViewRecord& view = ds.views.at(report.view);
  const ViewFeatures& features = s.features[report.view];

  const std::vector<double> oc = oc_values(s);
  const RenderOutput fwd = render(s.primitives, view.camera, rs, oc);
  const std::vector<double> beta = s.uncertainty.predict(features);

  if (opt.forced_mask) {
    report.mask = *opt.forced_mask;
  } else if (cfg.ablations.masking && s.iteration >= warmup) {
    report.mask = s.mask.predict(features, beta);
  } else {
    report.mask.assign(view.image.size(), 1.0);
  }

  const GsLoss loss = gs_loss(fwd.color, view.image, cfg.lambda_s, report.mask);
  if (!std::isfinite(loss.value)) throw NumericError("non-finite reconstruction loss");
  report.loss = loss.value;
  report.gradients = backward(s.primitives, view.camera, fwd, loss.gradient, rs);
  step_primitives(s, report.gradients, cfg.lr);

  for (std::size_t i = 0; i < s.primitives.size(); ++i) {
    const double gp = report.gradients.grad_p[i];
    const int u = effective_observation(gp);
    s.stats[i] = update_oc(update_stats(s.stats[i], view.camera.position, u), u);
    if (u) {
      s.grad_accum[i] += gp;
      s.grad_count[i] += 1;
    }
  }

  s.cache[report.view].maps = assess(s, cfg, fwd.color, view.image, beta, fwd.oc);
  s.cache[report.view].valid = true;

  if (opt.train_heads) {
    s.uncertainty.train_step(features, loss.pixel_loss);
    if (s.anchors) {
      const LabelMaps labels = make_labels(s.cache[report.view].maps.corrected, *s.anchors);
      s.mask.train_step(features, beta, labels);
    }
  }

  s.iteration += 1;
  if (s.iteration % z == 0) {
    refresh_anchors(s, cfg);
    densify_and_prune(s, cfg);
    report.round_closed = true;
  }
  for (const GaussianPrimitive& p : s.primitives) {
    if (!finite(p)) throw NumericError("non-finite primitive parameter");
  }
  return report;
}

void refresh_anchors(TrainState& s, const TrainConfig& cfg) {
  std::vector<double> values;
  std::vector<double> betas;
  for (const ViewCache& c : s.cache) {
    if (!c.valid) continue;
    values.insert(values.end(), c.maps.corrected.begin(), c.maps.corrected.end());
    betas.insert(betas.end(), c.maps.beta.begin(), c.maps.beta.end());
  }
  if (values.size() < kMinHistogramSamples) return;
  s.anchors = compute_anchors(values, cfg.anchors, cfg.ablations.dynamic_threshold);
  s.beta_scale = percentile(betas, cfg.anchors.normalization_percentile);
}

void densify_and_prune(TrainState& s, const TrainConfig& cfg) {
  const std::size_t n = s.primitives.size();
  std::vector<bool> split(n, false);
  std::vector<bool> clone(n, false);
  std::size_t budget = static_cast<std::size_t>(cfg.max_primitives) > n ? cfg.max_primitives - n : 0;
  for (std::size_t i = 0; i < n && budget > 0; ++i) {
    if (s.grad_count[i] == 0) continue;
    if (s.grad_accum[i] / s.grad_count[i] <= cfg.densify_grad_threshold) continue;
    if (s.primitives[i].scale.maxCoeff() > cfg.split_scale) {
      split[i] = true;
    } else {
      clone[i] = true;
    }
    --budget;
  }

  if (std::find(split.begin(), split.end(), true) != split.end() ||
      std::find(clone.begin(), clone.end(), true) != clone.end()) {
    TrainState next;
    const auto copy_row = [&](std::size_t i, const GaussianPrimitive& g, bool fresh_moments) {
      next.primitives.push_back(g);
      next.stats.push_back(s.stats[i]);
      next.moments.push_back(fresh_moments ? PrimitiveMoments{} : s.moments[i]);
      next.grad_accum.push_back(0.0);
      next.grad_count.push_back(0);
      next.origin.push_back(s.origin[i]);
    };
    for (std::size_t i = 0; i < n; ++i) {
      const GaussianPrimitive& p = s.primitives[i];
      if (!split[i]) {
        copy_row(i, p, false);
        continue;
      }
      const int major = p.scale.x() >= p.scale.y() ? 0 : 1;
      const double c = std::cos(p.rotation);
      const double sn = std::sin(p.rotation);
      const Vec2 axis = major == 0 ? Vec2(c, sn) : Vec2(-sn, c);
      const Vec2 offset = 0.5 * p.scale[major] * axis;
      for (const double sign : {-1.0, 1.0}) {
        GaussianPrimitive child = p;
        child.position = p.position + sign * offset;
        child.scale = p.scale / kSplitScaleDivisor;
        copy_row(i, child, true);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (clone[i]) copy_row(i, s.primitives[i], true);
    }
    s.primitives = std::move(next.primitives);
    s.stats = std::move(next.stats);
    s.moments = std::move(next.moments);
    s.grad_accum = std::move(next.grad_accum);
    s.grad_count = std::move(next.grad_count);
    s.origin = std::move(next.origin);
  }
  std::fill(s.grad_accum.begin(), s.grad_accum.end(), 0.0);
  std::fill(s.grad_count.begin(), s.grad_count.end(), 0u);

  const std::size_t m = s.primitives.size();
  std::vector<bool> removed(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    if (s.primitives[i].opacity() < cfg.opacity_prune_threshold) removed[i] = true;
  }
  if (cfg.ablations.ocp) {
    std::vector<ObservationStats> before = s.stats;
    for (std::size_t i : ocp_prune(s.stats)) {
      removed[i] = true;
      s.ocp_log.push_back({s.iteration, s.origin[i], before[i].oc, before[i].epoch_observation_count});
    }
  } else {
    for (ObservationStats& st : s.stats) st.epoch_observation_count = 0;
  }
  // Never leave the scene empty.
  if (std::all_of(removed.begin(), removed.end(), [](bool r) { return r; })) return;
  remove_rows(s, removed);
}

std::vector<double> predict_clean_mask(const TrainState& s, std::size_t view) {
  const ViewFeatures& f = s.features.at(view);
  return s.mask.predict(f, s.uncertainty.predict(f));
}

std::optional<LabelMaps> view_labels(const TrainState& s, std::size_t view) {
  if (!s.anchors || !s.cache.at(view).valid) return std::nullopt;
  return make_labels(s.cache[view].maps.corrected, *s.anchors);
}

MaskScore score_masks(const std::vector<Mask>& predicted, const std::vector<Mask>& truth) {
  if (predicted.size() != truth.size()) throw ConfigError("mask count mismatch");
  MaskScore score;
  for (std::size_t v = 0; v < predicted.size(); ++v) {
    if (predicted[v].size() != truth[v].size()) throw ConfigError("mask width mismatch");
    for (std::size_t x = 0; x < truth[v].size(); ++x) {
      const bool p = predicted[v][x] != 0;
      const bool t = truth[v][x] != 0;
      score.tp += p && t;
      score.fp += p && !t;
      score.fn += !p && t;
    }
  }
  const auto tp = static_cast<double>(score.tp);
  const double uni = tp + static_cast<double>(score.fp + score.fn);
  if (uni > 0.0) {
    score.iou = tp / uni;
    score.f1 = 2.0 * tp / (2.0 * tp + static_cast<double>(score.fp + score.fn));
  }
  return score;
}

Evaluation evaluate(const TrainState& s, const Dataset& ds, const TrainConfig& cfg) {
  Evaluation ev;
  const RenderSettings rs = render_settings(cfg);
  double psnr_sum = 0.0;
  double ssim_sum = 0.0;
  for (const ViewRecord& v : ds.test_views) {
    const RenderOutput out = render(s.primitives, v.camera, rs);
    ev.test.push_back({psnr(out.color, v.image), ssim(out.color, v.image)});
    psnr_sum += ev.test.back().psnr;
    ssim_sum += ev.test.back().ssim;
  }
  std::vector<Mask> predicted;
  std::vector<Mask> truth;
  for (std::size_t v = 0; v < ds.views.size(); ++v) {
    const auto& gt = ds.views[v].gt_mask;
    if (!gt || std::find(gt->begin(), gt->end(), 1) == gt->end()) continue;
    const std::vector<double> mc = predict_clean_mask(s, v);
    Mask p(mc.size());
    for (std::size_t x = 0; x < mc.size(); ++x) p[x] = mc[x] < 0.5 ? 1 : 0;
    predicted.push_back(std::move(p));
    truth.push_back(*gt);
  }
  const MaskScore score = score_masks(predicted, truth);
  const double n_test = static_cast<double>(std::max<std::size_t>(ds.test_views.size(), 1));
  ev.row.iter = s.iteration;
  ev.row.psnr = psnr_sum / n_test;
  ev.row.ssim = ssim_sum / n_test;
  ev.row.mask_iou = score.iou;
  ev.row.mask_f1 = score.f1;
  ev.row.n_gaussians = s.primitives.size();
  return ev;
}

TrainState train(const Dataset& ds, const TrainConfig& cfg, const EvalCallback& on_eval) {
  TrainState s = init_state(ds, cfg);
  const auto total = static_cast<std::uint64_t>(cfg.iterations);
  while (s.iteration < total) {
    train_step(s, ds, cfg);
    const bool due = cfg.eval_every > 0 && s.iteration % static_cast<std::uint64_t>(cfg.eval_every) == 0;
    if (due || s.iteration == total) {
      const Evaluation ev = evaluate(s, ds, cfg);
      s.history.push_back(ev.row);
      if (on_eval) on_eval(s, ev);
    }
  }
  return s;
}

}  // namespace flatsplat
