#include "flatsplat/artifacts.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "flatsplat/errors.hpp"

namespace flatsplat {

namespace {

std::string assessment_name(AssessmentMode m) {
  switch (m) {
    case AssessmentMode::Hybrid:
      return "hybrid";
    case AssessmentMode::ResidualOnly:
      return "residual";
    case AssessmentMode::BetaOnly:
      return "beta";
  }
  return "hybrid";
}

AssessmentMode assessment_from_name(const std::string& s) {
  if (s == "hybrid") return AssessmentMode::Hybrid;
  if (s == "residual") return AssessmentMode::ResidualOnly;
  if (s == "beta") return AssessmentMode::BetaOnly;
  throw SchemaError("unknown assessment mode '" + s + "'");
}

}  // namespace

json to_json(const TrainConfig& c) {
  return {
      {"iterations", c.iterations},
      {"lambda_s", c.lambda_s},
      {"densify_interval", c.densify_interval},
      {"densify_grad_threshold", c.densify_grad_threshold},
      {"opacity_prune_threshold", c.opacity_prune_threshold},
      {"warmup_iters", c.warmup_iters},
      {"seed", c.seed},
      {"eval_every", c.eval_every},
      {"threads", c.threads},
      {"n_init_primitives", c.n_init_primitives},
      {"init_jitter", c.init_jitter},
      {"init_random_fraction", c.init_random_fraction},
      {"split_scale", c.split_scale},
      {"max_primitives", c.max_primitives},
      {"anchors",
       {{"lambda4", c.anchors.lambda4},
        {"lambda5", c.anchors.lambda5},
        {"bins", c.anchors.bins},
        {"fallback_k", c.anchors.fallback_k},
        {"fixed_bg_percentile", c.anchors.fixed_bg_percentile},
        {"fixed_fg_percentile", c.anchors.fixed_fg_percentile},
        {"normalization_percentile", c.anchors.normalization_percentile}}},
      {"ablations",
       {{"occ", c.ablations.occ},
        {"ocp", c.ablations.ocp},
        {"assessment", assessment_name(c.ablations.assessment)},
        {"dynamic_threshold", c.ablations.dynamic_threshold},
        {"masking", c.ablations.masking}}},
      {"lr",
       {{"position", c.lr.position},
        {"log_scale", c.lr.log_scale},
        {"rotation", c.lr.rotation},
        {"opacity_logit", c.lr.opacity_logit},
        {"color", c.lr.color}}},
      {"head_adam",
       {{"lr", c.head_adam.lr}, {"beta1", c.head_adam.beta1}, {"beta2", c.head_adam.beta2}, {"eps", c.head_adam.eps}}},
  };
}

// Missing keys keep their defaults, so hand-written config files may be partial.
TrainConfig train_config_from_json(const json& j) {
  return with_schema_errors([&] {
    TrainConfig c;
    const auto opt = [](const json& obj, const char* key, auto& field) {
      if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
    };
    opt(j, "iterations", c.iterations);
    opt(j, "lambda_s", c.lambda_s);
    opt(j, "densify_interval", c.densify_interval);
    opt(j, "densify_grad_threshold", c.densify_grad_threshold);
    opt(j, "opacity_prune_threshold", c.opacity_prune_threshold);
    opt(j, "warmup_iters", c.warmup_iters);
    opt(j, "seed", c.seed);
    opt(j, "eval_every", c.eval_every);
    opt(j, "threads", c.threads);
    opt(j, "n_init_primitives", c.n_init_primitives);
    opt(j, "init_jitter", c.init_jitter);
    opt(j, "init_random_fraction", c.init_random_fraction);
    opt(j, "split_scale", c.split_scale);
    opt(j, "max_primitives", c.max_primitives);
    if (j.contains("anchors")) {
      const json& a = j.at("anchors");
      opt(a, "lambda4", c.anchors.lambda4);
      opt(a, "lambda5", c.anchors.lambda5);
      opt(a, "bins", c.anchors.bins);
      opt(a, "fallback_k", c.anchors.fallback_k);
      opt(a, "fixed_bg_percentile", c.anchors.fixed_bg_percentile);
      opt(a, "fixed_fg_percentile", c.anchors.fixed_fg_percentile);
      opt(a, "normalization_percentile", c.anchors.normalization_percentile);
    }
    if (j.contains("ablations")) {
      const json& a = j.at("ablations");
      opt(a, "occ", c.ablations.occ);
      opt(a, "ocp", c.ablations.ocp);
      if (a.contains("assessment")) c.ablations.assessment = assessment_from_name(a.at("assessment").get<std::string>());
      opt(a, "dynamic_threshold", c.ablations.dynamic_threshold);
      opt(a, "masking", c.ablations.masking);
    }
    if (j.contains("lr")) {
      const json& a = j.at("lr");
      opt(a, "position", c.lr.position);
      opt(a, "log_scale", c.lr.log_scale);
      opt(a, "rotation", c.lr.rotation);
      opt(a, "opacity_logit", c.lr.opacity_logit);
      opt(a, "color", c.lr.color);
    }
    if (j.contains("head_adam")) {
      const json& a = j.at("head_adam");
      opt(a, "lr", c.head_adam.lr);
      opt(a, "beta1", c.head_adam.beta1);
      opt(a, "beta2", c.head_adam.beta2);
      opt(a, "eps", c.head_adam.eps);
    }
    return c;
  });
}

std::string serialize_checkpoint(const TrainState& s, const TrainConfig& config) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "checkpoint";
  doc["config"] = to_json(config);
  doc["iteration"] = s.iteration;
  doc["primitives"] = json::array();
  for (const auto& g : s.primitives) doc["primitives"].push_back(to_json(g));
  doc["stats"] = json::array();
  for (const auto& st : s.stats) doc["stats"].push_back(to_json(st));
  doc["origin"] = s.origin;
  doc["uncertainty"] = {{"mlp", to_json(s.uncertainty.mlp())},
                        {"embedding", s.uncertainty.embedding()},
                        {"n_images", s.uncertainty.n_images()}};
  doc["mask"] = {{"mlp", to_json(s.mask.mlp())}};
  doc["anchors"] = s.anchors ? to_json(*s.anchors) : json(nullptr);
  doc["beta_scale"] = s.beta_scale;
  doc["history"] = json::array();
  for (const MetricsRow& r : s.history) {
    doc["history"].push_back({{"iter", r.iter},
                              {"psnr", r.psnr},
                              {"ssim", r.ssim},
                              {"mask_iou", r.mask_iou},
                              {"mask_f1", r.mask_f1},
                              {"n_gaussians", r.n_gaussians}});
  }
  return doc.dump();
}

void save_checkpoint(const TrainState& state, const TrainConfig& config, const std::filesystem::path& path) {
  write_text_atomic(path, serialize_checkpoint(state, config));
}

namespace {

Checkpoint checkpoint_from_document(const json& doc) {
  return with_schema_errors([&] {
    Checkpoint c;
    c.config = train_config_from_json(doc.at("config"));
    TrainState& s = c.state;
    s.iteration = doc.at("iteration").get<std::uint64_t>();
    for (const json& g : doc.at("primitives")) s.primitives.push_back(primitive_from_json(g));
    for (const json& st : doc.at("stats")) s.stats.push_back(stats_from_json(st));
    s.origin = doc.at("origin").get<std::vector<std::uint64_t>>();
    if (s.stats.size() != s.primitives.size() || s.origin.size() != s.primitives.size()) {
      throw SchemaError("checkpoint tables are not aligned");
    }
    s.moments.assign(s.primitives.size(), PrimitiveMoments{});
    s.grad_accum.assign(s.primitives.size(), 0.0);
    s.grad_count.assign(s.primitives.size(), 0);
    for (std::uint64_t o : s.origin) s.next_origin = std::max(s.next_origin, o + 1);

    const json& u = doc.at("uncertainty");
    const int n_images = u.at("n_images").get<int>();
    std::vector<double> embedding = u.at("embedding").get<std::vector<double>>();
    if (n_images < 0 || embedding.size() != static_cast<std::size_t>(kIdDims) * n_images) {
      throw SchemaError("embedding table has the wrong size");
    }
    s.uncertainty.set_state(mlp_from_json(u.at("mlp")), std::move(embedding), n_images);
    s.mask.set_state(mlp_from_json(doc.at("mask").at("mlp")));
    if (!doc.at("anchors").is_null()) s.anchors = anchors_from_json(doc.at("anchors"));
    s.beta_scale = doc.at("beta_scale").get<double>();
    for (const json& r : doc.at("history")) {
      s.history.push_back({r.at("iter").get<std::uint64_t>(), r.at("psnr").get<double>(), r.at("ssim").get<double>(),
                           r.at("mask_iou").get<double>(), r.at("mask_f1").get<double>(),
                           r.at("n_gaussians").get<std::size_t>()});
    }
    return c;
  });
}

}  // namespace

Checkpoint parse_checkpoint(const std::string& text) {
  return checkpoint_from_document(parse_document(text, "checkpoint"));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_document(read_document(path, "checkpoint"));
}

void restore(TrainState& s, const Dataset& ds) {
  if (static_cast<int>(ds.views.size()) != s.uncertainty.n_images()) {
    throw ConfigError("checkpoint was trained on a different number of views");
  }
  s.features.clear();
  for (std::size_t v = 0; v < ds.views.size(); ++v) {
    ViewFeatures f = view_features(ds.views[v]);
    f.image_id = static_cast<int>(v);
    s.features.push_back(std::move(f));
  }
  s.cache.assign(ds.views.size(), ViewCache{});
}

std::string metrics_row(const MetricsRow& r) {
  return fmt::format("{},{},{},{},{},{}", r.iter, r.psnr, r.ssim, r.mask_iou, r.mask_f1, r.n_gaussians);
}

std::string anchors_row(const ThresholdAnchors& a) {
  return fmt::format("{},{},{},{},{},{},{}", a.t_star, a.sigma2_max, a.t_o, a.t_b, a.t_b2o, a.t_o2b,
                     to_string(a.mode));
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const MetricsRow& r : rows) out += metrics_row(r) + "\n";
  return out;
}

std::string oc_csv(const std::vector<ObservationStats>& stats) {
  std::string out = std::string(kOcHeader) + "\n";
  for (std::size_t i = 0; i < stats.size(); ++i) out += fmt::format("{},{},{}\n", i, stats[i].m, stats[i].oc);
  return out;
}

std::string image_text(const Image& image) {
  std::string out = fmt::format("SPLAT1D {}\n", image.size());
  for (const Color& c : image) out += fmt::format("{} {} {}\n", c[0], c[1], c[2]);
  return out;
}

Image parse_image_text(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  std::size_t width = 0;
  if (!(in >> magic >> width) || magic != "SPLAT1D") throw SchemaError("not a SPLAT1D image");
  Image image(width);
  for (Color& c : image) {
    if (!(in >> c[0] >> c[1] >> c[2])) throw SchemaError("truncated SPLAT1D image");
  }
  return image;
}

std::string scalar_text(const std::vector<double>& values) {
  std::string out;
  for (double v : values) out += fmt::format("{}\n", v);
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace flatsplat
