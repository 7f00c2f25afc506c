#include "flatsplat/json_io.hpp"

#include <fstream>
#include <sstream>

#include "flatsplat/errors.hpp"

namespace flatsplat {

json to_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 vec2_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw SchemaError("expected a 2-vector");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

json to_json(const Color& c) { return json::array({c[0], c[1], c[2]}); }

Color color_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw SchemaError("expected an [r,g,b] triple");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

json to_json(const GaussianPrimitive& g) {
  return {{"position", to_json(g.position)},
          {"scale", to_json(g.scale)},
          {"rotation", g.rotation},
          {"opacity_logit", g.opacity_logit},
          {"color", to_json(g.color)}};
}

GaussianPrimitive primitive_from_json(const json& j) {
  GaussianPrimitive g;
  g.position = vec2_from_json(j.at("position"));
  g.scale = vec2_from_json(j.at("scale"));
  g.rotation = j.at("rotation").get<double>();
  g.opacity_logit = j.at("opacity_logit").get<double>();
  g.color = color_from_json(j.at("color"));
  return g;
}

json to_json(const CameraPose& c) {
  return {{"position", to_json(c.position)}, {"heading", c.heading}, {"focal", c.focal}, {"width", c.width}};
}

CameraPose camera_from_json(const json& j) {
  CameraPose c;
  c.position = vec2_from_json(j.at("position"));
  c.heading = j.at("heading").get<double>();
  c.focal = j.at("focal").get<double>();
  c.width = j.at("width").get<int>();
  return c;
}

json to_json(const ViewRecord& v) {
  json image = json::array();
  for (const Color& c : v.image) image.push_back(to_json(c));
  json mask = nullptr;
  if (v.gt_mask) {
    mask = json::array();
    for (std::uint8_t m : *v.gt_mask) mask.push_back(static_cast<int>(m));
  }
  return {{"camera", to_json(v.camera)}, {"image_id", v.image_id}, {"image", image}, {"gt_mask", mask}};
}

ViewRecord view_from_json(const json& j) {
  ViewRecord v;
  v.camera = camera_from_json(j.at("camera"));
  v.image_id = j.at("image_id").get<int>();
  for (const json& c : j.at("image")) v.image.push_back(color_from_json(c));
  const json& mask = j.at("gt_mask");
  if (!mask.is_null()) {
    Mask m;
    for (const json& e : mask) {
      const int bit = e.get<int>();
      if (bit != 0 && bit != 1) throw SchemaError("mask entries must be 0 or 1");
      m.push_back(static_cast<std::uint8_t>(bit));
    }
    v.gt_mask = std::move(m);
  }
  validate(v);
  return v;
}

json to_json(const SceneConfig& c) {
  return {{"n_background_gaussians", c.n_background_gaussians},
          {"n_views", c.n_views},
          {"image_width", c.image_width},
          {"distractor_view_fraction", c.distractor_view_fraction},
          {"distractors_per_view", c.distractors_per_view},
          {"rng_seed", c.rng_seed},
          {"world_extent", c.world_extent},
          {"n_test_views", c.n_test_views},
          {"focal_ratio", c.focal_ratio},
          {"distractor_min_px", c.distractor_min_px},
          {"distractor_max_px", c.distractor_max_px},
          {"distractor_parts", c.distractor_parts},
          {"wall_color_jitter", c.wall_color_jitter},
          {"detailed_fraction", c.detailed_fraction},
          {"layout", to_string(c.layout)},
          {"sparse_views", c.sparse_views},
          {"hotspot_width", c.hotspot_width},
          {"image_noise_std", c.image_noise_std},
          {"dark_distractors", c.dark_distractors}};
}

SceneConfig scene_config_from_json(const json& j) {
  SceneConfig c;
  // Every key is optional so hand-written config files may give only overrides.
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("n_background_gaussians", c.n_background_gaussians);
  get("n_views", c.n_views);
  get("image_width", c.image_width);
  get("distractor_view_fraction", c.distractor_view_fraction);
  get("distractors_per_view", c.distractors_per_view);
  get("rng_seed", c.rng_seed);
  get("world_extent", c.world_extent);
  get("n_test_views", c.n_test_views);
  get("focal_ratio", c.focal_ratio);
  get("distractor_min_px", c.distractor_min_px);
  get("distractor_max_px", c.distractor_max_px);
  get("distractor_parts", c.distractor_parts);
  get("wall_color_jitter", c.wall_color_jitter);
  get("detailed_fraction", c.detailed_fraction);
  if (j.contains("layout")) c.layout = camera_layout_from_string(j.at("layout").get<std::string>());
  get("sparse_views", c.sparse_views);
  get("hotspot_width", c.hotspot_width);
  get("image_noise_std", c.image_noise_std);
  get("dark_distractors", c.dark_distractors);
  return c;
}

json to_json(const ObservationStats& s) {
  return {{"m", s.m},
          {"mean_pos", to_json(s.mean_pos)},
          {"var_pos", to_json(s.var_pos)},
          {"oc", s.oc},
          {"epoch_observation_count", s.epoch_observation_count}};
}

ObservationStats stats_from_json(const json& j) {
  ObservationStats s;
  s.m = j.at("m").get<std::uint64_t>();
  s.mean_pos = vec2_from_json(j.at("mean_pos"));
  s.var_pos = vec2_from_json(j.at("var_pos"));
  s.oc = j.at("oc").get<double>();
  s.epoch_observation_count = j.at("epoch_observation_count").get<std::uint32_t>();
  return s;
}

json to_json(const ThresholdAnchors& a) {
  return {{"t_star", a.t_star},
          {"sigma2_max", a.sigma2_max},
          {"T_o", a.t_o},
          {"T_b", a.t_b},
          {"T_b2o", a.t_b2o},
          {"T_o2b", a.t_o2b},
          {"mode", to_string(a.mode)},
          {"normalization_scale", a.normalization_scale},
          {"fixed_bg", a.fixed_bg},
          {"fixed_fg", a.fixed_fg}};
}

ThresholdAnchors anchors_from_json(const json& j) {
  ThresholdAnchors a;
  a.t_star = j.at("t_star").get<std::size_t>();
  a.sigma2_max = j.at("sigma2_max").get<double>();
  a.t_o = j.at("T_o").get<double>();
  a.t_b = j.at("T_b").get<double>();
  a.t_b2o = j.at("T_b2o").get<double>();
  a.t_o2b = j.at("T_o2b").get<double>();
  a.mode = threshold_mode_from_string(j.at("mode").get<std::string>());
  a.normalization_scale = j.at("normalization_scale").get<double>();
  a.fixed_bg = j.at("fixed_bg").get<double>();
  a.fixed_fg = j.at("fixed_fg").get<double>();
  return a;
}

json to_json(const Mlp& mlp) {
  const auto p = mlp.params();
  return {{"layer_sizes", mlp.layer_sizes()}, {"params", std::vector<double>(p.begin(), p.end())}};
}

Mlp mlp_from_json(const json& j) {
  return Mlp(j.at("layer_sizes").get<std::vector<int>>(), j.at("params").get<std::vector<double>>());
}

json parse_document(const std::string& text, const std::string& kind) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("unparseable ") + kind + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version")) {
    throw SchemaError(kind + " has no schema_version");
  }
  const int version = with_schema_errors([&] { return doc.at("schema_version").get<int>(); });
  if (version != kSchemaVersion) {
    throw SchemaError(kind + " schema_version " + std::to_string(version) + " is not supported");
  }
  if (doc.contains("kind") && doc.at("kind") != kind) {
    throw SchemaError("expected a " + kind + " document");
  }
  return doc;
}

json read_document(const std::filesystem::path& path, const std::string& kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return parse_document(buf.str(), kind);
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace flatsplat
