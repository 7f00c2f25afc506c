#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "flatsplat/artifacts.hpp"
#include "flatsplat/dataset.hpp"
#include "flatsplat/errors.hpp"
#include "flatsplat/loss.hpp"
#include "flatsplat/trainer.hpp"

namespace fs = std::filesystem;
using namespace flatsplat;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kNumeric = 3 };

struct SceneFlags {
  std::optional<int> n_bg, n_views, width, per_view, n_test, sparse_views, parts;
  std::optional<double> fraction, extent, hotspot, noise, min_px, max_px;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> layout;
  std::optional<bool> dark;
};

struct TrainFlags {
  std::optional<int> iters, eval_every, threads;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda_s, lambda4, lambda5;
  std::vector<std::string> disable;
};

// A config file is a JSON document of kind "config" with optional "scene" and "train" objects.
json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  return read_document(path, "config");
}

SceneConfig scene_config(const json& cfg, const SceneFlags& f) {
  SceneConfig c = cfg.contains("scene") ? scene_config_from_json(cfg.at("scene")) : SceneConfig{};
  if (f.n_bg) c.n_background_gaussians = *f.n_bg;
  if (f.n_views) c.n_views = *f.n_views;
  if (f.width) c.image_width = *f.width;
  if (f.per_view) c.distractors_per_view = *f.per_view;
  if (f.n_test) c.n_test_views = *f.n_test;
  if (f.sparse_views) c.sparse_views = *f.sparse_views;
  if (f.fraction) c.distractor_view_fraction = *f.fraction;
  if (f.extent) c.world_extent = *f.extent;
  if (f.seed) c.rng_seed = *f.seed;
  if (f.layout) c.layout = camera_layout_from_string(*f.layout);
  if (f.hotspot) c.hotspot_width = *f.hotspot;
  if (f.noise) c.image_noise_std = *f.noise;
  if (f.min_px) c.distractor_min_px = *f.min_px;
  if (f.max_px) c.distractor_max_px = *f.max_px;
  if (f.dark) c.dark_distractors = *f.dark;
  if (f.parts) c.distractor_parts = *f.parts;
  return c;
}

TrainConfig train_config(const json& cfg, const TrainFlags& f) {
  TrainConfig c = cfg.contains("train") ? train_config_from_json(cfg.at("train")) : TrainConfig{};
  if (f.iters) c.iterations = *f.iters;
  if (f.eval_every) c.eval_every = *f.eval_every;
  if (f.threads) c.threads = *f.threads;
  if (f.seed) c.seed = *f.seed;
  if (f.lambda_s) c.lambda_s = *f.lambda_s;
  if (f.lambda4) c.anchors.lambda4 = *f.lambda4;
  if (f.lambda5) c.anchors.lambda5 = *f.lambda5;
  for (const std::string& name : f.disable) flatsplat::disable(c.ablations, name);
  validate(c);
  return c;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

fs::path inside(const fs::path& out, const std::string& name) { return name.empty() ? fs::path{} : out / name; }

int cmd_gen(const std::string& config_path, const SceneFlags& flags, const fs::path& out) {
  const SceneConfig c = scene_config(read_config(config_path), flags);
  validate(c);
  ensure_dir(out);
  save_dataset(generate_dataset(c), out / "dataset.json");
  std::cout << (out / "dataset.json").string() << "\n";
  return kOk;
}

int cmd_train(const std::string& config_path, const TrainFlags& flags, const fs::path& dataset_path,
              const fs::path& out, const std::string& metrics_name) {
  const TrainConfig cfg = train_config(read_config(config_path), flags);
  const Dataset ds = load_dataset(dataset_path);
  ensure_dir(out);
  ensure_dir(out / "renders");
  const fs::path metrics_path = inside(out, metrics_name);

  const auto on_eval = [&](const TrainState& s, const Evaluation& ev) {
    save_checkpoint(s, cfg, out / "checkpoint.json");
    write_text_atomic(metrics_path, metrics_csv(s.history));
    std::cout << metrics_row(ev.row) << "\n";
  };
  std::cout << kMetricsHeader << "\n";
  const TrainState s = train(ds, cfg, on_eval);

  std::string anchors = std::string(kAnchorsHeader) + "\n";
  if (s.anchors) anchors += anchors_row(*s.anchors) + "\n";
  write_text_atomic(out / "anchors.csv", anchors);
  for (std::size_t v = 0; v < ds.test_views.size(); ++v) {
    const RenderOutput r = render(s.primitives, ds.test_views[v].camera);
    write_text_atomic(out / "renders" / fmt::format("test_{}.txt", v), image_text(r.color));
  }
  return kOk;
}

Checkpoint restore_checkpoint(const fs::path& checkpoint, const Dataset& ds, std::optional<int> threads) {
  Checkpoint c = load_checkpoint(checkpoint);
  if (threads) c.config.threads = *threads;
  restore(c.state, ds);
  return c;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& dataset_path, const fs::path& out,
             const std::string& metrics_name, std::optional<int> threads) {
  const Dataset ds = load_dataset(dataset_path);
  const Checkpoint c = restore_checkpoint(checkpoint, ds, threads);
  const Evaluation ev = evaluate(c.state, ds, c.config);
  ensure_dir(out);
  write_text_atomic(inside(out, metrics_name), metrics_csv({ev.row}));
  std::string per_view = "view,psnr,ssim\n";
  for (std::size_t v = 0; v < ev.test.size(); ++v) {
    per_view += fmt::format("{},{},{}\n", v, ev.test[v].psnr, ev.test[v].ssim);
  }
  write_text_atomic(out / "test_views.csv", per_view);
  std::cout << kMetricsHeader << "\n" << metrics_row(ev.row) << "\n";
  return kOk;
}

int cmd_render(const fs::path& checkpoint, const fs::path& dataset_path, const fs::path& out, int view,
               const std::string& split, std::optional<int> threads) {
  const Dataset ds = load_dataset(dataset_path);
  const Checkpoint c = restore_checkpoint(checkpoint, ds, threads);
  const std::vector<ViewRecord>& views = split == "test" ? ds.test_views : ds.views;
  if (view < 0 || static_cast<std::size_t>(view) >= views.size()) {
    throw ConfigError(fmt::format("view {} outside the {} split ({} views)", view, split, views.size()));
  }
  const ViewRecord& v = views[static_cast<std::size_t>(view)];
  std::vector<double> oc(c.state.stats.size());
  for (std::size_t i = 0; i < oc.size(); ++i) oc[i] = c.state.stats[i].oc;
  RenderSettings rs;
  rs.threads = c.config.threads;
  const RenderOutput r = render(c.state.primitives, v.camera, rs, oc);
  ensure_dir(out);
  write_text_atomic(out / fmt::format("{}_{}.txt", split, view), image_text(r.color));
  write_text_atomic(out / fmt::format("{}_{}_oc.txt", split, view), scalar_text(r.oc));
  std::cout << fmt::format("psnr={}\n", psnr(r.color, v.image));
  return kOk;
}

int cmd_export_oc(const fs::path& checkpoint, const fs::path& dataset_path, const fs::path& out) {
  const Checkpoint c = load_checkpoint(checkpoint);
  ensure_dir(out);
  write_text_atomic(out / "oc.csv", oc_csv(c.state.stats));
  if (dataset_path.empty()) return kOk;
  const Dataset ds = load_dataset(dataset_path);
  ensure_dir(out / "oc_maps");
  std::vector<double> oc(c.state.stats.size());
  for (std::size_t i = 0; i < oc.size(); ++i) oc[i] = c.state.stats[i].oc;
  RenderSettings rs;
  rs.threads = c.config.threads;
  for (std::size_t v = 0; v < ds.views.size(); ++v) {
    const RenderOutput r = render(c.state.primitives, ds.views[v].camera, rs, oc);
    write_text_atomic(out / "oc_maps" / fmt::format("train_{}.txt", v), scalar_text(r.oc));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flatland Gaussian splatting with noise-robust training"};
  app.require_subcommand(1);

  std::string config_path;
  fs::path out;
  fs::path dataset_path;
  fs::path checkpoint;
  std::string metrics_name = "metrics.csv";
  std::optional<int> threads;
  SceneFlags scene;
  TrainFlags tf;
  int view = 0;
  std::string split = "test";

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset into <out>/dataset.json");
  gen->add_option("--config", config_path, "JSON config file (kind \"config\")");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--seed", scene.seed, "dataset seed");
  gen->add_option("--n-bg", scene.n_bg, "background Gaussians");
  gen->add_option("--n-views", scene.n_views, "training views");
  gen->add_option("--n-test", scene.n_test, "held-out clean views");
  gen->add_option("--width", scene.width, "image width in pixels");
  gen->add_option("--fraction", scene.fraction, "fraction of training views with distractors");
  gen->add_option("--per-view", scene.per_view, "distractors per affected view");
  gen->add_option("--extent", scene.extent, "wall length");
  gen->add_option("--layout", scene.layout, "camera layout")->check(CLI::IsMember({"spread", "clustered"}));
  gen->add_option("--sparse-views", scene.sparse_views, "clustered layout: views covering the right end");
  gen->add_option("--hotspot", scene.hotspot, "width of the wall segment distractors gather in front of (0: none)");
  gen->add_option("--noise", scene.noise, "sensor noise std on training images");
  gen->add_option("--min-px", scene.min_px, "smallest projected distractor std in pixels");
  gen->add_option("--max-px", scene.max_px, "largest projected distractor std in pixels");
  gen->add_option("--parts", scene.parts, "splats per distractor");
  gen->add_option("--dark", scene.dark, "distractors darker than the wall (true/false)");

  auto* train = app.add_subcommand("train", "train and write checkpoint, metrics, anchors and renders");
  train->add_option("--config", config_path, "JSON config file (kind \"config\")");
  train->add_option("--dataset", dataset_path, "dataset file")->required();
  train->add_option("--out", out, "output directory")->required();
  train->add_option("--iters", tf.iters, "training iterations");
  train->add_option("--seed", tf.seed, "training seed");
  train->add_option("--lambda-s", tf.lambda_s, "SSIM weight in the reconstruction loss");
  train->add_option("--lambda4", tf.lambda4, "background-to-object anchor weight");
  train->add_option("--lambda5", tf.lambda5, "object-to-background anchor weight");
  train->add_option("--disable", tf.disable, "ablations")
      ->check(CLI::IsMember({"occ", "ocp", "hybrid", "dynamic-threshold", "masking"}));
  train->add_option("--metrics-csv", metrics_name, "metrics file name inside --out");
  train->add_option("--eval-every", tf.eval_every, "evaluation cadence in iterations (0: end only)");
  train->add_option("--threads", tf.threads, "worker threads for rendering");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--dataset", dataset_path, "dataset file")->required();
  eval->add_option("--out", out, "output directory")->required();
  eval->add_option("--metrics-csv", metrics_name, "metrics file name inside --out");
  eval->add_option("--threads", threads, "worker threads for rendering");

  auto* rend = app.add_subcommand("render", "render one view of a checkpoint");
  rend->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  rend->add_option("--dataset", dataset_path, "dataset file")->required();
  rend->add_option("--out", out, "output directory")->required();
  rend->add_option("--view", view, "view index");
  rend->add_option("--split", split, "view split")->check(CLI::IsMember({"train", "test"}));
  rend->add_option("--threads", threads, "worker threads for rendering");

  auto* export_oc = app.add_subcommand("export-oc", "write per-primitive OC and per-view OC maps");
  export_oc->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  export_oc->add_option("--dataset", dataset_path, "dataset file (enables per-view maps)");
  export_oc->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen(config_path, scene, out);
    if (*train) return cmd_train(config_path, tf, dataset_path, out, metrics_name);
    if (*eval) return cmd_eval(checkpoint, dataset_path, out, metrics_name, threads);
    if (*rend) return cmd_render(checkpoint, dataset_path, out, view, split, threads);
    if (*export_oc) return cmd_export_oc(checkpoint, dataset_path, out);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
