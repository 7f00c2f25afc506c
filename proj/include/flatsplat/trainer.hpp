#pragma once

// The noise-robust training loop: splat optimisation under a learned clean
// mask, observation-completeness bookkeeping, self-supervised noise labels,
// and round-based densification with completeness pruning.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "flatsplat/anchors.hpp"
#include "flatsplat/assessment.hpp"
#include "flatsplat/classifier.hpp"
#include "flatsplat/dataset.hpp"
#include "flatsplat/observation.hpp"
#include "flatsplat/render.hpp"
#include "flatsplat/rng.hpp"

namespace flatsplat {

enum class AssessmentMode { Hybrid, ResidualOnly, BetaOnly };

struct Ablations {
  bool occ = true;                // observation correction of the assessment
  bool ocp = true;                // completeness pruning
  AssessmentMode assessment = AssessmentMode::Hybrid;
  bool dynamic_threshold = true;  // false forces the fixed-percentile labels
  bool masking = true;            // false trains on every pixel (baseline)

  bool operator==(const Ablations&) const = default;
};

// Names accepted by --disable: occ, ocp, hybrid, dynamic-threshold, masking.
void disable(Ablations& ablations, const std::string& name);

struct LearningRates {
  double position = 1e-3;
  double log_scale = 1e-2;
  double rotation = 1e-2;
  double opacity_logit = 5e-2;
  double color = 1e-3;

  bool operator==(const LearningRates&) const = default;
};

struct TrainConfig {
  int iterations = 2000;
  double lambda_s = 0.2;
  int densify_interval = 0;  // 0: number of training views
  double densify_grad_threshold = 3e-2;  // mean positional gradient norm per observing step
  double opacity_prune_threshold = 0.005;
  int warmup_iters = -1;     // -1: three densify intervals
  std::uint64_t seed = 0;
  int eval_every = 0;        // 0: evaluate only at the end
  int threads = 1;
  int n_init_primitives = 24;
  double init_jitter = 0.05;
  double init_random_fraction = 0.0;  // share of initial primitives drawn uniformly between cameras and wall
  double split_scale = 0.08;  // world units; larger primitives split instead of cloning
  int max_primitives = 256;
  AnchorConfig anchors;
  Ablations ablations;
  LearningRates lr;
  AdamConfig head_adam;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& config);

int densify_interval(const TrainConfig& config, const Dataset& dataset);
int warmup_iterations(const TrainConfig& config, const Dataset& dataset);

struct ViewCache {
  bool valid = false;
  AssessmentMaps maps;
};

struct PrimitiveMoments {
  std::array<double, 9> m{};
  std::array<double, 9> v{};
};

struct OcpEvent {
  std::uint64_t iteration;
  std::uint64_t origin;
  double oc;
  std::uint32_t epoch_observation_count;
};

struct MetricsRow {
  std::uint64_t iter = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double mask_iou = 0.0;
  double mask_f1 = 0.0;
  std::size_t n_gaussians = 0;

  bool operator==(const MetricsRow&) const = default;
};

struct TrainState {
  std::vector<GaussianPrimitive> primitives;
  std::vector<ObservationStats> stats;
  std::vector<PrimitiveMoments> moments;
  std::vector<double> grad_accum;
  std::vector<std::uint32_t> grad_count;
  std::vector<std::uint64_t> origin;  // id of the primitive each one descends from
  std::uint64_t next_origin = 0;
  std::uint64_t primitive_steps = 0;

  UncertaintyHead uncertainty;
  MaskHead mask;
  std::vector<ViewFeatures> features;  // per training view
  std::vector<ViewCache> cache;        // per training view
  std::optional<ThresholdAnchors> anchors;
  double beta_scale = 0.0;  // 0 until the first round closes

  std::uint64_t iteration = 0;
  std::vector<std::size_t> epoch_order;
  Rng shuffle_rng;
  std::vector<MetricsRow> history;
  std::vector<OcpEvent> ocp_log;
};

TrainState init_state(const Dataset& dataset, const TrainConfig& config);

// Appends a primitive with fresh statistics and optimiser state; returns its origin id.
std::uint64_t add_primitive(TrainState& state, const GaussianPrimitive& g);

// Test hooks for a single step.
struct StepOptions {
  std::optional<std::vector<double>> forced_mask;  // replaces M_c
  bool train_heads = true;
  std::optional<std::size_t> view;  // bypasses the shuffled order
};

struct StepReport {
  std::size_t view = 0;
  double loss = 0.0;
  PrimitiveGradients gradients;
  std::vector<double> mask;  // multiplier applied to the reconstruction loss
  bool round_closed = false;
};

// One optimisation step on the next training view. Throws NumericError on a non-finite loss or parameter.
StepReport train_step(TrainState& state, const Dataset& dataset, const TrainConfig& config,
                      const StepOptions& options = {});

// Round-boundary maintenance: clone/split, opacity pruning and completeness pruning.
void densify_and_prune(TrainState& state, const TrainConfig& config);

// Rebuilds anchors and the beta normaliser from the cached maps.
void refresh_anchors(TrainState& state, const TrainConfig& config);

// Per-view clean mask M_c from the two heads.
std::vector<double> predict_clean_mask(const TrainState& state, std::size_t view);

// Self-supervised labels of a cached view under the current anchors.
std::optional<LabelMaps> view_labels(const TrainState& state, std::size_t view);

struct ViewMetrics {
  double psnr;
  double ssim;
};

struct Evaluation {
  std::vector<ViewMetrics> test;
  MetricsRow row;
};

Evaluation evaluate(const TrainState& state, const Dataset& dataset, const TrainConfig& config);

struct MaskScore {
  double iou = 1.0;
  double f1 = 1.0;
  std::uint64_t tp = 0, fp = 0, fn = 0;
};

// Pools counts over every view; perfect scores when nothing is predicted or true.
MaskScore score_masks(const std::vector<Mask>& predicted, const std::vector<Mask>& truth);

using EvalCallback = std::function<void(const TrainState&, const Evaluation&)>;

// Runs config.iterations steps, evaluating every eval_every steps and at the end.
TrainState train(const Dataset& dataset, const TrainConfig& config, const EvalCallback& on_eval = {});

}  // namespace flatsplat
