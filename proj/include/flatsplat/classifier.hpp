#pragma once

// Per-pixel networks trained next to the scene: an uncertainty head that
// predicts beta, and a clean-mask head supervised by self-generated labels.
// Neither head has a gradient path into the Gaussian primitives.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "flatsplat/anchors.hpp"
#include "flatsplat/rng.hpp"
#include "flatsplat/scene.hpp"

namespace flatsplat {

inline constexpr int kPosFrequencies = 8;
inline constexpr int kPosDims = 2 * kPosFrequencies;
inline constexpr int kIdDims = 8;
inline constexpr int kPhotoDims = 9;
inline constexpr int kPhotoWindow = 9;
inline constexpr int kHiddenUnits = 64;
inline constexpr double kBetaFloor = 0.05;

inline constexpr int kUncertaintyInputs = kPosDims + kIdDims + kPhotoDims;
inline constexpr int kMaskInputs = kPosDims + 1 + kPhotoDims;

struct FeatureVector {
  std::array<double, kPosDims> f_pos{};  // sin terms, then cos terms
  std::array<double, kIdDims> f_id{};
  std::array<double, kPhotoDims> f_c{};  // colour, window mean, window std
};

// Sinusoidal encoding of a normalised coordinate s in [0, 1]: sin(2^k pi s), cos(2^k pi s).
std::array<double, kPosDims> positional_encoding(double s);

std::array<double, kPhotoDims> photometric_features(const Image& image, std::size_t pixel);

// The static (non-learned) features of every pixel of a view, one column per pixel.
struct ViewFeatures {
  Eigen::MatrixXd pos;    // kPosDims x width
  Eigen::MatrixXd photo;  // kPhotoDims x width
  int image_id = 0;

  std::size_t width() const { return static_cast<std::size_t>(pos.cols()); }
};

ViewFeatures view_features(const ViewRecord& view);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, AdamConfig config = {});

  void step(std::span<double> params, std::span<const double> grads);
  std::uint64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t steps_ = 0;
};

// Fully connected network with ReLU between layers and a linear last layer.
// Parameters live in one flat buffer: per layer, a row-major out x in weight
// matrix followed by the bias.
class Mlp {
 public:
  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // input, then each layer's post-activation output
  };

  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, Rng& rng);
  Mlp(std::vector<int> layer_sizes, std::vector<double> params);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  // input: in x N; returns out x N.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache* cache = nullptr) const;

  // Accumulates d loss / d params into `grad` and returns d loss / d input.
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& d_out, std::span<double> grad) const;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  void compute_offsets();

  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

double softplus(double x);

struct PixelLoss {
  double value = 0.0;
  std::vector<double> gradient;  // d value / d per-pixel prediction
};

// mean_x [ L(x) / (2 beta(x)^2) + log beta(x) ]; L is treated as a constant.
PixelLoss uncertainty_loss(std::span<const double> loss_map, std::span<const double> beta);

// mean over M_u pixels of |M_c - M_self|; zero when no pixel is valid.
PixelLoss supervision_loss(std::span<const double> mask, const LabelMaps& labels);

class UncertaintyHead {
 public:
  UncertaintyHead() = default;
  UncertaintyHead(int n_images, Rng& rng, AdamConfig adam = {});

  Eigen::MatrixXd inputs(const ViewFeatures& features) const;
  std::vector<double> predict(const ViewFeatures& features) const;

  // Loss on one view plus its gradient w.r.t. the network and embedding table.
  double loss_and_gradient(const ViewFeatures& features, std::span<const double> loss_map,
                           std::vector<double>& grad_mlp, std::vector<double>& grad_embedding) const;

  // One optimizer step; returns the loss before the step.
  double train_step(const ViewFeatures& features, std::span<const double> loss_map);

  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }
  std::vector<double>& embedding() { return embedding_; }  // kIdDims x n_images, column-major
  const std::vector<double>& embedding() const { return embedding_; }
  int n_images() const { return n_images_; }

  void set_state(Mlp mlp, std::vector<double> embedding, int n_images);

 private:
  Mlp mlp_;
  std::vector<double> embedding_;
  int n_images_ = 0;
  Adam mlp_opt_;
  Adam embedding_opt_;
};

class MaskHead {
 public:
  MaskHead() = default;
  MaskHead(Rng& rng, AdamConfig adam = {});

  // beta is an input feature only; nothing flows back into the uncertainty head.
  Eigen::MatrixXd inputs(const ViewFeatures& features, std::span<const double> beta) const;
  std::vector<double> predict(const ViewFeatures& features, std::span<const double> beta) const;

  double loss_and_gradient(const ViewFeatures& features, std::span<const double> beta,
                           const LabelMaps& labels, std::vector<double>& grad) const;
  double train_step(const ViewFeatures& features, std::span<const double> beta, const LabelMaps& labels);

  Mlp& mlp() { return mlp_; }
  const Mlp& mlp() const { return mlp_; }
  void set_state(Mlp mlp);

 private:
  Mlp mlp_;
  Adam opt_;
};

}  // namespace flatsplat
