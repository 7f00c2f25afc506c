#include "flatsplat/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flatsplat/errors.hpp"

namespace flatsplat {

std::array<double, kPosDims> positional_encoding(double s) {
  std::array<double, kPosDims> f{};
  double freq = std::numbers::pi;
  for (int k = 0; k < kPosFrequencies; ++k) {
    f[k] = std::sin(freq * s);
    f[kPosFrequencies + k] = std::cos(freq * s);
    freq *= 2.0;
  }
  return f;
}

std::array<double, kPhotoDims> photometric_features(const Image& image, std::size_t pixel) {
  const std::size_t n = image.size();
  const std::size_t half = kPhotoWindow / 2;
  const std::size_t lo = pixel >= half ? pixel - half : 0;
  const std::size_t hi = std::min(n - 1, pixel + half);
  const auto count = static_cast<double>(hi - lo + 1);

  std::array<double, kPhotoDims> f{};
  for (int ch = 0; ch < 3; ++ch) {
    f[ch] = image[pixel][ch];
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += image[j][ch];
    const double mean = sum / count;
    double dev = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) dev += (image[j][ch] - mean) * (image[j][ch] - mean);
    f[3 + ch] = mean;
    f[6 + ch] = std::sqrt(dev / count);
  }
  return f;
}

ViewFeatures view_features(const ViewRecord& view) {
  const std::size_t n = view.image.size();
  ViewFeatures out;
  out.image_id = view.image_id;
  out.pos.resize(kPosDims, static_cast<Eigen::Index>(n));
  out.photo.resize(kPhotoDims, static_cast<Eigen::Index>(n));
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  for (std::size_t x = 0; x < n; ++x) {
    const auto pe = positional_encoding(static_cast<double>(x) / denom);
    const auto pc = photometric_features(view.image, x);
    const auto col = static_cast<Eigen::Index>(x);
    for (int d = 0; d < kPosDims; ++d) out.pos(d, col) = pe[d];
    for (int d = 0; d < kPhotoDims; ++d) out.photo(d, col) = pc[d];
  }
  return out;
}

Adam::Adam(std::size_t n, AdamConfig config) : config_(config), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
  }
}

Mlp::Mlp(std::vector<int> layer_sizes, Rng& rng) : sizes_(std::move(layer_sizes)) {
  compute_offsets();
  params_.assign(offsets_.back(), 0.0);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / sizes_[l]));
    const std::size_t count = static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]);
    for (std::size_t i = 0; i < count; ++i) params_[offsets_[l] + i] = init(rng);
  }
}

Mlp::Mlp(std::vector<int> layer_sizes, std::vector<double> params)
    : sizes_(std::move(layer_sizes)), params_(std::move(params)) {
  compute_offsets();
  if (params_.size() != offsets_.back()) {
    throw SchemaError("MLP parameter count does not match its layer sizes");
  }
}

void Mlp::compute_offsets() {
  if (sizes_.size() < 2) throw SchemaError("MLP needs at least an input and an output layer");
  offsets_.assign(sizes_.size(), 0);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw SchemaError("MLP layer sizes must be positive");
    offsets_[l + 1] = offsets_[l] + static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
}

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Cache* cache) const {
  if (input.rows() != sizes_.front()) throw ConfigError("MLP input has the wrong feature count");
  Eigen::MatrixXd a = input;
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(a);
  }
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    Eigen::Map<const RowMajor> w(params_.data() + offsets_[l], out, in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + offsets_[l] + static_cast<std::size_t>(out) * in, out);
    Eigen::MatrixXd z = w * a;
    z.colwise() += b;
    if (l + 1 < layers) z = z.cwiseMax(0.0);
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_out, std::span<double> grad) const {
  const std::size_t layers = sizes_.size() - 1;
  Eigen::MatrixXd delta = d_out;
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    if (l + 1 < layers) {
      // ReLU gate of this layer's output
      delta = delta.cwiseProduct((cache.activations[l + 1].array() > 0.0).cast<double>().matrix());
    }
    const Eigen::MatrixXd& a_in = cache.activations[l];
    Eigen::Map<RowMajor> gw(grad.data() + offsets_[l], out, in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets_[l] + static_cast<std::size_t>(out) * in, out);
    gw += delta * a_in.transpose();
    gb += delta.rowwise().sum();
    Eigen::Map<const RowMajor> w(params_.data() + offsets_[l], out, in);
    delta = w.transpose() * delta;
  }
  return delta;
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

PixelLoss uncertainty_loss(std::span<const double> loss_map, std::span<const double> beta) {
  PixelLoss out;
  const std::size_t n = beta.size();
  out.gradient.assign(n, 0.0);
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    const double b = beta[x];
    sum += loss_map[x] / (2.0 * b * b) + std::log(b);
    out.gradient[x] = (-loss_map[x] / (b * b * b) + 1.0 / b) * inv_n;
  }
  out.value = sum * inv_n;
  return out;
}

PixelLoss supervision_loss(std::span<const double> mask, const LabelMaps& labels) {
  PixelLoss out;
  out.gradient.assign(mask.size(), 0.0);
  std::size_t active = 0;
  for (std::uint8_t v : labels.valid) active += v;
  if (active == 0) return out;
  const double inv = 1.0 / static_cast<double>(active);
  double sum = 0.0;
  for (std::size_t x = 0; x < mask.size(); ++x) {
    if (!labels.valid[x]) continue;
    const double diff = mask[x] - static_cast<double>(labels.clean[x]);
    sum += std::abs(diff);
    out.gradient[x] = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) * inv;
  }
  out.value = sum * inv;
  return out;
}

UncertaintyHead::UncertaintyHead(int n_images, Rng& rng, AdamConfig adam)
    : mlp_({kUncertaintyInputs, kHiddenUnits, kHiddenUnits, 1}, rng), n_images_(n_images) {
  std::normal_distribution<double> init(0.0, 0.1);
  embedding_.resize(static_cast<std::size_t>(kIdDims) * n_images);
  for (double& e : embedding_) e = init(rng);
  mlp_opt_ = Adam(mlp_.params().size(), adam);
  embedding_opt_ = Adam(embedding_.size(), adam);
}

void UncertaintyHead::set_state(Mlp mlp, std::vector<double> embedding, int n_images) {
  const AdamConfig adam = mlp_opt_.config();
  mlp_ = std::move(mlp);
  embedding_ = std::move(embedding);
  n_images_ = n_images;
  mlp_opt_ = Adam(mlp_.params().size(), adam);
  embedding_opt_ = Adam(embedding_.size(), adam);
}

Eigen::MatrixXd UncertaintyHead::inputs(const ViewFeatures& features) const {
  if (features.image_id < 0 || features.image_id >= n_images_) {
    throw ConfigError("image id outside the embedding table");
  }
  const auto n = static_cast<Eigen::Index>(features.width());
  Eigen::MatrixXd in(kUncertaintyInputs, n);
  in.topRows(kPosDims) = features.pos;
  Eigen::Map<const Eigen::VectorXd> id(embedding_.data() + static_cast<std::size_t>(kIdDims) * features.image_id,
                                       kIdDims);
  in.middleRows(kPosDims, kIdDims) = id.replicate(1, n);
  in.bottomRows(kPhotoDims) = features.photo;
  return in;
}

std::vector<double> UncertaintyHead::predict(const ViewFeatures& features) const {
  const Eigen::MatrixXd raw = mlp_.forward(inputs(features));
  std::vector<double> beta(static_cast<std::size_t>(raw.cols()));
  for (Eigen::Index x = 0; x < raw.cols(); ++x) beta[x] = softplus(raw(0, x)) + kBetaFloor;
  return beta;
}

double UncertaintyHead::loss_and_gradient(const ViewFeatures& features, std::span<const double> loss_map,
                                          std::vector<double>& grad_mlp,
                                          std::vector<double>& grad_embedding) const {
  Mlp::Cache cache;
  const Eigen::MatrixXd raw = mlp_.forward(inputs(features), &cache);
  const auto n = static_cast<std::size_t>(raw.cols());
  std::vector<double> beta(n);
  for (std::size_t x = 0; x < n; ++x) beta[x] = softplus(raw(0, x)) + kBetaFloor;
  const PixelLoss loss = uncertainty_loss(loss_map, beta);

  Eigen::MatrixXd d_raw(1, static_cast<Eigen::Index>(n));
  for (std::size_t x = 0; x < n; ++x) d_raw(0, x) = loss.gradient[x] * sigmoid(raw(0, x));
  grad_mlp.assign(mlp_.params().size(), 0.0);
  grad_embedding.assign(embedding_.size(), 0.0);
  const Eigen::MatrixXd d_in = mlp_.backward(cache, d_raw, grad_mlp);
  const Eigen::VectorXd d_id = d_in.middleRows(kPosDims, kIdDims).rowwise().sum();
  for (int d = 0; d < kIdDims; ++d) {
    grad_embedding[static_cast<std::size_t>(kIdDims) * features.image_id + d] = d_id(d);
  }
  return loss.value;
}

double UncertaintyHead::train_step(const ViewFeatures& features, std::span<const double> loss_map) {
  std::vector<double> g_mlp;
  std::vector<double> g_emb;
  const double value = loss_and_gradient(features, loss_map, g_mlp, g_emb);
  mlp_opt_.step(mlp_.params(), g_mlp);
  embedding_opt_.step(embedding_, g_emb);
  return value;
}

MaskHead::MaskHead(Rng& rng, AdamConfig adam) : mlp_({kMaskInputs, kHiddenUnits, kHiddenUnits, 1}, rng) {
  opt_ = Adam(mlp_.params().size(), adam);
}

void MaskHead::set_state(Mlp mlp) {
  const AdamConfig adam = opt_.config();
  mlp_ = std::move(mlp);
  opt_ = Adam(mlp_.params().size(), adam);
}

Eigen::MatrixXd MaskHead::inputs(const ViewFeatures& features, std::span<const double> beta) const {
  const auto n = static_cast<Eigen::Index>(features.width());
  Eigen::MatrixXd in(kMaskInputs, n);
  in.topRows(kPosDims) = features.pos;
  for (Eigen::Index x = 0; x < n; ++x) in(kPosDims, x) = beta[x];
  in.bottomRows(kPhotoDims) = features.photo;
  return in;
}

std::vector<double> MaskHead::predict(const ViewFeatures& features, std::span<const double> beta) const {
  const Eigen::MatrixXd raw = mlp_.forward(inputs(features, beta));
  std::vector<double> m(static_cast<std::size_t>(raw.cols()));
  for (Eigen::Index x = 0; x < raw.cols(); ++x) m[x] = sigmoid(raw(0, x));
  return m;
}

double MaskHead::loss_and_gradient(const ViewFeatures& features, std::span<const double> beta,
                                   const LabelMaps& labels, std::vector<double>& grad) const {
  Mlp::Cache cache;
  const Eigen::MatrixXd raw = mlp_.forward(inputs(features, beta), &cache);
  const auto n = static_cast<std::size_t>(raw.cols());
  std::vector<double> mask(n);
  for (std::size_t x = 0; x < n; ++x) mask[x] = sigmoid(raw(0, x));
  const PixelLoss loss = supervision_loss(mask, labels);
  Eigen::MatrixXd d_raw(1, static_cast<Eigen::Index>(n));
  for (std::size_t x = 0; x < n; ++x) d_raw(0, x) = loss.gradient[x] * mask[x] * (1.0 - mask[x]);
  grad.assign(mlp_.params().size(), 0.0);
  mlp_.backward(cache, d_raw, grad);
  return loss.value;
}

double MaskHead::train_step(const ViewFeatures& features, std::span<const double> beta, const LabelMaps& labels) {
  std::vector<double> grad;
  const double value = loss_and_gradient(features, beta, labels, grad);
  opt_.step(mlp_.params(), grad);
  return value;
}

}  // namespace flatsplat
