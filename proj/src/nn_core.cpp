#include "loclab/nn_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "loclab/numerics.hpp"

namespace loclab {

void MlpSpec::validate() const {
  if (input_dim == 0) throw std::invalid_argument("MlpSpec: input_dim must be >= 1");
  for (std::size_t w : hidden_widths) {
    if (w == 0) throw std::invalid_argument("MlpSpec: hidden widths must be >= 1");
  }
}

std::size_t MlpSpec::max_width() const {
  std::size_t w = 1;
  for (std::size_t h : hidden_widths) w = std::max(w, h);
  return w;
}

std::size_t MlpSpec::param_count() const {
  std::size_t total = 0;
  std::size_t fan_in = input_dim;
  for (std::size_t w : hidden_widths) {
    total += (fan_in + 1) * w;
    fan_in = w;
  }
  return total + fan_in + 1;
}

MlpSpec MlpSpec::uniform(std::size_t input_dim, std::size_t depth, std::size_t width) {
  if (depth == 0) throw std::invalid_argument("MlpSpec: depth must be >= 1");
  MlpSpec spec{input_dim, std::vector<std::size_t>(depth - 1, width)};
  spec.validate();
  return spec;
}

namespace {

MlpSpec spec_from_layers(const LayerStack& layers) {
  if (layers.empty()) throw std::invalid_argument("Mlp: at least one layer required");
  MlpSpec spec;
  spec.input_dim = static_cast<std::size_t>(layers.front().weight.cols());
  Eigen::Index fan_in = layers.front().weight.cols();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (layer.weight.cols() != fan_in || layer.bias.size() != layer.weight.rows()) {
      throw std::invalid_argument("Mlp: inconsistent layer shapes at layer " + std::to_string(i));
    }
    if (i + 1 < layers.size()) spec.hidden_widths.push_back(static_cast<std::size_t>(layer.weight.rows()));
    fan_in = layer.weight.rows();
  }
  if (layers.back().weight.rows() != 1) throw std::invalid_argument("Mlp: output layer must have one unit");
  spec.validate();
  return spec;
}

}  // namespace

Mlp::Mlp(LayerStack layers) : spec_(spec_from_layers(layers)), layers_(std::move(layers)) {}

double Mlp::forward(std::span<const double> point) const {
  if (point.size() != spec_.input_dim) {
    throw std::invalid_argument("Mlp::forward: expected " + std::to_string(spec_.input_dim) +
                                " inputs, got " + std::to_string(point.size()));
  }
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(point.data(), static_cast<Eigen::Index>(point.size()));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = layers_[l].weight * a + layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a(0);
}

Eigen::VectorXd Mlp::forward_batch(const Eigen::MatrixXd& points) const {
  if (static_cast<std::size_t>(points.rows()) != spec_.input_dim) {
    throw std::invalid_argument("Mlp::forward_batch: input dimension mismatch");
  }
  Eigen::MatrixXd a = points;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a.row(0).transpose();
}

double Mlp::max_abs_weight() const {
  double m = 0.0;
  for (const auto& layer : layers_) {
    m = std::max({m, layer.weight.cwiseAbs().maxCoeff(), layer.bias.cwiseAbs().maxCoeff()});
  }
  return m;
}

bool Mlp::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

void Mlp::save(std::ostream& out) const {
  out << "mlp " << spec_.input_dim;
  for (std::size_t w : spec_.hidden_widths) out << ' ' << w;
  out << '\n';
  const auto old_precision = out.precision(17);
  for (const auto& layer : layers_) {
    out << '\n';
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        if (c) out << ' ';
        out << layer.weight(r, c);
      }
      out << '\n';
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      if (r) out << ' ';
      out << layer.bias(r);
    }
    out << '\n';
  }
  out.precision(old_precision);
}

Mlp Mlp::load(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("Mlp::load: missing header");
  std::istringstream hs(header);
  std::string tag;
  MlpSpec spec;
  if (!(hs >> tag >> spec.input_dim) || tag != "mlp") {
    throw std::runtime_error("Mlp::load: header must read 'mlp <input_dim> <hidden_widths...>'");
  }
  std::size_t w = 0;
  while (hs >> w) spec.hidden_widths.push_back(w);
  spec.validate();
  LayerStack layers = zero_layers(spec);
  for (auto& layer : layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        if (!(in >> layer.weight(r, c))) throw std::runtime_error("Mlp::load: truncated weights");
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      if (!(in >> layer.bias(r))) throw std::runtime_error("Mlp::load: truncated biases");
    }
  }
  return Mlp(std::move(layers));
}

void Mlp::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file " + path);
  save(out);
  if (!out) throw std::runtime_error("error writing model file " + path);
}

Mlp Mlp::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read model file " + path);
  return load(in);
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const auto& la = a.layers_[i];
    const auto& lb = b.layers_[i];
    if (la.weight.rows() != lb.weight.rows() || la.weight.cols() != lb.weight.cols()) return false;
    if (la.weight != lb.weight || la.bias != lb.bias) return false;
  }
  return true;
}

LayerStack zero_layers(const MlpSpec& spec) {
  spec.validate();
  LayerStack layers;
  std::size_t fan_in = spec.input_dim;
  auto add = [&](std::size_t fan_out) {
    layers.push_back({Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in)),
                      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan_out))});
    fan_in = fan_out;
  };
  for (std::size_t w : spec.hidden_widths) add(w);
  add(1);
  return layers;
}

LayerStack zero_layers_like(const LayerStack& layers) {
  LayerStack out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    out.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  }
  return out;
}

Mlp mlp_init(const MlpSpec& spec, std::uint64_t seed) {
  LayerStack layers = zero_layers(spec);
  Rng rng(seed);
  for (auto& layer : layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = bound * (2.0 * rng.uniform() - 1.0);
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = bound * (2.0 * rng.uniform() - 1.0);
  }
  return Mlp(std::move(layers));
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "cross_entropy") return LossKind::kCrossEntropy;
  if (name == "hinge") return LossKind::kHinge;
  throw std::invalid_argument("unknown loss '" + name + "' (expected cross_entropy or hinge)");
}

std::string to_string(LossKind kind) {
  return kind == LossKind::kCrossEntropy ? "cross_entropy" : "hinge";
}

double loss_value(double score, int label, LossKind kind) {
  const double margin = static_cast<double>(label) * score;
  if (kind == LossKind::kHinge) return std::max(0.0, 1.0 - margin);
  // log(1 + exp(-m)) without overflow.
  return margin > 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
}

double loss_derivative(double score, int label, LossKind kind) {
  const double y = static_cast<double>(label);
  const double margin = y * score;
  if (kind == LossKind::kHinge) return margin < 1.0 ? -y : 0.0;
  // -y * sigmoid(-m)
  if (margin >= 0.0) {
    const double e = std::exp(-margin);
    return -y * e / (1.0 + e);
  }
  return -y / (1.0 + std::exp(margin));
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("TrainConfig: " + what); };
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) fail("initial_lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail("weight_decay must be nonnegative");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) fail("lr_decay_factor must lie in (0, 1]");
  if (lr_decay_every == 0) fail("lr_decay_every must be positive");
}

Eigen::MatrixXd pack_points(std::span<const LabeledSample> samples) {
  if (samples.empty()) return {};
  const auto d = static_cast<Eigen::Index>(samples.front().point.size());
  Eigen::MatrixXd points(d, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (static_cast<Eigen::Index>(samples[i].point.size()) != d) {
      throw std::invalid_argument("pack_points: samples have mixed dimensions");
    }
    for (Eigen::Index r = 0; r < d; ++r) points(r, static_cast<Eigen::Index>(i)) = samples[i].point[static_cast<std::size_t>(r)];
  }
  return points;
}

namespace {

Eigen::VectorXd pack_labels(std::span<const LabeledSample> samples) {
  Eigen::VectorXd labels(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) labels(static_cast<Eigen::Index>(i)) = samples[i].label;
  return labels;
}

}  // namespace

LossAndGrad loss_and_grad(const Mlp& model, std::span<const LabeledSample> batch, LossKind kind) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  return loss_and_grad(model, pack_points(batch), pack_labels(batch), kind);
}

LossAndGrad loss_and_grad(const Mlp& model, const Eigen::MatrixXd& points,
                          const Eigen::VectorXd& labels, LossKind kind,
                          const Eigen::VectorXd* offsets) {
  const Eigen::Index n = points.cols();
  if (n == 0) throw std::invalid_argument("loss_and_grad: empty batch");
  if (labels.size() != n) throw std::invalid_argument("loss_and_grad: label count mismatch");
  if (offsets && offsets->size() != n) throw std::invalid_argument("loss_and_grad: offset count mismatch");
  if (static_cast<std::size_t>(points.rows()) != model.spec().input_dim) {
    throw std::invalid_argument("loss_and_grad: input dimension mismatch");
  }
  const auto& layers = model.layers();
  const std::size_t depth = layers.size();

  // activations[0] = input, activations[l] = output of affine layer l (post-ReLU for hidden).
  std::vector<Eigen::MatrixXd> activations(depth + 1);
  activations[0] = points;
  for (std::size_t l = 0; l < depth; ++l) {
    Eigen::MatrixXd z = layers[l].weight * activations[l];
    z.colwise() += layers[l].bias;
    if (l + 1 < depth) z = z.cwiseMax(0.0);
    activations[l + 1] = std::move(z);
  }

  LossAndGrad result;
  result.grad = zero_layers_like(layers);
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd delta(1, n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = activations[depth](0, i) + (offsets ? (*offsets)(i) : 0.0);
    const int y = labels(i) > 0.0 ? 1 : -1;
    total += loss_value(z, y, kind);
    delta(0, i) = loss_derivative(z, y, kind) * inv_n;
  }
  result.loss = total * inv_n;

  for (std::size_t l = depth; l-- > 0;) {
    result.grad[l].weight.noalias() = delta * activations[l].transpose();
    result.grad[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = layers[l].weight.transpose() * delta;
    // ReLU subgradient: 0 at the kink (post-activation equals 0 iff pre-activation <= 0).
    delta = (activations[l].array() > 0.0).select(back, 0.0);
  }
  return result;
}

OptState OptState::zeros_like(const Mlp& model) {
  return OptState{zero_layers_like(model.layers()), 0};
}

double lr_at(std::uint64_t iter, const TrainConfig& config) {
  const auto steps = iter / config.lr_decay_every;
  return config.initial_lr * std::pow(config.lr_decay_factor, static_cast<double>(steps));
}

void sgd_step(Mlp& model, const LayerStack& grad, OptState& state, const TrainConfig& config) {
  auto& layers = model.mutable_layers();
  if (grad.size() != layers.size() || state.velocity.size() != layers.size()) {
    throw std::invalid_argument("sgd_step: shape mismatch");
  }
  const double lr = lr_at(state.iter, config);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& p = layers[l];
    auto& v = state.velocity[l];
    v.weight = config.momentum * v.weight + (grad[l].weight + config.weight_decay * p.weight);
    v.bias = config.momentum * v.bias + (grad[l].bias + config.weight_decay * p.bias);
    p.weight -= lr * v.weight;
    p.bias -= lr * v.bias;
  }
  ++state.iter;
}

namespace {

Mlp run_sgd(const Eigen::MatrixXd& points, const Eigen::VectorXd& labels, const Eigen::VectorXd* offsets,
            const MlpSpec& spec, const TrainConfig& config) {
  config.validate();
  Mlp model = mlp_init(spec, config.seed);
  if (config.total_iters == 0) return model;
  if (static_cast<std::size_t>(points.rows()) != spec.input_dim) {
    throw std::invalid_argument("train: dataset dimension does not match spec");
  }
  const auto n = static_cast<std::size_t>(points.cols());
  Rng batch_rng(derive_seed(config.seed, 1));
  OptState state = OptState::zeros_like(model);
  const auto b = static_cast<Eigen::Index>(config.batch_size);
  Eigen::MatrixXd batch_points(points.rows(), b);
  Eigen::VectorXd batch_labels(b);
  Eigen::VectorXd batch_offsets(offsets ? b : 0);
  for (std::uint64_t it = 0; it < config.total_iters; ++it) {
    for (Eigen::Index j = 0; j < b; ++j) {
      const auto idx = static_cast<Eigen::Index>(batch_rng.index(n));
      batch_points.col(j) = points.col(idx);
      batch_labels(j) = labels(idx);
      if (offsets) batch_offsets(j) = (*offsets)(idx);
    }
    const LossAndGrad lg =
        loss_and_grad(model, batch_points, batch_labels, config.loss, offsets ? &batch_offsets : nullptr);
    sgd_step(model, lg.grad, state, config);
  }
  return model;
}

}  // namespace

Mlp train(std::span<const LabeledSample> dataset, const MlpSpec& spec, const TrainConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  return run_sgd(pack_points(dataset), pack_labels(dataset), nullptr, spec, config);
}

Mlp train_boundary(std::span<const LabeledSample> dataset, const MlpSpec& spec, const TrainConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("train_boundary: empty dataset");
  const Eigen::MatrixXd full = pack_points(dataset);
  if (full.rows() < 2) throw std::invalid_argument("train_boundary: points need at least 2 coordinates");
  const Eigen::Index reduced = full.rows() - 1;
  const Eigen::MatrixXd points = full.topRows(reduced);
  const Eigen::VectorXd offsets = -full.row(reduced).transpose();
  return run_sgd(points, pack_labels(dataset), &offsets, spec, config);
}

}  // namespace loclab
