#pragma once

// Dense ReLU multilayer perceptron with scalar output, hand-written
// backpropagation and SGD with momentum / weight decay / step decay.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "loclab/labeled_sample.hpp"

namespace loclab {

struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_widths;

  // Throws std::invalid_argument on zero input dim or zero width.
  void validate() const;
  // Number of affine layers (hidden layers + output).
  std::size_t depth() const { return hidden_widths.size() + 1; }
  std::size_t max_width() const;
  std::size_t param_count() const;

  // `depth` affine layers, all hidden layers of the same width.
  static MlpSpec uniform(std::size_t input_dim, std::size_t depth, std::size_t width);
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // fan_out x fan_in
  Eigen::VectorXd bias;    // fan_out
};

using LayerStack = std::vector<DenseLayer>;

class Mlp {
 public:
  explicit Mlp(LayerStack layers);

  const MlpSpec& spec() const { return spec_; }
  const LayerStack& layers() const { return layers_; }
  LayerStack& mutable_layers() { return layers_; }

  // Throws std::invalid_argument when point.size() != input_dim.
  double forward(std::span<const double> point) const;
  // Columns of `points` are inputs; returns one score per column.
  Eigen::VectorXd forward_batch(const Eigen::MatrixXd& points) const;

  std::size_t param_count() const { return spec_.param_count(); }
  double max_abs_weight() const;
  bool all_finite() const;

  void save(std::ostream& out) const;
  static Mlp load(std::istream& in);
  void save_file(const std::string& path) const;
  static Mlp load_file(const std::string& path);

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  MlpSpec spec_;
  LayerStack layers_;
};

// Zero-valued layers with the shapes of `spec`.
LayerStack zero_layers(const MlpSpec& spec);
LayerStack zero_layers_like(const LayerStack& layers);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
Mlp mlp_init(const MlpSpec& spec, std::uint64_t seed);

enum class LossKind { kCrossEntropy, kHinge };

LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

// l(z, y) = log(1 + exp(-y z)) or max(0, 1 - y z).
double loss_value(double score, int label, LossKind kind);
// dl/dz, with 0 at the hinge kink.
double loss_derivative(double score, int label, LossKind kind);

struct TrainConfig {
  double initial_lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.001;
  std::size_t batch_size = 100;
  std::uint64_t total_iters = 10000;
  double lr_decay_factor = 0.1;
  std::uint64_t lr_decay_every = 2000;
  LossKind loss = LossKind::kCrossEntropy;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossAndGrad {
  double loss = 0.0;
  LayerStack grad;
};

// Mean loss over the batch and its exact gradient. Throws on an empty batch.
LossAndGrad loss_and_grad(const Mlp& model, std::span<const LabeledSample> batch, LossKind kind);
// Same, on pre-packed inputs (columns) and labels. When `offsets` is given the
// score of column i is f(x_i) + offsets(i).
LossAndGrad loss_and_grad(const Mlp& model, const Eigen::MatrixXd& points,
                          const Eigen::VectorXd& labels, LossKind kind,
                          const Eigen::VectorXd* offsets = nullptr);

struct OptState {
  LayerStack velocity;
  std::uint64_t iter = 0;

  static OptState zeros_like(const Mlp& model);
};

// g' = grad + decay * p; v = momentum * v + g'; p -= lr(iter) * v; ++iter.
void sgd_step(Mlp& model, const LayerStack& grad, OptState& state, const TrainConfig& config);

double lr_at(std::uint64_t iter, const TrainConfig& config);

// Runs config.total_iters minibatch steps, batches drawn with replacement.
// Throws std::invalid_argument on an empty dataset.
Mlp train(std::span<const LabeledSample> dataset, const MlpSpec& spec, const TrainConfig& config);

// Boundary-form training: f sees the first d-1 coordinates and the score is
// f(x_-d) - x_d. `spec.input_dim` must be d-1.
Mlp train_boundary(std::span<const LabeledSample> dataset, const MlpSpec& spec, const TrainConfig& config);

// Packs sample points as matrix columns.
Eigen::MatrixXd pack_points(std::span<const LabeledSample> samples);

}  // namespace loclab
