#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "loclab/nn_core.hpp"
#include "loclab/numerics.hpp"

namespace loclab::testing {

inline Mlp random_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, Rng& rng, double scale = 1.0) {
  LayerStack layers;
  std::size_t fan_in = input_dim;
  std::vector<std::size_t> outs = hidden;
  outs.push_back(1);
  for (std::size_t out : outs) {
    DenseLayer layer{Eigen::MatrixXd(out, fan_in), Eigen::VectorXd(out)};
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = scale * (2.0 * rng.uniform() - 1.0);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = scale * (2.0 * rng.uniform() - 1.0);
    layers.push_back(std::move(layer));
    fan_in = out;
  }
  return Mlp(std::move(layers));
}

// Smallest |pre-activation| of any hidden unit over the given inputs.
inline double min_kink_distance(const Mlp& model, const std::vector<std::vector<double>>& points) {
  double best = INFINITY;
  for (const auto& p : points) {
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size()));
    const auto& layers = model.layers();
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
      const Eigen::VectorXd z = layers[l].weight * a + layers[l].bias;
      best = std::min(best, z.cwiseAbs().minCoeff());
      a = z.cwiseMax(0.0);
    }
  }
  return best;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

// Central differences of the mean batch loss against loss_and_grad. The
// relative error of each coordinate is |g - fd| / max(|g|, |fd|, floor).
inline GradCheck finite_difference_check(const Mlp& model, std::span<const LabeledSample> batch, LossKind kind,
                                         double step = 1e-5, double floor = 1e-4) {
  const LossAndGrad exact = loss_and_grad(model, batch, kind);
  const auto mean_loss = [&](const Mlp& m) {
    double total = 0.0;
    for (const auto& s : batch) total += loss_value(m.forward(s.point), s.label, kind);
    return total / static_cast<double>(batch.size());
  };
  GradCheck out;
  Mlp probe = model;
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto visit = [&](auto get, Eigen::Index count, auto grad_at) {
      for (Eigen::Index i = 0; i < count; ++i) {
        double& slot = get(probe, i);
        const double saved = slot;
        slot = saved + step;
        const double up = mean_loss(probe);
        slot = saved - step;
        const double down = mean_loss(probe);
        slot = saved;
        const double fd = (up - down) / (2.0 * step);
        const double g = grad_at(i);
        const double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), floor});
        out.max_rel_error = std::max(out.max_rel_error, rel);
        ++out.coordinates;
      }
    };
    visit([l](Mlp& m, Eigen::Index i) -> double& { return m.mutable_layers()[l].weight.data()[i]; },
          model.layers()[l].weight.size(), [&](Eigen::Index i) { return exact.grad[l].weight.data()[i]; });
    visit([l](Mlp& m, Eigen::Index i) -> double& { return m.mutable_layers()[l].bias(i); }, model.layers()[l].bias.size(),
          [&](Eigen::Index i) { return exact.grad[l].bias(i); });
  }
  return out;
}

// 50 random (net, batch) pairs with widths <= 16 and depth <= 3, redrawn
// whenever a pre-activation sits within 1e-4 of a ReLU kink (the difference
// step would cross it).
inline double gradient_check_suite(std::uint64_t seed, std::size_t nets = 50) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t trial = 0; trial < nets;) {
    const std::size_t input = 1 + rng.index(3);
    const std::size_t hidden_layers = rng.index(3);  // 0..2 hidden => depth 1..3
    std::vector<std::size_t> hidden;
    for (std::size_t h = 0; h < hidden_layers; ++h) hidden.push_back(1 + rng.index(16));
    const Mlp model = random_mlp(input, hidden, rng);
    Dataset batch;
    std::vector<std::vector<double>> points;
    const std::size_t n = 1 + rng.index(8);
    for (std::size_t i = 0; i < n; ++i) {
      LabeledSample s;
      for (std::size_t d = 0; d < input; ++d) s.point.push_back(2.0 * rng.uniform() - 1.0);
      s.label = rng.uniform() < 0.5 ? -1 : 1;
      points.push_back(s.point);
      batch.push_back(std::move(s));
    }
    if (min_kink_distance(model, points) < 1e-4) continue;
    const LossKind kind = trial % 5 == 4 ? LossKind::kHinge : LossKind::kCrossEntropy;
    if (kind == LossKind::kHinge) {
      bool near_kink = false;
      for (const auto& s : batch) near_kink |= std::abs(1.0 - s.label * model.forward(s.point)) < 1e-4;
      if (near_kink) continue;
    }
    worst = std::max(worst, finite_difference_check(model, batch, kind).max_rel_error);
    ++trial;
  }
  return worst;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("loclab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace loclab::testing
