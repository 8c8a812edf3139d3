#include "loclab/localized_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "loclab/numerics.hpp"

namespace loclab {

// ---------------------------------------------------------------------------
// GridPartition

GridPartition::GridPartition(std::size_t cells_per_axis, double xi, std::size_t reduced_dims)
    : m_(cells_per_axis), xi_(xi), reduced_dims_(reduced_dims) {
  if (m_ == 0) throw std::invalid_argument("GridPartition: M must be >= 1");
  if (reduced_dims_ == 0) throw std::invalid_argument("GridPartition: reduced_dims must be >= 1");
  if (!(xi_ > 0.0) || !(xi_ < 0.5 / static_cast<double>(m_))) {
    throw std::invalid_argument("GridPartition: xi must lie in (0, 1/(2M))");
  }
}

std::size_t GridPartition::cell_count() const {
  std::size_t n = 1;
  for (std::size_t i = 0; i < reduced_dims_; ++i) n *= m_;
  return n;
}

std::pair<double, double> GridPartition::interval(std::size_t j) const {
  const double m = static_cast<double>(m_);
  return {static_cast<double>(j) / m, static_cast<double>(j + 1) / m};
}

std::size_t GridPartition::axis_cell(double v) const {
  const double m = static_cast<double>(m_);
  auto j = static_cast<long long>(std::floor(v * m));
  j = std::clamp<long long>(j, 0, static_cast<long long>(m_) - 1);
  // Repair rounding in v * M so the cell matches the interval endpoints.
  if (j > 0 && v < static_cast<double>(j) / m) --j;
  if (j + 1 < static_cast<long long>(m_) && v >= static_cast<double>(j + 1) / m) ++j;
  return static_cast<std::size_t>(j);
}

std::size_t GridPartition::cell_of(std::span<const double> point) const {
  if (point.size() < reduced_dims_) throw std::invalid_argument("cell_of: point has too few coordinates");
  std::size_t index = 0;
  for (std::size_t i = 0; i < reduced_dims_; ++i) index = index * m_ + axis_cell(point[i]);
  return index;
}

bool GridPartition::in_band(std::span<const double> point) const {
  if (point.size() < reduced_dims_) throw std::invalid_argument("in_band: point has too few coordinates");
  const double m = static_cast<double>(m_);
  for (std::size_t i = 0; i < reduced_dims_; ++i) {
    const double nearest = std::clamp(std::round(point[i] * m), 0.0, m) / m;
    if (std::abs(point[i] - nearest) > xi_) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// PiecewiseLinear1D

PiecewiseLinear1D::PiecewiseLinear1D(std::vector<std::pair<double, double>> breakpoints, Extension extension)
    : points_(std::move(breakpoints)), extension_(extension) {
  if (points_.size() < 2) throw std::invalid_argument("PiecewiseLinear1D: need at least 2 breakpoints");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i].first) || !std::isfinite(points_[i].second)) {
      throw std::invalid_argument("PiecewiseLinear1D: breakpoints must be finite");
    }
    if (i > 0 && !(points_[i].first > points_[i - 1].first)) {
      throw std::invalid_argument("PiecewiseLinear1D: breakpoint x values must be strictly increasing");
    }
  }
}

double PiecewiseLinear1D::operator()(double x) const {
  const auto slope = [&](std::size_t i) {
    return (points_[i + 1].second - points_[i].second) / (points_[i + 1].first - points_[i].first);
  };
  if (x <= points_.front().first) {
    if (extension_ == Extension::kConstant) return points_.front().second;
    return points_.front().second + slope(0) * (x - points_.front().first);
  }
  if (x >= points_.back().first) {
    if (extension_ == Extension::kConstant) return points_.back().second;
    return points_.back().second + slope(points_.size() - 2) * (x - points_.back().first);
  }
  const auto it = std::upper_bound(points_.begin(), points_.end(), x,
                                   [](double v, const auto& p) { return v < p.first; });
  const std::size_t i = static_cast<std::size_t>(it - points_.begin()) - 1;
  const double t = (x - points_[i].first) / (points_[i + 1].first - points_[i].first);
  return points_[i].second + t * (points_[i + 1].second - points_[i].second);
}

Mlp pwl_to_relu(const PiecewiseLinear1D& pwl) {
  const auto& pts = pwl.breakpoints();
  const std::size_t m = pts.size();
  std::vector<double> slopes(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) {
    slopes[i] = (pts[i + 1].second - pts[i].second) / (pts[i + 1].first - pts[i].first);
  }
  const bool linear = pwl.extension() == PiecewiseLinear1D::Extension::kLinear;
  const double left_slope = linear ? slopes.front() : 0.0;
  const double right_slope = linear ? slopes.back() : 0.0;

  // f(x) = v0 + s_left (x - x0) + sum_i (s_after_i - s_before_i) relu(x - x_i)
  std::vector<double> unit_weight, unit_bias, out_weight;
  if (left_slope != 0.0) {
    unit_weight.insert(unit_weight.end(), {1.0, -1.0});
    unit_bias.insert(unit_bias.end(), {0.0, 0.0});
    out_weight.insert(out_weight.end(), {left_slope, -left_slope});
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double before = i == 0 ? left_slope : slopes[i - 1];
    const double after = i + 1 == m ? right_slope : slopes[i];
    const double change = after - before;
    if (change == 0.0) continue;
    unit_weight.push_back(1.0);
    unit_bias.push_back(-pts[i].first);
    out_weight.push_back(change);
  }
  if (unit_weight.empty()) {
    // Constant function; keep one idle unit so the network has a hidden layer.
    unit_weight.push_back(0.0);
    unit_bias.push_back(0.0);
    out_weight.push_back(0.0);
  }
  const auto units = static_cast<Eigen::Index>(unit_weight.size());
  DenseLayer hidden{Eigen::MatrixXd(units, 1), Eigen::VectorXd(units)};
  DenseLayer output{Eigen::MatrixXd(1, units), Eigen::VectorXd::Constant(1, pts.front().second - left_slope * pts.front().first)};
  for (Eigen::Index u = 0; u < units; ++u) {
    hidden.weight(u, 0) = unit_weight[static_cast<std::size_t>(u)];
    hidden.bias(u) = unit_bias[static_cast<std::size_t>(u)];
    output.weight(0, u) = out_weight[static_cast<std::size_t>(u)];
  }
  return Mlp({std::move(hidden), std::move(output)});
}

HelperFunctions build_helpers(double a, double b, double xi, double anchor) {
  if (!(xi > 0.0)) throw std::invalid_argument("build_helpers: xi must be positive");
  if (!(b - a > 2.0 * xi)) throw std::invalid_argument("build_helpers: need b - a > 2 xi");
  return HelperFunctions{
      PiecewiseLinear1D({{a, a}, {b, b}}),
      PiecewiseLinear1D({{a, a}, {a + xi, 0.0}, {b - xi, 0.0}, {b, b}}),
      PiecewiseLinear1D({{a, 0.0}, {a + xi, anchor}, {b - xi, anchor}, {b, 0.0}}),
  };
}

ModelForm parse_model_form(const std::string& name) {
  if (name == "logit") return ModelForm::kLogit;
  if (name == "boundary") return ModelForm::kBoundary;
  throw std::invalid_argument("unknown model form '" + name + "' (expected logit or boundary)");
}

std::string to_string(ModelForm form) { return form == ModelForm::kLogit ? "logit" : "boundary"; }

namespace {

std::string to_string(BoundaryOrientation o) { return o == BoundaryOrientation::kBelow ? "below" : "above"; }

BoundaryOrientation parse_orientation(const std::string& name) {
  if (name == "below") return BoundaryOrientation::kBelow;
  if (name == "above") return BoundaryOrientation::kAbove;
  throw std::invalid_argument("unknown boundary orientation '" + name + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// LocalizedModel

std::size_t LocalizedModel::param_count() const {
  std::size_t total = 0;
  for (const auto& m : locals) total += m.param_count();
  return total;
}

void LocalizedModel::validate() const {
  if (locals.size() != partition.cell_count()) {
    throw std::invalid_argument("LocalizedModel: expected one local model per cell");
  }
  if (degenerate.size() != locals.size()) throw std::invalid_argument("LocalizedModel: degenerate flags mismatch");
  if (stitched && form != ModelForm::kBoundary) {
    throw std::invalid_argument("LocalizedModel: stitched network requires boundary form");
  }
}

void LocalizedModel::save(const std::string& directory) const {
  validate();
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  std::ostringstream manifest;
  manifest << "M=" << partition.cells_per_axis() << '\n'
           << "xi=" << format_double(partition.xi()) << '\n'
           << "reduced_dims=" << partition.reduced_dims() << '\n'
           << "model_form=" << to_string(form) << '\n'
           << "orientation=" << to_string(orientation) << '\n'
           << "cells=" << locals.size() << '\n';
  for (std::size_t j = 0; j < locals.size(); ++j) {
    const std::string name = "cell_" + std::to_string(j) + ".mlp";
    locals[j].save_file((fs::path(directory) / name).string());
    manifest << "cell_" << j << '=' << name << ' ' << (degenerate[j] ? "degenerate" : "trained") << '\n';
  }
  if (stitched) {
    stitched->save_file((fs::path(directory) / "stitched.mlp").string());
    manifest << "stitched=stitched.mlp\n";
  }
  std::ofstream out(fs::path(directory) / "manifest.txt", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest in " + directory);
  out << manifest.str();
}

LocalizedModel LocalizedModel::load(const std::string& directory) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(directory) / "manifest.txt");
  if (!in) throw std::runtime_error("cannot read manifest in " + directory);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("manifest missing key '" + key + "'");
    return it->second;
  };
  LocalizedModel model{GridPartition(std::stoull(need("M")), std::stod(need("xi")), std::stoull(need("reduced_dims"))),
                       parse_model_form(need("model_form")), parse_orientation(need("orientation")), {}, {}, {}};
  const std::size_t cells = std::stoull(need("cells"));
  for (std::size_t j = 0; j < cells; ++j) {
    std::istringstream entry(need("cell_" + std::to_string(j)));
    std::string file, status;
    entry >> file >> status;
    model.locals.push_back(Mlp::load_file((fs::path(directory) / file).string()));
    model.degenerate.push_back(status == "degenerate");
  }
  if (kv.count("stitched")) model.stitched = Mlp::load_file((fs::path(directory) / kv["stitched"]).string());
  model.validate();
  return model;
}

LocalizedModel train_localized(std::span<const LabeledSample> dataset, const GridPartition& partition,
                               const MlpSpec& local_spec, const TrainConfig& config, ModelForm form,
                               BoundaryOrientation orientation) {
  if (dataset.empty()) throw std::invalid_argument("train_localized: empty dataset");
  const std::size_t d = dataset.front().point.size();
  if (d != partition.reduced_dims() + 1) {
    throw std::invalid_argument("train_localized: partition expects points of dimension " +
                                std::to_string(partition.reduced_dims() + 1));
  }
  const std::size_t expected_input = form == ModelForm::kLogit ? d : d - 1;
  if (local_spec.input_dim != expected_input) {
    throw std::invalid_argument("train_localized: local spec input_dim should be " + std::to_string(expected_input));
  }
  std::vector<Dataset> routed(partition.cell_count());
  for (const auto& s : dataset) routed[partition.cell_of(s.point)].push_back(s);

  LocalizedModel model{partition, form, orientation, {}, {}, {}};
  for (std::size_t j = 0; j < routed.size(); ++j) {
    if (routed[j].empty()) {
      model.locals.emplace_back(zero_layers(local_spec));
      model.degenerate.push_back(true);
      continue;
    }
    TrainConfig cell_config = config;
    cell_config.seed = derive_seed(config.seed, j);
    if (form == ModelForm::kLogit) {
      model.locals.push_back(train(routed[j], local_spec, cell_config));
    } else {
      if (orientation == BoundaryOrientation::kAbove) {
        for (auto& s : routed[j]) s.label = -s.label;
      }
      model.locals.push_back(train_boundary(routed[j], local_spec, cell_config));
    }
    model.degenerate.push_back(false);
  }
  return model;
}

LocalizedModel make_boundary_model(const GridPartition& partition, std::vector<Mlp> locals,
                                   BoundaryOrientation orientation) {
  LocalizedModel model{partition, ModelForm::kBoundary, orientation, std::move(locals), {}, {}};
  model.degenerate.assign(model.locals.size(), false);
  for (const auto& m : model.locals) {
    if (m.spec().input_dim != partition.reduced_dims()) {
      throw std::invalid_argument("make_boundary_model: local networks must take d-1 inputs");
    }
  }
  model.validate();
  return model;
}

namespace {

int boundary_label(double f, double last, BoundaryOrientation orientation) {
  const double v = orientation == BoundaryOrientation::kBelow ? f - last : last - f;
  return v >= 0.0 ? 1 : -1;
}

}  // namespace

int predict_routed(const LocalizedModel& model, std::span<const double> point) {
  const std::size_t cell = model.partition.cell_of(point);
  const Mlp& local = model.locals[cell];
  if (model.form == ModelForm::kLogit) return local.forward(point) >= 0.0 ? 1 : -1;
  const std::size_t r = model.partition.reduced_dims();
  if (point.size() != r + 1) throw std::invalid_argument("predict_routed: point dimension mismatch");
  return boundary_label(local.forward(point.first(r)), point[r], model.orientation);
}

std::vector<int> predict_routed_batch(const LocalizedModel& model, const Eigen::MatrixXd& points) {
  const std::size_t r = model.partition.reduced_dims();
  if (static_cast<std::size_t>(points.rows()) != r + 1) {
    throw std::invalid_argument("predict_routed_batch: point dimension mismatch");
  }
  std::vector<std::vector<Eigen::Index>> members(model.locals.size());
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    const double* col = points.col(c).data();
    members[model.partition.cell_of(std::span<const double>(col, r))].push_back(c);
  }
  std::vector<int> labels(static_cast<std::size_t>(points.cols()), 1);
  for (std::size_t j = 0; j < members.size(); ++j) {
    const auto& idx = members[j];
    if (idx.empty()) continue;
    const Eigen::Index rows = model.form == ModelForm::kLogit ? points.rows() : static_cast<Eigen::Index>(r);
    Eigen::MatrixXd sub(rows, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) sub.col(static_cast<Eigen::Index>(i)) = points.col(idx[i]).head(rows);
    const Eigen::VectorXd scores = model.locals[j].forward_batch(sub);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double s = scores(static_cast<Eigen::Index>(i));
      labels[static_cast<std::size_t>(idx[i])] =
          model.form == ModelForm::kLogit ? (s >= 0.0 ? 1 : -1)
                                          : boundary_label(s, points(static_cast<Eigen::Index>(r), idx[i]), model.orientation);
    }
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Network stacking

Mlp pad_depth(const Mlp& net, std::size_t depth) {
  LayerStack layers = net.layers();
  while (layers.size() < depth) {
    DenseLayer& out = layers.back();
    DenseLayer split{Eigen::MatrixXd(2, out.weight.cols()), Eigen::VectorXd(2)};
    split.weight.row(0) = out.weight.row(0);
    split.weight.row(1) = -out.weight.row(0);
    split.bias << out.bias(0), -out.bias(0);
    out = std::move(split);
    DenseLayer merge{Eigen::MatrixXd(1, 2), Eigen::VectorXd::Zero(1)};
    merge.weight << 1.0, -1.0;
    layers.push_back(std::move(merge));
  }
  return Mlp(std::move(layers));
}

Mlp stack_parallel_sum(std::span<const Mlp> nets) {
  if (nets.empty()) throw std::invalid_argument("stack_parallel_sum: no networks");
  const std::size_t input_dim = nets.front().spec().input_dim;
  std::size_t depth = 0;
  for (const auto& n : nets) {
    if (n.spec().input_dim != input_dim) throw std::invalid_argument("stack_parallel_sum: input dims differ");
    depth = std::max(depth, n.spec().depth());
  }
  std::vector<Mlp> padded;
  padded.reserve(nets.size());
  for (const auto& n : nets) padded.push_back(pad_depth(n, depth));

  LayerStack layers(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    const bool first = l == 0;
    const bool last = l + 1 == depth;
    Eigen::Index rows = 0, cols = 0;
    for (const auto& n : padded) {
      rows += n.layers()[l].weight.rows();
      cols += n.layers()[l].weight.cols();
    }
    if (first) cols = static_cast<Eigen::Index>(input_dim);
    if (last) rows = 1;
    DenseLayer merged{Eigen::MatrixXd::Zero(rows, cols), Eigen::VectorXd::Zero(rows)};
    Eigen::Index r0 = 0, c0 = 0;
    for (const auto& n : padded) {
      const auto& src = n.layers()[l];
      const Eigen::Index rr = last ? 0 : r0;
      const Eigen::Index cc = first ? 0 : c0;
      if (last) {
        merged.weight.block(0, cc, 1, src.weight.cols()) += src.weight;
        merged.bias(0) += src.bias(0);
      } else {
        merged.weight.block(rr, cc, src.weight.rows(), src.weight.cols()) = src.weight;
        merged.bias.segment(rr, src.bias.size()) = src.bias;
      }
      r0 += src.weight.rows();
      c0 += src.weight.cols();
    }
    layers[l] = std::move(merged);
  }
  return Mlp(std::move(layers));
}

namespace {

struct HelperUnits {
  Eigen::VectorXd weight;   // input weight per unit
  Eigen::VectorXd bias;     // bias per unit
  Eigen::RowVectorXd out;   // output coefficient per unit
  double out_bias = 0.0;
};

HelperUnits units_of(const PiecewiseLinear1D& pwl) {
  const Mlp net = pwl_to_relu(pwl);
  const auto& hidden = net.layers()[0];
  const auto& output = net.layers()[1];
  return {hidden.weight.col(0), hidden.bias, output.weight.row(0), output.bias(0)};
}

}  // namespace

Mlp stitch_cell(const Mlp& local, double a, double b, double xi) {
  if (local.spec().input_dim != 1) throw std::invalid_argument("stitch_cell: local network must take one input");
  const double origin[1] = {0.0};
  const double anchor = local.forward(origin);
  // c = anchor * c_unit with c_unit in [0, 1], so the carried value stays nonnegative.
  const HelperFunctions helpers = build_helpers(a, b, xi, 1.0);
  const HelperUnits g = units_of(helpers.clamp);
  const HelperUnits h = units_of(helpers.cutoff);
  const HelperUnits c = units_of(helpers.offset);
  const Eigen::Index ng = g.weight.size(), nh = h.weight.size(), nc = c.weight.size();
  const Eigen::Index nhelp = ng + nh + nc;

  DenseLayer helper_layer{Eigen::MatrixXd(nhelp, 1), Eigen::VectorXd(nhelp)};
  helper_layer.weight.col(0) << g.weight, h.weight, c.weight;
  helper_layer.bias << g.bias, h.bias, c.bias;

  const LayerStack& f = local.layers();
  LayerStack layers;
  layers.push_back(std::move(helper_layer));

  if (f.size() == 1) {
    // Affine local: f(u) = w u + b0, so f(g) - f(h) + c is affine in the helper units.
    const double w = f[0].weight(0, 0);
    DenseLayer out{Eigen::MatrixXd(1, nhelp), Eigen::VectorXd(1)};
    out.weight.row(0) << w * g.out, -w * h.out, anchor * c.out;
    out.bias(0) = w * g.out_bias - w * h.out_bias + anchor * c.out_bias;
    layers.push_back(std::move(out));
    return Mlp(std::move(layers));
  }

  // First local layer fed by g (copy A), h (copy B), plus a carry unit for c.
  const Eigen::Index w0 = f[0].weight.rows();
  DenseLayer first{Eigen::MatrixXd::Zero(2 * w0 + 1, nhelp), Eigen::VectorXd(2 * w0 + 1)};
  first.weight.block(0, 0, w0, ng) = f[0].weight.col(0) * g.out;
  first.weight.block(w0, ng, w0, nh) = f[0].weight.col(0) * h.out;
  first.weight.block(2 * w0, ng + nh, 1, nc) = c.out;
  first.bias << f[0].bias + f[0].weight.col(0) * g.out_bias, f[0].bias + f[0].weight.col(0) * h.out_bias, c.out_bias;
  layers.push_back(std::move(first));

  for (std::size_t l = 1; l + 1 < f.size(); ++l) {
    const Eigen::Index rows = f[l].weight.rows(), cols = f[l].weight.cols();
    DenseLayer mid{Eigen::MatrixXd::Zero(2 * rows + 1, 2 * cols + 1), Eigen::VectorXd(2 * rows + 1)};
    mid.weight.block(0, 0, rows, cols) = f[l].weight;
    mid.weight.block(rows, cols, rows, cols) = f[l].weight;
    mid.weight(2 * rows, 2 * cols) = 1.0;
    mid.bias << f[l].bias, f[l].bias, 0.0;
    layers.push_back(std::move(mid));
  }

  const DenseLayer& last = f.back();
  const Eigen::Index cols = last.weight.cols();
  DenseLayer out{Eigen::MatrixXd(1, 2 * cols + 1), Eigen::VectorXd::Zero(1)};
  out.weight.row(0) << last.weight.row(0), -last.weight.row(0), anchor;
  layers.push_back(std::move(out));
  return Mlp(std::move(layers));
}

StitchedNetwork stitch(std::span<const Mlp> locals, const GridPartition& partition) {
  if (partition.reduced_dims() != 1) throw std::invalid_argument("stitch: only d = 2 is supported");
  if (locals.size() != partition.cell_count()) {
    throw std::invalid_argument("stitch: expected " + std::to_string(partition.cell_count()) + " local networks, got " +
                                std::to_string(locals.size()));
  }
  StitchedNetwork result{Mlp(zero_layers(MlpSpec{1, {1}})), {}};
  for (std::size_t j = 0; j < locals.size(); ++j) {
    if (locals[j].spec().input_dim != 1) throw std::invalid_argument("stitch: local networks must be boundary form");
    const auto [a, b] = partition.interval(j);
    result.cells.push_back(stitch_cell(locals[j], a, b, partition.xi()));
  }
  result.network = stack_parallel_sum(result.cells);
  return result;
}

P123Report verify_p123(const StitchedNetwork& stitched, std::span<const Mlp> locals,
                       const GridPartition& partition, std::size_t grid_points) {
  if (locals.size() != stitched.cells.size() || locals.size() != partition.cell_count()) {
    throw std::invalid_argument("verify_p123: partition/model mismatch");
  }
  const std::vector<double> grid = linspace(0.0, 1.0, static_cast<int>(grid_points));
  const Eigen::MatrixXd inputs = Eigen::Map<const Eigen::RowVectorXd>(grid.data(), static_cast<Eigen::Index>(grid.size()));
  const Eigen::VectorXd total = stitched.network.forward_batch(inputs);

  P123Report report;
  const double xi = partition.xi();
  for (std::size_t j = 0; j < locals.size(); ++j) {
    const auto [a, b] = partition.interval(j);
    const Eigen::VectorXd plus = stitched.cells[j].forward_batch(inputs);
    const Eigen::VectorXd raw = locals[j].forward_batch(inputs);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double x = grid[i];
      const auto ii = static_cast<Eigen::Index>(i);
      if (x >= a + xi && x <= b - xi) {
        report.p1_max_error = std::max(report.p1_max_error, std::abs(plus(ii) - raw(ii)));
        report.sum_max_error = std::max(report.sum_max_error, std::abs(total(ii) - raw(ii)));
        ++report.interior_points;
      } else if (x < a || x > b) {
        report.p2_max_value = std::max(report.p2_max_value, std::abs(plus(ii)));
        ++report.exterior_points;
      }
    }
    report.local_depth = std::max(report.local_depth, locals[j].spec().depth());
    report.local_width = std::max(report.local_width, locals[j].spec().max_width());
  }
  const std::size_t cells = locals.size();
  report.stitched_depth = stitched.network.spec().depth();
  report.stitched_width = stitched.network.spec().max_width();
  report.width_bound = 2 * cells * report.local_width + kHelperUnitsPerCell * cells;
  report.max_abs_weight = stitched.network.max_abs_weight();
  report.p1_pass = report.p1_max_error < kStitchTolerance && report.sum_max_error < kStitchTolerance;
  report.p2_pass = report.p2_max_value < kStitchTolerance;
  report.p3_pass = report.stitched_depth <= report.local_depth + kStitchExtraDepth &&
                   report.stitched_width <= report.width_bound;
  return report;
}

}  // namespace loclab
