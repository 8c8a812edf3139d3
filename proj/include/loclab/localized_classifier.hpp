#pragma once

// Divide-and-conquer classifier: an equal-width grid over the first d-1
// coordinates, one local network per cell, routed prediction, and the exact
// ReLU stitching f+ = f(g(x)) - f(h(x)) + c(x) that merges boundary-form
// local networks into a single network.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "loclab/labeled_sample.hpp"
#include "loclab/nn_core.hpp"

namespace loclab {

class GridPartition {
 public:
  // Throws std::invalid_argument unless M >= 1, reduced_dims >= 1 and 0 < xi < 1/(2M).
  GridPartition(std::size_t cells_per_axis, double xi, std::size_t reduced_dims = 1);

  std::size_t cells_per_axis() const { return m_; }
  double xi() const { return xi_; }
  std::size_t reduced_dims() const { return reduced_dims_; }
  std::size_t cell_count() const;

  // Interval [(j)/M, (j+1)/M) of a single axis (0-based j).
  std::pair<double, double> interval(std::size_t j) const;
  // Index along one axis; the last cell is closed on the right.
  std::size_t axis_cell(double v) const;
  // Row-major index over the first reduced_dims coordinates of `point`.
  std::size_t cell_of(std::span<const double> point) const;
  // True iff the reduced coordinates are within xi (sup-norm) of a grid point.
  bool in_band(std::span<const double> point) const;

 private:
  std::size_t m_;
  double xi_;
  std::size_t reduced_dims_;
};

// Continuous piecewise-linear function of one variable.
class PiecewiseLinear1D {
 public:
  enum class Extension { kConstant, kLinear };

  // Needs >= 2 breakpoints with strictly increasing x.
  explicit PiecewiseLinear1D(std::vector<std::pair<double, double>> breakpoints,
                             Extension extension = Extension::kConstant);

  double operator()(double x) const;
  const std::vector<std::pair<double, double>>& breakpoints() const { return points_; }
  Extension extension() const { return extension_; }
  std::size_t piece_count() const { return points_.size() - 1; }

 private:
  std::vector<std::pair<double, double>> points_;
  Extension extension_;
};

// One-hidden-layer ReLU network equal to `pwl` on all of R: an affine part
// (two units when the outer slope is nonzero) plus one unit per slope change.
Mlp pwl_to_relu(const PiecewiseLinear1D& pwl);

struct HelperFunctions {
  PiecewiseLinear1D clamp;   // g: x clamped to [a, b]
  PiecewiseLinear1D cutoff;  // h: a below a, b above b, 0 on [a+xi, b-xi]
  PiecewiseLinear1D offset;  // c: 0 outside [a, b], anchor on [a+xi, b-xi]
};

// Throws std::invalid_argument when b - a <= 2 xi.
HelperFunctions build_helpers(double a, double b, double xi, double anchor);

enum class ModelForm { kLogit, kBoundary };

ModelForm parse_model_form(const std::string& name);
std::string to_string(ModelForm form);

// Which side of a boundary-form curve carries label +1.
//   kBelow: +1 on {f(x_-d) - x_d >= 0}
//   kAbove: +1 on {x_d - f(x_-d) >= 0}, the synthetic task's +1 class
enum class BoundaryOrientation { kBelow, kAbove };

struct LocalizedModel {
  GridPartition partition;
  ModelForm form = ModelForm::kLogit;
  BoundaryOrientation orientation = BoundaryOrientation::kBelow;
  std::vector<Mlp> locals;
  std::vector<bool> degenerate;
  std::optional<Mlp> stitched;

  std::size_t param_count() const;
  // Throws std::invalid_argument when the invariants do not hold.
  void validate() const;

  void save(const std::string& directory) const;
  static LocalizedModel load(const std::string& directory);
};

// Routes each sample by cell_of and trains one network per cell with seed
// derive_seed(config.seed, cell). Logit form trains on the full point;
// boundary form trains f on the reduced point with score f(x_-d) - x_d
// (sign flipped for kAbove). Cells without data keep an all-zero network and
// are flagged degenerate.
LocalizedModel train_localized(std::span<const LabeledSample> dataset, const GridPartition& partition,
                               const MlpSpec& local_spec, const TrainConfig& config,
                               ModelForm form = ModelForm::kLogit,
                               BoundaryOrientation orientation = BoundaryOrientation::kAbove);

// Builds a boundary-form model from given local networks (input dim d-1).
LocalizedModel make_boundary_model(const GridPartition& partition, std::vector<Mlp> locals,
                                   BoundaryOrientation orientation = BoundaryOrientation::kBelow);

// Logit form: sign of the local score. Boundary form: sign of f_j(x_-d) - x_d
// (or its negation for kAbove). Ties give +1.
int predict_routed(const LocalizedModel& model, std::span<const double> point);
// Same for every column of `points`.
std::vector<int> predict_routed_batch(const LocalizedModel& model, const Eigen::MatrixXd& points);

// f+ for a single cell [a, b] of a 1-input boundary network.
Mlp stitch_cell(const Mlp& local, double a, double b, double xi);

// Network computing the sum of `nets` (same input dim) by parallel stacking.
// Shallower nets are padded with identity layers.
Mlp stack_parallel_sum(std::span<const Mlp> nets);

// Appends identity layers until `net` has `depth` affine layers.
Mlp pad_depth(const Mlp& net, std::size_t depth);

struct StitchedNetwork {
  Mlp network;             // sum over cells of f+_j
  std::vector<Mlp> cells;  // f+_j per cell
};

// Requires one 1-input local per cell and partition.reduced_dims() == 1.
StitchedNetwork stitch(std::span<const Mlp> locals, const GridPartition& partition);

// Extra affine layers the helper stage adds in front of a local network.
inline constexpr std::size_t kStitchExtraDepth = 1;
// Helper-unit allowance per cell in the width accounting.
inline constexpr std::size_t kHelperUnitsPerCell = 15;

struct P123Report {
  double p1_max_error = 0.0;     // max |f+_j - f_j| on cell interiors
  double p2_max_value = 0.0;     // max |f+_j| outside cell j
  double sum_max_error = 0.0;    // max |f_sum - f_j| on cell interiors
  std::size_t interior_points = 0;
  std::size_t exterior_points = 0;
  std::size_t local_depth = 0;
  std::size_t local_width = 0;
  std::size_t stitched_depth = 0;
  std::size_t stitched_width = 0;
  std::size_t width_bound = 0;
  double max_abs_weight = 0.0;
  bool p1_pass = false;
  bool p2_pass = false;
  bool p3_pass = false;
  bool pass() const { return p1_pass && p2_pass && p3_pass; }
};

inline constexpr double kStitchTolerance = 1e-9;

P123Report verify_p123(const StitchedNetwork& stitched, std::span<const Mlp> locals,
                       const GridPartition& partition, std::size_t grid_points);

}  // namespace loclab
