#pragma once

// Estimators for the separation conditions of the synthetic task: the density
// gap profile m_x(t), the localized exponent K(x), the low-separation measure
// Q(|p - q| <= t), and the set distances d_delta and d_pq between
// boundary-fragment sets.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "loclab/numerics.hpp"
#include "loclab/synthetic_data.hpp"

namespace loclab {

// {x in [0,1]^2 : f(x1) - x2 >= 0}. Measures use f clipped to [0, 1].
struct BoundaryFragmentSet {
  std::function<double(double)> boundary;

  double clipped(double x1) const;
  bool contains(std::span<const double> point) const;
};

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS in log space
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::size_t points = 0;
};

struct GapValue {
  double offset = 0.0;
  double value = 0.0;
  bool valid = true;  // false when (x1, f(x1) + t) leaves the unit square
};

// |p - q| at (x1, f(x1) + t) for each offset t.
std::vector<GapValue> m_profile(double x1, std::span<const double> offsets, const SyntheticTask& task);

struct KEstimate {
  ExponentFit fit;
  double k_hat = 0.0;  // 1 / slope
};

// Log-log regression of m_profile over n_points log-spaced offsets in
// [t_lo, t_hi]. Throws std::domain_error if any m value is nonpositive or
// invalid.
KEstimate estimate_K(double x1, const SyntheticTask& task, double t_lo, double t_hi, int n_points);

struct Box {
  double x1_lo = 0.0, x1_hi = 1.0;
  double x2_lo = 0.0, x2_hi = 1.0;

  double volume() const { return (x1_hi - x1_lo) * (x2_hi - x2_lo); }
};

inline constexpr int kDefaultPanels = 4096;

// Q({x in region : |p - q| <= t}) under the uniform marginal. Quadrature
// integrates the closed-form band length along x1 with `budget` Simpson
// panels; Monte Carlo uses `budget` samples.
Estimate low_separation_measure(double t, const Box& region, const SyntheticTask& task,
                                IntegrationMethod method = IntegrationMethod::kQuadrature,
                                std::size_t budget = kDefaultPanels, std::uint64_t seed = 0);

struct RegionFit {
  std::string name;
  Box region;
  ExponentFit fit;
  double expected = 0.0;
  double rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

struct LowSeparationOptions {
  int t_points = 25;
  double global_tolerance = 0.05;
  double region_tolerance = 0.10;
  // Fits use offsets where the band half-width (3/4)(t/2)^K lies in this range.
  double width_lo = 1e-6;
  double width_hi_global = 1e-3;
  double width_hi_region = 0.2;
};

struct LowSeparationReport {
  RegionFit global;
  std::vector<RegionFit> regions;
  bool pass() const;
};

// Global fit of log Q(t) against log t (expected slope min K = 1/k) and one
// fit per plateau region (expected slope = plateau K).
LowSeparationReport check_low_separation(const SyntheticTask& task, const LowSeparationOptions& options = {});

// t-range on which the band half-width for exponent `k_value` spans [w_lo, w_hi].
std::pair<double, double> band_t_range(double k_value, double w_lo, double w_hi);

// Lebesgue measure of the symmetric difference: integral of |clip f1 - clip f2|.
double d_delta(const BoundaryFragmentSet& a, const BoundaryFragmentSet& b, int panels = kDefaultPanels);

// Integral of |p - q| over the symmetric difference (closed-form inner integral).
double d_pq(const BoundaryFragmentSet& a, const BoundaryFragmentSet& b, const SyntheticTask& task,
            int panels = kDefaultPanels);

struct DistanceRatioRow {
  double scale = 0.0;
  double d_delta = 0.0;
  double d_pq = 0.0;
  double ratio = 0.0;
  double log_ratio = 0.0;  // comparisons use this; ratio itself may overflow
  bool skipped = false;
};

struct DistanceRatioReport {
  std::string name;
  double kappa = 0.0;
  std::vector<DistanceRatioRow> rows;
  double min_ratio = 0.0;
  double median_ratio = 0.0;
  bool skipped = false;
  std::string note;
  bool pass = false;
};

// Ratios d_pq / d_delta^((kappa+1)/kappa) for perturbed boundaries f + s u.
// Passes iff min ratio >= 0.25 * median ratio (compared in log space). Perturbations with d_delta = 0
// are skipped with a note.
DistanceRatioReport check_distance_ratio(const SyntheticTask& task, const std::function<double(double)>& perturbation,
                        double kappa, std::span<const double> scales, std::string name = "perturbation");

}  // namespace loclab
