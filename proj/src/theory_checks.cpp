#include "loclab/theory_checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace loclab {

double BoundaryFragmentSet::clipped(double x1) const { return std::clamp(boundary(x1), 0.0, 1.0); }

bool BoundaryFragmentSet::contains(std::span<const double> point) const {
  return boundary(point[0]) - point[1] >= 0.0;
}

std::vector<GapValue> m_profile(double x1, std::span<const double> offsets, const SyntheticTask& task) {
  std::vector<GapValue> out;
  out.reserve(offsets.size());
  const double f = task.boundary(x1);
  for (double t : offsets) {
    GapValue g{t, std::numeric_limits<double>::quiet_NaN(), false};
    const double x2 = f + t;
    if (x1 >= 0.0 && x1 <= 1.0 && x2 >= 0.0 && x2 <= 1.0) {
      const double pt[2] = {x1, x2};
      g.value = task.density_gap(pt);
      g.valid = true;
    }
    out.push_back(g);
  }
  return out;
}

namespace {

ExponentFit loglog_fit(std::span<const double> t, std::span<const double> v) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < t.size(); ++i) {
    lx.push_back(std::log(t[i]));
    ly.push_back(std::log(v[i]));
  }
  const LineFit line = fit_line(lx, ly);
  return {line.slope, line.intercept, line.rms_residual, t.front(), t.back(), t.size()};
}

}  // namespace

KEstimate estimate_K(double x1, const SyntheticTask& task, double t_lo, double t_hi, int n_points) {
  if (!(t_lo > 0.0 && t_hi > t_lo) || n_points < 2) throw std::invalid_argument("estimate_K: bad offset range");
  const auto offsets = logspace(t_lo, t_hi, n_points);
  const auto gaps = m_profile(x1, offsets, task);
  std::vector<double> values;
  for (const auto& g : gaps) {
    if (!g.valid) throw std::domain_error("estimate_K: offset leaves the unit square");
    if (!(g.value > 0.0)) throw std::domain_error("estimate_K: nonpositive m value, log undefined");
    values.push_back(g.value);
  }
  KEstimate est;
  est.fit = loglog_fit(offsets, values);
  est.k_hat = 1.0 / est.fit.slope;
  return est;
}

namespace {

// Length of {x2 in [lo, hi] : |p - q| <= t} at fixed x1.
double band_length(double x1, double t, double lo, double hi, const SyntheticTask& task) {
  if (task.profile().convention == ExponentConvention::kPureNoise || t >= 2.0) return hi - lo;
  // |p - q| = 2 |delta|^e <= t  <=>  |x2 - f| <= (3/4) (t/2)^(1/e)
  const double e = task.eta_exponent(x1);
  const double half = 0.75 * std::pow(t / 2.0, 1.0 / e);
  const double f = task.boundary(x1);
  const double a = std::max(lo, f - half);
  const double b = std::min(hi, f + half);
  return std::max(0.0, b - a);
}

}  // namespace

Estimate low_separation_measure(double t, const Box& region, const SyntheticTask& task, IntegrationMethod method,
                                std::size_t budget, std::uint64_t seed) {
  if (!(t > 0.0)) throw std::invalid_argument("low_separation_measure: t must be positive");
  if (method == IntegrationMethod::kQuadrature) {
    const int panels = static_cast<int>(std::max<std::size_t>(budget, 2));
    const auto length = [&](double x1) { return band_length(x1, t, region.x2_lo, region.x2_hi, task); };
    const double fine = simpson(length, region.x1_lo, region.x1_hi, panels);
    const double coarse = simpson(length, region.x1_lo, region.x1_hi, std::max(2, panels / 2));
    return {fine, std::abs(fine - coarse)};
  }
  if (budget < 2) throw std::invalid_argument("low_separation_measure: Monte Carlo needs at least 2 samples");
  Rng rng(seed);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < budget; ++i) {
    const double pt[2] = {region.x1_lo + (region.x1_hi - region.x1_lo) * rng.uniform(),
                          region.x2_lo + (region.x2_hi - region.x2_lo) * rng.uniform()};
    if (task.density_gap(pt) <= t) ++hits;
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(budget);
  const double vol = region.volume();
  return {frac * vol, vol * std::sqrt(frac * (1.0 - frac) / static_cast<double>(budget))};
}

std::pair<double, double> band_t_range(double k_value, double w_lo, double w_hi) {
  // (3/4)(t/2)^K = w  <=>  t = 2 (4w/3)^(1/K). For small K this underflows,
  // so t is kept at or above 1e-300.
  constexpr double kFloor = 1e-300;
  const double lo = std::max(kFloor, 2.0 * std::pow(w_lo / 0.75, 1.0 / k_value));
  const double hi = std::max(kFloor * 1e3, 2.0 * std::pow(w_hi / 0.75, 1.0 / k_value));
  return {lo, hi};
}

namespace {

RegionFit fit_region(const std::string& name, const Box& box, double expected, double k_for_range, double w_lo,
                     double w_hi, double tolerance, int t_points, const SyntheticTask& task) {
  RegionFit r;
  r.name = name;
  r.region = box;
  r.expected = expected;
  r.tolerance = tolerance;
  const auto [t_lo, t_hi] = band_t_range(k_for_range, w_lo, w_hi);
  r.fit.t_lo = t_lo;
  r.fit.t_hi = t_hi;
  const auto ts = logspace(t_lo, t_hi, t_points);
  std::vector<double> qs;
  for (double t : ts) {
    const double q = low_separation_measure(t, box, task).value;
    if (!(q > 0.0)) {
      r.note = "measure underflows to zero at t=" + format_double(t);
      r.rel_error = std::numeric_limits<double>::infinity();
      return r;
    }
    qs.push_back(q);
  }
  r.fit = loglog_fit(ts, qs);
  r.rel_error = std::abs(r.fit.slope - expected) / expected;
  r.pass = r.rel_error <= tolerance;
  return r;
}

}  // namespace

bool LowSeparationReport::pass() const {
  if (!global.pass) return false;
  return std::all_of(regions.begin(), regions.end(), [](const RegionFit& r) { return r.pass; });
}

LowSeparationReport check_low_separation(const SyntheticTask& task, const LowSeparationOptions& options) {
  const double k = task.profile().k;
  const double kappa_minus = 1.0 / k;
  LowSeparationReport report;
  report.global = fit_region("global", Box{}, kappa_minus, kappa_minus, options.width_lo, options.width_hi_global,
                             options.global_tolerance, options.t_points, task);
  struct Plateau {
    const char* name;
    double lo, hi, k_value;
  };
  const Plateau plateaus[] = {{"low_plateau", 0.05, 0.25, 1.0 / k}, {"mid_plateau", 0.40, 0.60, 1.0}, {"high_plateau", 0.75, 0.95, k}};
  for (const auto& p : plateaus) {
    report.regions.push_back(fit_region(p.name, Box{p.lo, p.hi, 0.0, 1.0}, p.k_value, p.k_value, options.width_lo,
                                        options.width_hi_region, options.region_tolerance, options.t_points, task));
  }
  return report;
}

double d_delta(const BoundaryFragmentSet& a, const BoundaryFragmentSet& b, int panels) {
  return simpson([&](double x1) { return std::abs(a.clipped(x1) - b.clipped(x1)); }, 0.0, 1.0, panels);
}

namespace {

// Antiderivative in x2 of |p - q| = 2 |u|^e with u = (4/3)(x2 - f).
double gap_antiderivative(double x2, double f, double e) {
  const double u = (4.0 / 3.0) * (x2 - f);
  const double mag = std::pow(std::abs(u), e + 1.0) / (e + 1.0);
  return 1.5 * (u >= 0.0 ? mag : -mag);
}

}  // namespace

double d_pq(const BoundaryFragmentSet& a, const BoundaryFragmentSet& b, const SyntheticTask& task, int panels) {
  if (task.profile().convention == ExponentConvention::kPureNoise) return 0.0;
  const auto inner = [&](double x1) {
    const double fa = a.clipped(x1);
    const double fb = b.clipped(x1);
    const double lo = std::min(fa, fb);
    const double hi = std::max(fa, fb);
    if (hi == lo) return 0.0;
    const double f = task.boundary(x1);
    const double e = task.eta_exponent(x1);
    return gap_antiderivative(hi, f, e) - gap_antiderivative(lo, f, e);
  };
  return simpson(inner, 0.0, 1.0, panels);
}

DistanceRatioReport check_distance_ratio(const SyntheticTask& task, const std::function<double(double)>& perturbation, double kappa,
                        std::span<const double> scales, std::string name) {
  if (!(kappa > 0.0)) throw std::invalid_argument("check_distance_ratio: kappa must be positive");
  DistanceRatioReport report;
  report.name = std::move(name);
  report.kappa = kappa;
  const BoundaryFragmentSet truth{[&task](double x1) { return task.boundary(x1); }};
  const double power = (kappa + 1.0) / kappa;
  std::vector<double> logs;
  for (double s : scales) {
    const BoundaryFragmentSet moved{[&task, &perturbation, s](double x1) { return task.boundary(x1) + s * perturbation(x1); }};
    DistanceRatioRow row;
    row.scale = s;
    row.d_delta = d_delta(truth, moved);
    row.d_pq = d_pq(truth, moved, task);
    if (row.d_delta == 0.0) {
      row.skipped = true;
    } else {
      row.log_ratio = std::log(row.d_pq) - power * std::log(row.d_delta);
      row.ratio = std::exp(row.log_ratio);
      logs.push_back(row.log_ratio);
    }
    report.rows.push_back(row);
  }
  if (logs.empty()) {
    report.skipped = true;
    report.note = "degenerate perturbation: d_delta = 0 at every scale";
    report.pass = true;
    return report;
  }
  if (logs.size() < scales.size()) report.note = "scales with d_delta = 0 skipped";
  std::sort(logs.begin(), logs.end());
  const std::size_t mid = logs.size() / 2;
  const double log_median = logs.size() % 2 ? logs[mid] : 0.5 * (logs[mid - 1] + logs[mid]);
  report.min_ratio = std::exp(logs.front());
  report.median_ratio = std::exp(log_median);
  report.pass = std::isfinite(logs.front()) && logs.front() >= log_median + std::log(0.25);
  return report;
}

}  // namespace loclab
