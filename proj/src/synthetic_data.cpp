#include "loclab/synthetic_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "loclab/numerics.hpp"

namespace loclab {

ExponentConvention parse_convention(const std::string& name) {
  if (name == "m1_consistent") return ExponentConvention::kM1Consistent;
  if (name == "literal") return ExponentConvention::kLiteral;
  if (name == "pure_noise") return ExponentConvention::kPureNoise;
  throw std::invalid_argument("unknown convention '" + name + "' (expected m1_consistent, literal or pure_noise)");
}

std::string to_string(ExponentConvention convention) {
  switch (convention) {
    case ExponentConvention::kM1Consistent: return "m1_consistent";
    case ExponentConvention::kLiteral: return "literal";
    case ExponentConvention::kPureNoise: return "pure_noise";
  }
  return "unknown";
}

void NoiseProfile::validate() const {
  if (!(k >= 1.0) || !std::isfinite(k)) throw std::invalid_argument("NoiseProfile: k must be a finite real >= 1");
}

double noise_exponent(double x1, const NoiseProfile& profile) {
  if (!(x1 >= 0.0 && x1 <= 1.0)) throw std::out_of_range("noise_exponent: x1 outside [0, 1]");
  const double low = 1.0 / profile.k;
  const double high = profile.k;
  if (x1 <= NoiseProfile::kLowEnd) return low;
  if (x1 < NoiseProfile::kMidStart) {
    const double s = (x1 - NoiseProfile::kLowEnd) / (NoiseProfile::kMidStart - NoiseProfile::kLowEnd);
    return low + s * (1.0 - low);
  }
  if (x1 <= NoiseProfile::kMidEnd) return 1.0;
  if (x1 < NoiseProfile::kHighStart) {
    const double s = (x1 - NoiseProfile::kMidEnd) / (NoiseProfile::kHighStart - NoiseProfile::kMidEnd);
    return 1.0 + s * (high - 1.0);
  }
  return high;
}

double boundary_value(double x1) {
  if (!(x1 >= 0.0 && x1 <= 1.0)) throw std::out_of_range("boundary_value: x1 outside [0, 1]");
  return std::cos(6.0 * std::numbers::pi * x1) / 4.0 + 0.5;
}

namespace {

double raw_boundary(double x1) { return std::cos(6.0 * std::numbers::pi * x1) / 4.0 + 0.5; }

void require_unit_square(std::span<const double> point) {
  if (point.size() != 2) throw std::invalid_argument("expected a 2-dimensional point");
  for (double v : point) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::out_of_range("point outside [0,1]^2");
  }
}

}  // namespace

double signed_distance(std::span<const double> point) {
  require_unit_square(point);
  return (4.0 / 3.0) * (point[1] - raw_boundary(point[0]));
}

SyntheticTask::SyntheticTask(NoiseProfile profile) : SyntheticTask(profile, raw_boundary) {}

SyntheticTask::SyntheticTask(NoiseProfile profile, Boundary boundary)
    : profile_(profile), boundary_(std::move(boundary)) {
  profile_.validate();
  if (!boundary_) throw std::invalid_argument("SyntheticTask: empty boundary function");
}

void SyntheticTask::check_point(std::span<const double> point) const { require_unit_square(point); }

double SyntheticTask::signed_distance(std::span<const double> point) const {
  check_point(point);
  const double d = (4.0 / 3.0) * (point[1] - boundary_(point[0]));
  return std::clamp(d, -1.0, 1.0);
}

double SyntheticTask::eta_exponent(double x1) const {
  const double k_value = noise_exponent(x1, profile_);
  return profile_.convention == ExponentConvention::kLiteral ? k_value : 1.0 / k_value;
}

double SyntheticTask::margin(std::span<const double> point) const {
  if (profile_.convention == ExponentConvention::kPureNoise) {
    check_point(point);
    return 0.0;
  }
  const double d = signed_distance(point);
  if (d == 0.0) return 0.0;
  const double magnitude = std::pow(std::abs(d), eta_exponent(point[0]));
  return d > 0.0 ? magnitude : -magnitude;
}

double SyntheticTask::eta(std::span<const double> point) const {
  return std::clamp(0.5 * (1.0 + margin(point)), 0.0, 1.0);
}

Densities SyntheticTask::densities(std::span<const double> point) const {
  const double e = eta(point);
  return {2.0 * e, 2.0 - 2.0 * e};
}

int SyntheticTask::bayes_classify(std::span<const double> point) const {
  return signed_distance(point) >= 0.0 ? 1 : -1;
}

Dataset SyntheticTask::sample(std::size_t n, std::uint64_t seed) const {
  Dataset out;
  out.reserve(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSample s;
    s.point = {rng.uniform(), rng.uniform()};
    const double u = rng.uniform();
    s.label = u < eta(s.point) ? 1 : -1;
    out.push_back(std::move(s));
  }
  return out;
}

double eta(std::span<const double> point, const NoiseProfile& profile) {
  return SyntheticTask(profile).eta(point);
}

Densities densities(std::span<const double> point, const NoiseProfile& profile) {
  return SyntheticTask(profile).densities(point);
}

Dataset sample(std::size_t n, const NoiseProfile& profile, std::uint64_t seed) {
  return SyntheticTask(profile).sample(n, seed);
}

int bayes_classify(std::span<const double> point) { return signed_distance(point) >= 0.0 ? 1 : -1; }

IntegrationMethod parse_integration_method(const std::string& name) {
  if (name == "quadrature") return IntegrationMethod::kQuadrature;
  if (name == "monte_carlo") return IntegrationMethod::kMonteCarlo;
  throw std::invalid_argument("unknown method '" + name + "' (expected quadrature or monte_carlo)");
}

std::string to_string(IntegrationMethod method) {
  return method == IntegrationMethod::kQuadrature ? "quadrature" : "monte_carlo";
}

namespace {

double simpson_weight(int i, int panels) {
  if (i == 0 || i == panels) return 1.0;
  return i % 2 == 1 ? 4.0 : 2.0;
}

// Tensor-product Simpson of min(eta, 1 - eta) on [0,1]^2.
double bayes_risk_simpson(const SyntheticTask& task, int panels) {
  const double h = 1.0 / panels;
  std::vector<double> rows(static_cast<std::size_t>(panels) + 1);
  std::vector<double> inner(static_cast<std::size_t>(panels) + 1);
  for (int i = 0; i <= panels; ++i) {
    const double x1 = i * h;
    for (int j = 0; j <= panels; ++j) {
      const double pt[2] = {x1, j * h};
      const double e = task.eta(pt);
      inner[static_cast<std::size_t>(j)] = simpson_weight(j, panels) * std::min(e, 1.0 - e);
    }
    rows[static_cast<std::size_t>(i)] = simpson_weight(i, panels) * pairwise_sum(inner) * h / 3.0;
  }
  return pairwise_sum(rows) * h / 3.0;
}

}  // namespace

Estimate bayes_risk(const SyntheticTask& task, IntegrationMethod method, std::size_t budget,
                    std::uint64_t seed) {
  if (method == IntegrationMethod::kQuadrature) {
    int panels = static_cast<int>(std::max<std::size_t>(budget, 4));
    if (panels % 4 != 0) panels += 4 - panels % 4;
    const double fine = bayes_risk_simpson(task, panels);
    const double coarse = bayes_risk_simpson(task, panels / 2);
    return {fine, std::abs(fine - coarse)};
  }
  if (budget < 2) throw std::invalid_argument("bayes_risk: Monte Carlo needs at least 2 samples");
  Rng rng(seed);
  std::vector<double> values(budget);
  for (auto& v : values) {
    const double pt[2] = {rng.uniform(), rng.uniform()};
    const double e = task.eta(pt);
    v = std::min(e, 1.0 - e);
  }
  const double n = static_cast<double>(budget);
  const double mean = pairwise_sum(values) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}


void write_dataset_csv(const std::string& path, std::span<const LabeledSample> samples) {
  std::ostringstream body;
  body << "x1,x2,y\n";
  for (const auto& s : samples) {
    if (s.point.size() != 2) throw std::invalid_argument("write_dataset_csv: only 2-dimensional samples");
    body << format_double(s.point[0]) << ',' << format_double(s.point[1]) << ',' << s.label << '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset file " + path);
  out << body.str();
  if (!out) throw std::runtime_error("error writing dataset file " + path);
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dataset file " + path);
  std::string line;
  if (!std::getline(in, line) || line != "x1,x2,y") {
    throw std::runtime_error(path + ": expected header 'x1,x2,y'");
  }
  Dataset out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    LabeledSample s;
    double x1 = 0, x2 = 0;
    int y = 0;
    char c1 = 0, c2 = 0;
    std::istringstream ls(line);
    if (!(ls >> x1 >> c1 >> x2 >> c2 >> y) || c1 != ',' || c2 != ',' || (y != 1 && y != -1)) {
      throw std::runtime_error(path + ": malformed row " + std::to_string(row));
    }
    s.point = {x1, x2};
    s.label = y;
    out.push_back(std::move(s));
  }
  return out;
}

void write_metadata(const std::string& path, const DatasetMetadata& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write metadata file " + path);
  out << "k=" << format_double(meta.k) << '\n'
      << "convention=" << to_string(meta.convention) << '\n'
      << "seed=" << meta.seed << '\n'
      << "n=" << meta.n << '\n';
}

DatasetMetadata read_metadata(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read metadata file " + path);
  DatasetMetadata meta;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "k") meta.k = std::stod(value);
    else if (key == "convention") meta.convention = parse_convention(value);
    else if (key == "seed") meta.seed = std::stoull(value);
    else if (key == "n") meta.n = std::stoull(value);
  }
  return meta;
}

}  // namespace loclab
