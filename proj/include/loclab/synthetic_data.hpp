#pragma once

// Two-dimensional synthetic classification task with a cosine decision
// boundary and a noise exponent that varies along the boundary.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "loclab/labeled_sample.hpp"
#include "loclab/numerics.hpp"

namespace loclab {

// How the designed exponent K(x1) enters the conditional probability.
//   kM1Consistent: 2*eta - 1 = sign(delta) |delta|^(1/K)   (default)
//   kLiteral:      2*eta - 1 = sign(delta) |delta|^K
//   kPureNoise:    eta == 1/2 everywhere (test hook)
enum class ExponentConvention { kM1Consistent, kLiteral, kPureNoise };

ExponentConvention parse_convention(const std::string& name);
std::string to_string(ExponentConvention convention);

struct NoiseProfile {
  double k = 1.0;
  ExponentConvention convention = ExponentConvention::kM1Consistent;

  // Plateau breakpoints of K(x1).
  static constexpr double kLowEnd = 0.3;
  static constexpr double kMidStart = 0.35;
  static constexpr double kMidEnd = 0.65;
  static constexpr double kHighStart = 0.7;

  void validate() const;
};

// K(x1): 1/k on [0, 0.3], 1 on [0.35, 0.65], k on [0.7, 1], linear in between.
double noise_exponent(double x1, const NoiseProfile& profile);

// f*(x1) = cos(6 pi x1) / 4 + 1/2. Throws std::out_of_range outside [0, 1].
double boundary_value(double x1);

// delta(x) = (4/3)(x2 - f*(x1)).
double signed_distance(std::span<const double> point);

struct Densities {
  double p = 1.0;
  double q = 1.0;
};

// Marginal of x is uniform on [0,1]^2. The boundary is exchangeable so other
// boundary fragments can be studied with the same noise model.
class SyntheticTask {
 public:
  using Boundary = std::function<double(double)>;

  explicit SyntheticTask(NoiseProfile profile = {});
  SyntheticTask(NoiseProfile profile, Boundary boundary);

  const NoiseProfile& profile() const { return profile_; }
  static constexpr std::size_t dimension() { return 2; }

  double boundary(double x1) const { return boundary_(x1); }
  // (4/3)(x2 - f(x1)), clamped to [-1, 1].
  double signed_distance(std::span<const double> point) const;
  // Exponent applied to |delta| in 2*eta - 1.
  double eta_exponent(double x1) const;
  // sign(delta) |delta|^e, i.e. 2*eta - 1.
  double margin(std::span<const double> point) const;
  double eta(std::span<const double> point) const;
  Densities densities(std::span<const double> point) const;
  // |p - q| = 2 |margin|, without the cancellation of subtracting densities.
  double density_gap(std::span<const double> point) const { return 2.0 * std::abs(margin(point)); }
  // sign(delta) with +1 on ties.
  int bayes_classify(std::span<const double> point) const;

  // n points uniform on [0,1]^2, label +1 with probability eta.
  Dataset sample(std::size_t n, std::uint64_t seed) const;

 private:
  void check_point(std::span<const double> point) const;

  NoiseProfile profile_;
  Boundary boundary_;
};

double eta(std::span<const double> point, const NoiseProfile& profile);
Densities densities(std::span<const double> point, const NoiseProfile& profile);
Dataset sample(std::size_t n, const NoiseProfile& profile, std::uint64_t seed);
int bayes_classify(std::span<const double> point);

enum class IntegrationMethod { kQuadrature, kMonteCarlo };

IntegrationMethod parse_integration_method(const std::string& name);
std::string to_string(IntegrationMethod method);

struct Estimate {
  double value = 0.0;
  // Standard error for Monte Carlo; |S(N) - S(N/2)| for quadrature.
  double error = 0.0;
};

// R* = E[min(eta, 1 - eta)] over uniform x. Quadrature budget is the number
// of Simpson panels per axis (2048 by default); Monte Carlo budget is the
// sample count.
Estimate bayes_risk(const SyntheticTask& task, IntegrationMethod method, std::size_t budget,
                    std::uint64_t seed = 0);

// CSV with header x1,x2,y and 17 significant digits.
void write_dataset_csv(const std::string& path, std::span<const LabeledSample> samples);
Dataset read_dataset_csv(const std::string& path);

struct DatasetMetadata {
  double k = 1.0;
  ExponentConvention convention = ExponentConvention::kM1Consistent;
  std::uint64_t seed = 0;
  std::size_t n = 0;
};

void write_metadata(const std::string& path, const DatasetMetadata& meta);
DatasetMetadata read_metadata(const std::string& path);

}  // namespace loclab
