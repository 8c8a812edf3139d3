#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace loclab {

// Seed stream used by every stochastic component. The engine is seeded through
// splitmix64 so nearby user seeds give unrelated streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Uniform double in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Child seed for stream `index` of `base`. Index 0 returns `base` unchanged.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

// Composite Simpson rule on [lo, hi] with `panels` subintervals (rounded up to even).
double simpson(const std::function<double(double)>& f, double lo, double hi, int panels);

// Pairwise summation in index order.
double pairwise_sum(std::span<const double> values);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
};

// Ordinary least squares y = intercept + slope * x. Needs at least 2 distinct x.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

std::vector<double> linspace(double lo, double hi, int count);
std::vector<double> logspace(double lo, double hi, int count);

// Shortest round-trip text.
std::string format_double(double value);

}  // namespace loclab
