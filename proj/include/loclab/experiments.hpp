#pragma once

// End-to-end experiment harness behind the `loclab` command-line tool.

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "loclab/localized_classifier.hpp"
#include "loclab/nn_core.hpp"
#include "loclab/risk_eval.hpp"
#include "loclab/synthetic_data.hpp"

namespace loclab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitCheckFailed = 4,
};

struct ExperimentConfig {
  // [task]
  NoiseProfile profile{};
  std::uint64_t data_seed = 7;
  std::size_t n_train = 1000;

  // [classifier]
  ModelForm form = ModelForm::kLogit;
  std::size_t cells = 5;
  double xi = 1e-4;
  std::size_t regular_depth = 3;
  std::size_t regular_width = 250;
  std::size_t local_depth = 3;
  std::size_t local_width = 100;
  std::size_t stitch_depth = 3;
  std::size_t stitch_width = 64;
  std::size_t stitch_grid = 100000;

  // [trainer]
  TrainConfig trainer{};

  // [eval]
  std::size_t n_test = 1000000;
  IntegrationMethod method = IntegrationMethod::kMonteCarlo;
  std::uint64_t eval_seed = 2024;
  std::size_t threads = 0;  // 0 = hardware concurrency
  double k_tolerance = 0.05;
  double region_tolerance = 0.10;

  // [sweep]
  std::vector<double> k_list{1, 5, 10, 100};
  std::vector<std::size_t> n_list{200, 800, 3200, 12800};
  std::size_t replicates = 10;
  double rate_k = 10;

  // [output]
  std::string output_dir = "results";

  MlpSpec regular_spec() const;
  MlpSpec local_spec() const;
  GridPartition partition() const;
};

// Every known key with its default value, as "section.key" -> text.
std::map<std::string, std::string> default_config_entries();
// Default configuration in the INI format read by load_config.
std::string default_config_text();

// Reads an INI file (empty path = defaults only), then applies "section.key=value"
// overrides. Unknown keys and invalid values raise ConfigError.
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

// Runs fn(i) for i in [0, jobs) on `threads` workers; rethrows the first failure.
void parallel_for(std::size_t jobs, std::size_t threads, const std::function<void(std::size_t)>& fn);

// Writes `content` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& content);

// Renders a config in the INI format read by load_config.
std::string config_to_text(const ExperimentConfig& config);

// One trained-and-evaluated classifier.
struct RunRow {
  std::string classifier;  // "regular" or "localized"
  double k = 0.0;
  std::size_t n_train = 0;
  std::size_t replicate = 0;
  RiskReport report;
  bool ok = true;
  std::string error;
};

struct SummaryRow {
  std::string classifier;
  double k = 0.0;
  std::size_t n_train = 0;
  std::size_t replicates = 0;  // successful runs
  double mean_accuracy = 0.0;
  double sd_accuracy = 0.0;
  double mean_excess = 0.0;
  double sd_excess = 0.0;
  double mean_stderr = 0.0;  // mean Monte Carlo standard error of the excess
  double bayes_accuracy = 0.0;
  bool below_noise_floor = false;  // mean_excess < 3 * mean_stderr
};

struct SlopeFit {
  std::string classifier;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
  std::size_t points_used = 0;
  std::vector<std::size_t> excluded_n;
  bool valid = false;
};

// Trains and evaluates both classifiers for every (k, n, replicate) on the work
// pool. Training data is fixed by task.seed; the replicates vary the trainer
// seed and the test draw. Failures are captured per row. Sorted by
// (k, n, classifier, replicate).
std::vector<RunRow> run_grid(const ExperimentConfig& config, const std::vector<double>& k_values,
                             const std::vector<std::size_t>& n_values,
                             const std::function<void(const RunRow&)>& on_done = {});

// Mean and sample SD per (k, n, classifier), same order as the rows.
std::vector<SummaryRow> summarize(const std::vector<RunRow>& rows);

// Log-log slope of mean excess against n per classifier, skipping rows below
// the noise floor.
std::vector<SlopeFit> fit_rates(const std::vector<SummaryRow>& summary);

// Each command returns an ExitCode; ConfigError / DataError propagate.
int cmd_generate(const ExperimentConfig& config);
int cmd_train(const ExperimentConfig& config, const std::string& mode);
int cmd_sweep_k(const ExperimentConfig& config);
int cmd_rate_curve(const ExperimentConfig& config);
int cmd_theory_check(const ExperimentConfig& config);
int cmd_stitch_verify(const ExperimentConfig& config);
// kind is one of acc, rate, scatter.
int cmd_plot(const std::string& input_csv, const std::string& kind, const std::string& output_svg);

// Trainer seed and evaluation seed for a replicate.
std::uint64_t replicate_train_seed(const ExperimentConfig& config, std::size_t replicate);
std::uint64_t replicate_eval_seed(const ExperimentConfig& config, std::size_t replicate);

}  // namespace loclab
