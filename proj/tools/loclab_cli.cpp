#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "loclab/experiments.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config, "INI config file (defaults apply to missing keys)");
  cmd->add_option("--set", common.overrides, "Override one key, e.g. --set task.k=100")->take_all();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized neural network classifiers on a synthetic boundary task"};
  app.require_subcommand(1);

  Common common;
  std::string mode = "regular";
  std::string kind, input, output;

  auto* generate = app.add_subcommand("generate", "Sample the training set");
  auto* train = app.add_subcommand("train", "Train one classifier and evaluate it");
  train->add_option("--mode", mode, "regular or localized")->check(CLI::IsMember({"regular", "localized"}));
  auto* sweep = app.add_subcommand("sweep-k", "Accuracy of both classifiers across k");
  auto* rate = app.add_subcommand("rate-curve", "Excess risk of both classifiers across n");
  auto* theory = app.add_subcommand("theory-check", "Numerical checks of the noise conditions");
  auto* stitch = app.add_subcommand("stitch-verify", "Stitch random local networks and verify exactness");
  auto* config_cmd = app.add_subcommand("print-config", "Print the effective configuration");
  for (auto* cmd : {generate, train, sweep, rate, theory, stitch, config_cmd}) add_common(cmd, common);

  auto* plot = app.add_subcommand("plot", "Render a results CSV as SVG");
  plot->add_option("--kind", kind, "acc, rate or scatter")->required()->check(CLI::IsMember({"acc", "rate", "scatter"}));
  plot->add_option("--input", input, "CSV file")->required();
  plot->add_option("--output", output, "SVG file")->required();
  add_common(plot, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : loclab::kExitConfig;
  }

  try {
    if (plot->parsed()) return loclab::cmd_plot(input, kind, output);
    const loclab::ExperimentConfig config = loclab::load_config(common.config, common.overrides);
    if (generate->parsed()) return loclab::cmd_generate(config);
    if (train->parsed()) return loclab::cmd_train(config, mode);
    if (sweep->parsed()) return loclab::cmd_sweep_k(config);
    if (rate->parsed()) return loclab::cmd_rate_curve(config);
    if (theory->parsed()) return loclab::cmd_theory_check(config);
    if (stitch->parsed()) return loclab::cmd_stitch_verify(config);
    if (config_cmd->parsed()) {
      std::cout << loclab::config_to_text(config);
      return loclab::kExitOk;
    }
  } catch (const loclab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return loclab::kExitConfig;
  } catch (const loclab::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return loclab::kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return loclab::kExitInternal;
  }
  return loclab::kExitInternal;
}
