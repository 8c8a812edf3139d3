#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "loclab/experiments.hpp"
#include "support.hpp"

using namespace loclab;
namespace fs = std::filesystem;

namespace {

// Tiny networks and short training so the end-to-end paths run in seconds.
ExperimentConfig small_config(const fs::path& dir) {
  return load_config("", {"output.dir=" + dir.string(), "task.n_train=300", "classifier.regular_width=16",
                          "classifier.local_width=8", "trainer.iters=200", "eval.n_test=20000", "sweep.replicates=2",
                          "classifier.stitch_width=8", "classifier.stitch_grid=2000"});
}

std::size_t line_count(const fs::path& p) {
  const std::string s = testing::slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("config defaults") {
  const ExperimentConfig c = load_config("");
  CHECK(c.profile.k == 1.0);
  CHECK(c.n_train == 1000);
  CHECK(c.cells == 5);
  CHECK(c.xi == 1e-4);
  CHECK(c.regular_spec().param_count() == 63751);
  CHECK(c.local_spec().param_count() == 10501);
  CHECK(c.trainer.total_iters > 0);
  CHECK(c.k_list == std::vector<double>{1, 5, 10, 100});
  CHECK(c.n_test == 1000000);
  CHECK(default_config_entries().count("trainer.lr") == 1);
}

TEST_CASE("config round trip through a file") {
  const auto dir = testing::scratch_dir("config");
  ExperimentConfig c = load_config("", {"task.k=10", "sweep.n_list=100,200", "classifier.form=boundary", "eval.method=quadrature"});
  std::ofstream(dir / "c.ini") << config_to_text(c);
  const ExperimentConfig back = load_config((dir / "c.ini").string());
  CHECK(config_to_text(back) == config_to_text(c));
  CHECK(back.profile.k == 10.0);
  CHECK(back.n_list == std::vector<std::size_t>{100, 200});
  CHECK(back.form == ModelForm::kBoundary);
  CHECK(back.local_spec().input_dim == 1);

  std::ofstream(dir / "default.ini") << default_config_text();
  CHECK(config_to_text(load_config((dir / "default.ini").string())) == default_config_text());
}

TEST_CASE("config errors") {
  const auto dir = testing::scratch_dir("config_errors");
  CHECK_THROWS_AS(load_config("", {"task.bogus=1"}), ConfigError);
  CHECK_THROWS_AS(load_config("", {"task.k=abc"}), ConfigError);
  CHECK_THROWS_AS(load_config("", {"task.k=0.5"}), ConfigError);
  CHECK_THROWS_AS(load_config("", {"classifier.xi=0.1"}), ConfigError);  // needs xi < 1/(2M)
  CHECK_THROWS_AS(load_config("", {"eval.n_test=0"}), ConfigError);
  CHECK_THROWS_AS(load_config("", {"no_equals"}), ConfigError);
  CHECK_THROWS_AS(load_config((dir / "missing.ini").string()), ConfigError);
  std::ofstream(dir / "bad.ini") << "[task]\nkk = 3\n";
  CHECK_THROWS_AS(load_config((dir / "bad.ini").string()), ConfigError);
  CHECK_NOTHROW(load_config("", {"classifier.xi=0.0999"}));
}

TEST_CASE("generate") {
  const auto dir = testing::scratch_dir("generate");
  ExperimentConfig c = small_config(dir);
  c.n_train = 2000;
  CHECK(cmd_generate(c) == kExitOk);
  const Dataset data = read_dataset_csv((dir / "dataset.csv").string());
  REQUIRE(data.size() == 2000);
  double pos = 0;
  for (const auto& s : data) pos += s.label == 1;
  CHECK(std::abs(pos / 2000 - 0.5) < 0.05);
  const std::string first = testing::slurp(dir / "dataset.csv");
  CHECK(cmd_generate(c) == kExitOk);
  CHECK(testing::slurp(dir / "dataset.csv") == first);
  CHECK(read_metadata((dir / "dataset.meta").string()).n == 2000);

  c.n_train = 0;
  CHECK(cmd_generate(c) == kExitOk);
  CHECK(testing::slurp(dir / "dataset.csv") == "x1,x2,y\n");

  // output directory under a regular file cannot be created
  std::ofstream(dir / "blocker") << "x";
  c.output_dir = (dir / "blocker" / "out").string();
  CHECK_THROWS_AS(cmd_generate(c), DataError);
  CHECK_FALSE(fs::exists(dir / "blocker" / "out"));
  for (const auto& e : fs::directory_iterator(dir)) CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
}

TEST_CASE("train") {
  const auto dir = testing::scratch_dir("train");
  ExperimentConfig c = small_config(dir);
  CHECK_THROWS_AS(cmd_train(c, "regular"), DataError);
  REQUIRE(cmd_generate(c) == kExitOk);
  CHECK_THROWS_AS(cmd_train(c, "other"), ConfigError);
  CHECK(cmd_train(c, "regular") == kExitOk);
  CHECK(Mlp::load_file((dir / "regular.mlp").string()).param_count() == c.regular_spec().param_count());
  CHECK(line_count(dir / "train_regular.csv") == 2);
  CHECK(cmd_train(c, "localized") == kExitOk);
  const LocalizedModel m = LocalizedModel::load((dir / "localized").string());
  CHECK(m.locals.size() == 5);
  CHECK(m.param_count() == 5 * c.local_spec().param_count());
  CHECK(cmd_train(c, "localized") == kExitOk);  // overwrites in place
  CHECK(line_count(dir / "train_localized.csv") == 2);

  ExperimentConfig other = c;
  other.profile.k = 10;
  CHECK_THROWS_AS(cmd_train(other, "regular"), DataError);
}

TEST_CASE("small sweep and rate curve") {
  const auto dir = testing::scratch_dir("sweep");
  ExperimentConfig c = small_config(dir);
  c.k_list = {1, 10};
  c.n_list = {100, 400};
  CHECK(cmd_sweep_k(c) == kExitOk);
  CHECK(line_count(dir / "sweep_k.csv") == 1 + 2 * 2 * 2);
  CHECK(line_count(dir / "sweep_k_summary.csv") == 1 + 2 * 2);
  const std::string once = testing::slurp(dir / "sweep_k.csv");
  c.threads = 1;
  CHECK(cmd_sweep_k(c) == kExitOk);
  CHECK(testing::slurp(dir / "sweep_k.csv") == once);  // thread count does not matter

  CHECK(cmd_rate_curve(c) == kExitOk);
  CHECK(line_count(dir / "rate_curve_summary.csv") == 1 + 2 * 2);
  CHECK(testing::slurp(dir / "rate_fit.csv").rfind("classifier_id,slope,intercept,residual,points_used,excluded_n\n", 0) == 0);

  const auto rows = run_grid(c, {5}, {200}, {});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].classifier == "localized");
  for (const auto& r : rows) CHECK(r.ok);
  const auto summary = summarize(rows);
  REQUIRE(summary.size() == 2);
  CHECK(summary[0].replicates == 2);
  CHECK(replicate_train_seed(c, 0) != replicate_train_seed(c, 1));

  SUBCASE("plots") {
    CHECK(cmd_plot((dir / "sweep_k_summary.csv").string(), "acc", (dir / "acc.svg").string()) == kExitOk);
    CHECK(cmd_plot((dir / "rate_curve_summary.csv").string(), "rate", (dir / "rate.svg").string()) == kExitOk);
    REQUIRE(cmd_generate(c) == kExitOk);
    CHECK(cmd_plot((dir / "dataset.csv").string(), "scatter", (dir / "scatter.svg").string()) == kExitOk);
    for (const char* name : {"acc.svg", "rate.svg", "scatter.svg"}) {
      const std::string svg = testing::slurp(dir / name);
      CHECK(svg.rfind("<svg", 0) == 0);
      CHECK(svg.find("</svg>") != std::string::npos);
    }
    std::ofstream(dir / "broken.csv") << "classifier_id,k,n_train\nregular,1\n";
    CHECK_THROWS_AS(cmd_plot((dir / "broken.csv").string(), "acc", (dir / "x.svg").string()), DataError);
    CHECK_THROWS_AS(cmd_plot((dir / "missing.csv").string(), "acc", (dir / "x.svg").string()), DataError);
    CHECK_THROWS_AS(cmd_plot((dir / "sweep_k.csv").string(), "pie", (dir / "x.svg").string()), ConfigError);
  }
}

TEST_CASE("fit_rates skips rows below the noise floor") {
  std::vector<SummaryRow> rows;
  for (std::size_t n : {100u, 1000u, 10000u}) {
    SummaryRow r;
    r.classifier = "regular";
    r.replicates = 3;
    r.n_train = n;
    r.mean_excess = 1.0 / static_cast<double>(n);
    r.below_noise_floor = n == 10000;
    rows.push_back(r);
  }
  const auto fits = fit_rates(rows);
  REQUIRE(fits.size() == 2);  // one per classifier, even without rows
  const auto& reg = fits[0].classifier == "regular" ? fits[0] : fits[1];
  const auto& loc = fits[0].classifier == "regular" ? fits[1] : fits[0];
  CHECK(reg.valid);
  CHECK(reg.slope == doctest::Approx(-1.0));
  CHECK(reg.points_used == 2);
  CHECK(reg.excluded_n == std::vector<std::size_t>{10000});
  CHECK_FALSE(loc.valid);
  CHECK(std::isnan(loc.slope));
}

TEST_CASE("theory check exit codes") {
  const auto dir = testing::scratch_dir("theory");
  ExperimentConfig c = small_config(dir);
  c.profile.k = 10;
  CHECK(cmd_theory_check(c) == kExitOk);
  CHECK(fs::exists(dir / "theory_report.csv"));
  CHECK(fs::exists(dir / "theory_report.txt"));
  c.profile.convention = ExponentConvention::kLiteral;
  CHECK(cmd_theory_check(c) == kExitCheckFailed);
}

TEST_CASE("stitch verify") {
  const auto dir = testing::scratch_dir("stitch");
  ExperimentConfig c = small_config(dir);
  CHECK(cmd_stitch_verify(c) == kExitOk);
  c.cells = 1;
  c.xi = 0.01;
  CHECK(cmd_stitch_verify(c) == kExitOk);
  CHECK(testing::slurp(dir / "stitch_report.csv").find("p1_pass,1") != std::string::npos);
}

TEST_CASE("parallel_for") {
  std::vector<int> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}
