#include <doctest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "loclab/risk_eval.hpp"
#include "support.hpp"

using namespace loclab;

namespace {

const SyntheticTask& task1() {
  static const SyntheticTask task(NoiseProfile{1.0});
  return task;
}

}  // namespace

TEST_CASE("risk of fixed classifiers") {
  const SyntheticTask& task = task1();
  const RiskReport bayes = misclassification_risk(bayes_classifier(task), task, 1000000, 5);
  CHECK(std::abs(bayes.risk - 0.3125) < 3 * bayes.risk_std_error);
  CHECK(bayes.accuracy == doctest::Approx(1.0 - bayes.risk));
  CHECK(bayes.n_eval == 1000000);

  const RiskReport plus = misclassification_risk(constant_classifier(1), task, 1000000, 6);
  CHECK(std::abs(plus.risk - 0.5) < 3 * plus.risk_std_error);

  const auto bayes_fn = bayes_classifier(task);
  const BatchClassifier flipped = [&](const Eigen::MatrixXd& pts) {
    auto labels = bayes_fn(pts);
    for (int& l : labels) l = -l;
    return labels;
  };
  const RiskReport flip = misclassification_risk(flipped, task, 1000000, 7);
  CHECK(std::abs(flip.risk - 0.6875) < 3 * flip.risk_std_error);

  CHECK(reference_bayes_risk(task) == doctest::Approx(0.3125).epsilon(1e-4));
  CHECK_THROWS_AS(misclassification_risk(constant_classifier(1), task, 0, 1), std::invalid_argument);
}

TEST_CASE("excess risk oracles") {
  const SyntheticTask& task = task1();
  for (auto method : {IntegrationMethod::kMonteCarlo, IntegrationMethod::kQuadrature}) {
    const std::size_t budget = method == IntegrationMethod::kMonteCarlo ? 1000000 : 1000;
    const RiskReport bayes = excess_risk(bayes_classifier(task), task, budget, 3, method);
    CHECK(bayes.excess_risk == 0.0);
    const RiskReport plus = excess_risk(constant_classifier(1), task, budget, 3, method);
    CHECK(std::abs(plus.excess_risk - 0.1875) < 3 * plus.excess_std_error + 1e-3);
    const RiskReport same = excess_risk(pointwise_classifier([](std::span<const double> x) {
                                          return x[1] - boundary_value(x[0]) >= 0 ? 1 : -1;
                                        }),
                                        task, budget, 3, method);
    CHECK(same.excess_risk == 0.0);
  }
}

TEST_CASE("routed boundary model with the true curve has near-zero excess") {
  // exact ReLU compilation of a fine PWL interpolant of the boundary
  std::vector<std::pair<double, double>> pts;
  for (double x : linspace(0, 1, 2001)) pts.emplace_back(x, boundary_value(x));
  const Mlp f = pwl_to_relu(PiecewiseLinear1D(pts));
  const LocalizedModel m = make_boundary_model(GridPartition(1, 0.1), {f}, BoundaryOrientation::kAbove);
  const RiskReport r = excess_risk(routed_classifier(m), task1(), 200000, 9);
  CHECK(r.excess_risk < 1e-6);
}

TEST_CASE("estimators are consistent") {
  const SyntheticTask task(NoiseProfile{5.0});
  const auto cls = pointwise_classifier([](std::span<const double> x) { return x[1] > 0.5 ? 1 : -1; });
  const RiskReport a = evaluate_classifier(cls, task, 400000, 11);
  const RiskReport b = evaluate_classifier(cls, task, 400000, 11);
  CHECK(a.risk == b.risk);
  CHECK(a.excess_risk == b.excess_risk);
  // risk - bayes and the direct excess estimator target the same quantity
  CHECK(std::abs((a.risk - a.bayes_risk) - a.excess_risk) < 3 * a.risk_std_error + 3 * a.excess_std_error);
  const RiskReport q = excess_risk(cls, task, 1000, 0, IntegrationMethod::kQuadrature);
  CHECK(std::abs(q.excess_risk - a.excess_risk) < 3 * a.excess_std_error + 1e-3);
  CHECK(std::abs(q.risk - a.risk) < 3 * a.risk_std_error + 1e-3);
}

TEST_CASE("trained models: Monte Carlo and quadrature agree") {
  const Dataset data = SyntheticTask(NoiseProfile{1.0}).sample(500, 1);
  TrainConfig c;
  c.total_iters = 300;
  const Mlp model = train(data, MlpSpec{2, {16, 16}}, c);
  const auto cls = logit_classifier(model);
  const RiskReport mc = excess_risk(cls, task1(), 1000000, 2);
  const RiskReport q = excess_risk(cls, task1(), 1000, 0, IntegrationMethod::kQuadrature);
  CHECK(std::abs(mc.excess_risk - q.excess_risk) < 3 * mc.excess_std_error + 2e-3);
  CHECK(mc.excess_risk >= 0.0);
}

TEST_CASE("rate_fit") {
  std::vector<RatePoint> exact, half, noisy;
  Rng rng(3);
  for (double n : {100.0, 1000.0, 10000.0, 100000.0}) {
    exact.push_back({n, 2.0 / n});
    half.push_back({n, 0.3 / std::sqrt(n)});
    noisy.push_back({n, std::pow(n, -0.7) * std::exp(0.02 * (2 * rng.uniform() - 1))});
  }
  CHECK(rate_fit(exact).slope == doctest::Approx(-1.0).epsilon(1e-12));
  const LineFit h = rate_fit(half);
  CHECK(h.slope == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(h.rms_residual < 1e-12);
  CHECK(std::abs(rate_fit(noisy).slope + 0.7) < 0.05);

  CHECK_THROWS_AS(rate_fit(std::vector<RatePoint>{{10, 0.1}}), std::invalid_argument);
  CHECK_THROWS_AS(rate_fit(std::vector<RatePoint>{{10, 0.1}, {100, 0.0}}), std::invalid_argument);
}

TEST_CASE("risk csv row") {
  RiskReport r;
  r.accuracy = 0.7;
  r.risk = 0.3;
  const std::string row = risk_csv_row("regular", 5, 1000, 2, r);
  CHECK(row.rfind("regular,5,1000,2,", 0) == 0);
  CHECK(std::count(row.begin(), row.end(), ',') == std::count(kRiskCsvHeader, kRiskCsvHeader + std::strlen(kRiskCsvHeader), ','));
}
