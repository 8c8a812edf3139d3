#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "loclab/localized_classifier.hpp"
#include "loclab/nn_core.hpp"
#include "loclab/synthetic_data.hpp"

namespace loclab {

// Maps the columns of a 2 x n matrix to labels in {-1, +1}.
using BatchClassifier = std::function<std::vector<int>(const Eigen::MatrixXd&)>;

BatchClassifier logit_classifier(const Mlp& model);
BatchClassifier routed_classifier(const LocalizedModel& model);
BatchClassifier bayes_classifier(const SyntheticTask& task);
BatchClassifier constant_classifier(int label);
BatchClassifier pointwise_classifier(std::function<int(std::span<const double>)> fn);

struct RiskReport {
  double accuracy = 0.0;
  double risk = 0.0;
  double excess_risk = 0.0;
  double bayes_risk = 0.0;
  std::size_t n_eval = 0;
  double risk_std_error = 0.0;
  double excess_std_error = 0.0;
  IntegrationMethod method = IntegrationMethod::kMonteCarlo;
};

// Bayes risk by quadrature (2048 panels per axis).
double reference_bayes_risk(const SyntheticTask& task);

// Monte Carlo over n_eval fresh points: risk = P(C(x) != y) with binomial
// standard error, and excess = E[|2 eta - 1| 1{C(x) != Bayes(x)}] on the same
// points. Pass a finite `bayes_risk` to skip recomputing it.
RiskReport evaluate_classifier(const BatchClassifier& classifier, const SyntheticTask& task, std::size_t n_eval,
                               std::uint64_t seed, double bayes_risk = -1.0);

// Throws std::invalid_argument when n_test == 0.
RiskReport misclassification_risk(const BatchClassifier& classifier, const SyntheticTask& task, std::size_t n_test,
                                  std::uint64_t seed);

// kMonteCarlo: as in evaluate_classifier. kQuadrature: midpoint rule on a
// budget x budget grid (the classifier is discontinuous, so higher-order rules
// buy nothing); accuracy and risk are then the exact conditional averages.
RiskReport excess_risk(const BatchClassifier& classifier, const SyntheticTask& task, std::size_t budget,
                       std::uint64_t seed, IntegrationMethod method = IntegrationMethod::kMonteCarlo);

struct RatePoint {
  double n = 0.0;
  double excess = 0.0;
};

// OLS of log excess against log n. Throws std::invalid_argument on fewer than
// two points or a nonpositive excess.
LineFit rate_fit(std::span<const RatePoint> points);

inline constexpr const char* kRiskCsvHeader =
    "classifier_id,k,n_train,replicate,accuracy,risk,excess,bayes_risk,stderr,method";

// One CSV row; `stderr` is the excess-risk standard error.
std::string risk_csv_row(const std::string& classifier_id, double k, std::size_t n_train, std::size_t replicate,
                         const RiskReport& report);

}  // namespace loclab
