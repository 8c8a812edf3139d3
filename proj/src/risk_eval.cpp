#include "loclab/risk_eval.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "loclab/numerics.hpp"

namespace loclab {

BatchClassifier logit_classifier(const Mlp& model) {
  return [&model](const Eigen::MatrixXd& points) {
    const Eigen::VectorXd scores = model.forward_batch(points);
    std::vector<int> out(static_cast<std::size_t>(scores.size()));
    for (Eigen::Index i = 0; i < scores.size(); ++i) out[static_cast<std::size_t>(i)] = scores(i) >= 0.0 ? 1 : -1;
    return out;
  };
}

BatchClassifier routed_classifier(const LocalizedModel& model) {
  return [&model](const Eigen::MatrixXd& points) { return predict_routed_batch(model, points); };
}

BatchClassifier pointwise_classifier(std::function<int(std::span<const double>)> fn) {
  return [fn = std::move(fn)](const Eigen::MatrixXd& points) {
    std::vector<int> out(static_cast<std::size_t>(points.cols()));
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      out[static_cast<std::size_t>(c)] = fn(std::span<const double>(points.col(c).data(), static_cast<std::size_t>(points.rows())));
    }
    return out;
  };
}

BatchClassifier bayes_classifier(const SyntheticTask& task) {
  return pointwise_classifier([&task](std::span<const double> p) { return task.bayes_classify(p); });
}

BatchClassifier constant_classifier(int label) {
  return [label](const Eigen::MatrixXd& points) { return std::vector<int>(static_cast<std::size_t>(points.cols()), label); };
}

double reference_bayes_risk(const SyntheticTask& task) {
  return bayes_risk(task, IntegrationMethod::kQuadrature, 2048).value;
}

namespace {

constexpr std::size_t kChunk = 1 << 16;

struct Accumulated {
  std::vector<double> errors;  // per chunk
  std::vector<double> excess;
  std::vector<double> excess_sq;
};

double mean_of_chunks(const std::vector<double>& sums, double n) { return pairwise_sum(sums) / n; }

}  // namespace

RiskReport evaluate_classifier(const BatchClassifier& classifier, const SyntheticTask& task, std::size_t n_eval,
                               std::uint64_t seed, double bayes_risk_value) {
  if (n_eval == 0) throw std::invalid_argument("evaluate_classifier: n_eval must be positive");
  Rng rng(seed);
  Accumulated acc;
  for (std::size_t start = 0; start < n_eval; start += kChunk) {
    const std::size_t count = std::min(kChunk, n_eval - start);
    Eigen::MatrixXd points(2, static_cast<Eigen::Index>(count));
    std::vector<int> labels(count);
    std::vector<int> bayes(count);
    std::vector<double> margins(count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      points(0, c) = rng.uniform();
      points(1, c) = rng.uniform();
      const double u = rng.uniform();
      const double pt[2] = {points(0, c), points(1, c)};
      const double eta = task.eta(pt);
      labels[i] = u < eta ? 1 : -1;
      bayes[i] = task.bayes_classify(pt);
      margins[i] = std::abs(2.0 * eta - 1.0);
    }
    const std::vector<int> predicted = classifier(points);
    if (predicted.size() != count) throw std::runtime_error("classifier returned the wrong number of labels");
    std::vector<double> err(count), ex(count), ex2(count);
    for (std::size_t i = 0; i < count; ++i) {
      err[i] = predicted[i] != labels[i] ? 1.0 : 0.0;
      ex[i] = predicted[i] != bayes[i] ? margins[i] : 0.0;
      ex2[i] = ex[i] * ex[i];
    }
    acc.errors.push_back(pairwise_sum(err));
    acc.excess.push_back(pairwise_sum(ex));
    acc.excess_sq.push_back(pairwise_sum(ex2));
  }
  const double n = static_cast<double>(n_eval);
  RiskReport r;
  r.method = IntegrationMethod::kMonteCarlo;
  r.n_eval = n_eval;
  r.risk = mean_of_chunks(acc.errors, n);
  r.accuracy = 1.0 - r.risk;
  r.risk_std_error = std::sqrt(r.risk * (1.0 - r.risk) / n);
  r.excess_risk = mean_of_chunks(acc.excess, n);
  const double second = mean_of_chunks(acc.excess_sq, n);
  const double var = std::max(0.0, second - r.excess_risk * r.excess_risk);
  r.excess_std_error = n > 1.0 ? std::sqrt(var * n / (n - 1.0) / n) : 0.0;
  r.bayes_risk = bayes_risk_value >= 0.0 ? bayes_risk_value : reference_bayes_risk(task);
  return r;
}

RiskReport misclassification_risk(const BatchClassifier& classifier, const SyntheticTask& task, std::size_t n_test,
                                  std::uint64_t seed) {
  if (n_test == 0) throw std::invalid_argument("misclassification_risk: n_test must be positive");
  return evaluate_classifier(classifier, task, n_test, seed);
}

RiskReport excess_risk(const BatchClassifier& classifier, const SyntheticTask& task, std::size_t budget,
                       std::uint64_t seed, IntegrationMethod method) {
  if (budget == 0) throw std::invalid_argument("excess_risk: budget must be positive");
  if (method == IntegrationMethod::kMonteCarlo) return evaluate_classifier(classifier, task, budget, seed);

  // Midpoint grid, one row of x1 at a time.
  const std::size_t n = budget;
  const double h = 1.0 / static_cast<double>(n);
  std::vector<double> row_excess(n), row_risk(n);
  Eigen::MatrixXd points(2, static_cast<Eigen::Index>(n));
  std::vector<double> ex(n), rk(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = (static_cast<double>(i) + 0.5) * h;
    for (std::size_t j = 0; j < n; ++j) {
      points(0, static_cast<Eigen::Index>(j)) = x1;
      points(1, static_cast<Eigen::Index>(j)) = (static_cast<double>(j) + 0.5) * h;
    }
    const std::vector<int> predicted = classifier(points);
    for (std::size_t j = 0; j < n; ++j) {
      const double pt[2] = {x1, points(1, static_cast<Eigen::Index>(j))};
      const double eta = task.eta(pt);
      ex[j] = predicted[j] != task.bayes_classify(pt) ? std::abs(2.0 * eta - 1.0) : 0.0;
      rk[j] = predicted[j] == 1 ? 1.0 - eta : eta;
    }
    row_excess[i] = pairwise_sum(ex);
    row_risk[i] = pairwise_sum(rk);
  }
  const double cells = static_cast<double>(n) * static_cast<double>(n);
  RiskReport r;
  r.method = IntegrationMethod::kQuadrature;
  r.n_eval = n * n;
  r.excess_risk = pairwise_sum(row_excess) / cells;
  r.risk = pairwise_sum(row_risk) / cells;
  r.accuracy = 1.0 - r.risk;
  r.bayes_risk = reference_bayes_risk(task);
  return r;
}

LineFit rate_fit(std::span<const RatePoint> points) {
  if (points.size() < 2) throw std::invalid_argument("rate_fit: need at least two points");
  std::vector<double> lx, ly;
  for (const auto& p : points) {
    if (!(p.excess > 0.0)) throw std::invalid_argument("rate_fit: excess risk must be positive (clamp to the noise floor first)");
    if (!(p.n > 0.0)) throw std::invalid_argument("rate_fit: sample size must be positive");
    lx.push_back(std::log(p.n));
    ly.push_back(std::log(p.excess));
  }
  return fit_line(lx, ly);
}

std::string risk_csv_row(const std::string& classifier_id, double k, std::size_t n_train, std::size_t replicate,
                         const RiskReport& r) {
  std::ostringstream out;
  out << classifier_id << ',' << format_double(k) << ',' << n_train << ',' << replicate << ','
      << format_double(r.accuracy) << ',' << format_double(r.risk) << ',' << format_double(r.excess_risk) << ','
      << format_double(r.bayes_risk) << ',' << format_double(r.excess_std_error) << ',' << to_string(r.method);
  return out.str();
}

}  // namespace loclab
