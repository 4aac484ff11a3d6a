#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "counterclr/data.hpp"

namespace counterclr {

struct PointwiseMetrics {
  double mse = 0.0;
  double mae = 0.0;
};

// predictions[k] belongs to test.observed()[k].
PointwiseMetrics pointwise_metrics(std::span<const double> predictions,
                                   const InteractionDataset& test);

struct NdcgResult {
  double value = 0.0;
  std::size_t users = 0;
};

// Per user with >= 2 test items: rank by prediction (descending, ties by
// item index), gain = raw rating, discount log2(rank + 1), normalized by the
// ideal ordering; averaged over qualifying users.
NdcgResult ndcg_at_k(std::span<const double> predictions,
                     const InteractionDataset& test, std::size_t k = 5);

struct MetricReport {
  double mse = 0.0;
  double mae = 0.0;
  double ndcg_at_5 = 0.0;  // NaN when no user qualifies
  std::size_t n_users_ranked = 0;
  std::map<std::string, std::string> metadata;
};

MetricReport evaluate_predictions(std::span<const double> predictions,
                                  const InteractionDataset& test);

template <typename Predictor>
std::vector<double> predict_observed(const Predictor& model,
                                     const InteractionDataset& ds) {
  std::vector<double> out;
  out.reserve(ds.size());
  for (const auto& r : ds.observed()) out.push_back(model.predict(r.user, r.item));
  return out;
}

template <typename Predictor>
MetricReport evaluate(const Predictor& model, const InteractionDataset& test) {
  return evaluate_predictions(predict_observed(model, test), test);
}

// Validation MSE/MAE, or infinities for an empty set.
template <typename Predictor>
PointwiseMetrics validation_metrics(const Predictor& model,
                                    const InteractionDataset& validation);

double spearman_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace counterclr

#include <limits>

namespace counterclr {

template <typename Predictor>
PointwiseMetrics validation_metrics(const Predictor& model,
                                    const InteractionDataset& validation) {
  if (validation.empty()) {
    const double inf = std::numeric_limits<double>::infinity();
    return {inf, inf};
  }
  return pointwise_metrics(predict_observed(model, validation), validation);
}

}  // namespace counterclr
