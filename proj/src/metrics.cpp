#include "counterclr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "counterclr/error.hpp"

namespace counterclr {

PointwiseMetrics pointwise_metrics(std::span<const double> predictions,
                                   const InteractionDataset& test) {
  if (test.empty()) throw ArgumentError("pointwise metrics need a nonempty test set");
  if (predictions.size() != test.size()) {
    throw ArgumentError("every test pair needs a prediction");
  }
  PointwiseMetrics m;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double e = predictions[k] - test.observed()[k].value;
    m.mse += e * e;
    m.mae += std::abs(e);
  }
  const double n = static_cast<double>(test.size());
  m.mse /= n;
  m.mae /= n;
  return m;
}

namespace {

struct Scored {
  ItemIndex item;
  double predicted;
  double truth;
};

double dcg(const std::vector<Scored>& ranked, std::size_t k) {
  double s = 0.0;
  for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
    s += ranked[r].truth / std::log2(static_cast<double>(r) + 2.0);
  }
  return s;
}

}  // namespace

NdcgResult ndcg_at_k(std::span<const double> predictions,
                     const InteractionDataset& test, std::size_t k) {
  if (k == 0) throw ArgumentError("ndcg cutoff k must be >= 1");
  if (predictions.size() != test.size()) {
    throw ArgumentError("every test pair needs a prediction");
  }
  std::vector<std::vector<Scored>> by_user(test.n_users());
  for (std::size_t j = 0; j < test.size(); ++j) {
    const auto& r = test.observed()[j];
    by_user[r.user].push_back({r.item, predictions[j], r.value});
  }
  double total = 0.0;
  std::size_t users = 0;
  for (auto& list : by_user) {
    if (list.size() < 2) continue;
    std::sort(list.begin(), list.end(), [](const Scored& a, const Scored& b) {
      if (a.predicted != b.predicted) return a.predicted > b.predicted;
      return a.item < b.item;
    });
    const double actual = dcg(list, k);
    std::sort(list.begin(), list.end(), [](const Scored& a, const Scored& b) {
      if (a.truth != b.truth) return a.truth > b.truth;
      return a.item < b.item;
    });
    const double ideal = dcg(list, k);
    total += ideal > 0.0 ? actual / ideal : 1.0;
    ++users;
  }
  if (users == 0) throw ArgumentError("no user has at least 2 test items");
  return {total / static_cast<double>(users), users};
}

MetricReport evaluate_predictions(std::span<const double> predictions,
                                  const InteractionDataset& test) {
  const auto pw = pointwise_metrics(predictions, test);
  MetricReport report;
  report.mse = pw.mse;
  report.mae = pw.mae;
  try {
    const auto nd = ndcg_at_k(predictions, test, 5);
    report.ndcg_at_5 = nd.value;
    report.n_users_ranked = nd.users;
  } catch (const ArgumentError&) {
    report.ndcg_at_5 = std::numeric_limits<double>::quiet_NaN();
  }
  report.metadata["ndcg_gain"] = "linear";
  report.metadata["prediction"] = "exposure";
  return report;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ArgumentError("spearman needs two equal-length samples of size >= 2");
  }
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < rx.size(); ++k) {
    sxy += (rx[k] - mx) * (ry[k] - my);
    sxx += (rx[k] - mx) * (rx[k] - mx);
    syy += (ry[k] - my) * (ry[k] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace counterclr
