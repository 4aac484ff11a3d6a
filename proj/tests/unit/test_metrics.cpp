#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "counterclr/error.hpp"
#include "counterclr/metrics.hpp"

using namespace counterclr;

namespace {

InteractionDataset make(std::vector<Rating> r, std::size_t users, std::size_t items) {
  return InteractionDataset(users, items, std::move(r), RatingScale(1.0, 5.0));
}

}  // namespace

TEST_CASE("pointwise metrics") {
  const auto test = make({{0, 0, 4.0}, {0, 1, 2.0}, {1, 0, 5.0}}, 2, 2);
  const std::vector<double> pred{3.0, 2.0, 3.0};
  const auto m = pointwise_metrics(pred, test);
  CHECK(m.mse == doctest::Approx(5.0 / 3.0));
  CHECK(m.mae == doctest::Approx(1.0));
  CHECK_THROWS_AS(pointwise_metrics(std::vector<double>{1.0}, test), ArgumentError);
  CHECK_THROWS_AS(pointwise_metrics({}, make({}, 1, 1)), ArgumentError);
}

TEST_CASE("nDCG two-item reference") {
  // The model ranks the rating-3 item above the rating-5 item.
  const auto test = make({{0, 0, 5.0}, {0, 1, 3.0}}, 1, 2);
  const std::vector<double> pred{1.0, 2.0};
  const auto r = ndcg_at_k(pred, test, 5);
  CHECK(r.users == 1);
  CHECK(r.value == doctest::Approx(0.892911205473).epsilon(1e-12));
  const std::vector<double> right{2.0, 1.0};
  CHECK(ndcg_at_k(right, test, 5).value == doctest::Approx(1.0));
}

TEST_CASE("nDCG skips users with fewer than two items and ties break by item") {
  const auto test = make({{0, 0, 5.0}, {0, 1, 3.0}, {1, 0, 1.0}}, 2, 2);
  const std::vector<double> tied{2.0, 2.0, 0.0};
  const auto r = ndcg_at_k(tied, test, 5);
  CHECK(r.users == 1);
  CHECK(r.value == doctest::Approx(1.0));
  const auto lonely = make({{0, 0, 5.0}, {1, 1, 3.0}}, 2, 2);
  CHECK_THROWS_AS(ndcg_at_k(std::vector<double>{1.0, 2.0}, lonely, 5), ArgumentError);
  const auto report = evaluate_predictions(std::vector<double>{1.0, 2.0}, lonely);
  CHECK(std::isnan(report.ndcg_at_5));
  CHECK(report.n_users_ranked == 0);
  CHECK_THROWS_AS(ndcg_at_k(tied, test, 0), ArgumentError);
}

TEST_CASE("nDCG is invariant to strictly increasing transforms of predictions") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Rating> r;
  for (UserIndex u = 0; u < 20; ++u) {
    for (ItemIndex i = 0; i < 15; ++i) {
      if (unit(rng) < 0.5) r.push_back({u, i, std::min(5.0, 1.0 + std::floor(5.0 * unit(rng)))});
    }
  }
  const auto test = make(r, 20, 15);
  std::vector<double> pred, transformed;
  for (std::size_t k = 0; k < r.size(); ++k) {
    pred.push_back(unit(rng) * 4.0 - 2.0);
    transformed.push_back(std::exp(3.0 * pred.back()) + 7.0);
  }
  const auto a = ndcg_at_k(pred, test, 5);
  const auto b = ndcg_at_k(transformed, test, 5);
  CHECK(a.value == b.value);
  CHECK(a.users == b.users);
  CHECK(a.value > 0.0);
  CHECK(a.value <= 1.0);
}

TEST_CASE("evaluate_predictions metadata") {
  const auto test = make({{0, 0, 5.0}, {0, 1, 3.0}}, 1, 2);
  const auto rep = evaluate_predictions(std::vector<double>{1.0, 2.0}, test);
  CHECK(rep.metadata.at("ndcg_gain") == "linear");
  CHECK(rep.n_users_ranked == 1);
  CHECK(rep.mse == doctest::Approx((16.0 + 1.0) / 2.0));
}

TEST_CASE("Spearman correlation") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(spearman_correlation(x, std::vector<double>{2, 4, 8, 16, 32}) == doctest::Approx(1.0));
  CHECK(spearman_correlation(x, std::vector<double>{5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
  // Average ranks for ties: y ranks = 1.5, 1.5, 3, 4, 5.
  const double rho = spearman_correlation(x, std::vector<double>{1, 1, 2, 3, 4});
  CHECK(rho == doctest::Approx(0.9746794344808963));
  CHECK_THROWS_AS(spearman_correlation(std::vector<double>{1}, std::vector<double>{1}),
                  ArgumentError);
  CHECK_THROWS_AS(spearman_correlation(x, std::vector<double>{1, 2}), ArgumentError);
}
