#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "counterclr/error.hpp"
#include "counterclr/simulator.hpp"

using namespace counterclr;

namespace {

const SyntheticGroundTruth& reference_truth() {
  static const auto gt = generate_ground_truth(200, 300, 8, 0.5, {1, 5}, 7);
  return gt;
}

}  // namespace

TEST_CASE("ground truth is clipped to the scale and deterministic") {
  const auto& gt = reference_truth();
  const auto again = generate_ground_truth(200, 300, 8, 0.5, {1, 5}, 7);
  CHECK(gt.full_matrix == again.full_matrix);
  CHECK(gt.full_matrix.size() == 60000);
  const auto [lo, hi] = std::minmax_element(gt.full_matrix.begin(), gt.full_matrix.end());
  CHECK(*lo >= 1.0);
  CHECK(*hi <= 5.0);
  const auto other = generate_ground_truth(200, 300, 8, 0.5, {1, 5}, 8);
  CHECK(other.full_matrix != gt.full_matrix);
}

TEST_CASE("ground truth mean matches the Monte Carlo reference") {
  // Independent simulation of the construction: mean 2.999956, sd 0.000501
  // across generator draws.
  CHECK(std::abs(reference_truth().mean() - 2.999956) <= 4 * 0.000501);
}

TEST_CASE("degenerate all-ones factors give a constant mid-scale matrix") {
  const std::vector<double> a(4, 1.0);
  const std::vector<double> b(3, 1.0);
  const auto gt = generate_ground_truth_from_factors(a, b, 4, 3, 1, 0.0, {1, 5}, 3);
  for (double v : gt.full_matrix) CHECK(v == 3.0);
}

TEST_CASE("rank above min(N, M) is an argument error") {
  CHECK_THROWS_AS(generate_ground_truth(3, 5, 4, 0.5, {1, 5}, 1), ArgumentError);
}

TEST_CASE("zero slope calibrates to logit(target) exactly") {
  const auto& gt = reference_truth();
  const auto policy = calibrate_policy(gt, 0.0, 0.3);
  CHECK(policy.intercept == doctest::Approx(std::log(0.3 / 0.7)).epsilon(1e-12));
  CHECK(std::abs(expected_ratio(gt, policy) - 0.3) <= 1e-12);
}

TEST_CASE("calibration hits the target for slopes in [0, 10]") {
  const auto& gt = reference_truth();
  for (double slope : {0.0, 0.5, 2.0, 5.0, 10.0}) {
    for (double target : {0.1, 0.5, 0.9}) {
      const auto policy = calibrate_policy(gt, slope, target);
      CHECK(std::abs(expected_ratio(gt, policy) - target) <= 1e-6);
    }
  }
}

TEST_CASE("exposure probability increases with rating") {
  const auto& gt = reference_truth();
  const auto policy = calibrate_policy(gt, 2.0, 0.1);
  const auto [lo, hi] = std::minmax_element(gt.full_matrix.begin(), gt.full_matrix.end());
  CHECK(policy.probability(*hi) > policy.probability(*lo));
  for (double r = 1.0; r < 5.0; r += 0.25) {
    CHECK(policy.probability(r + 0.25) > policy.probability(r));
  }
}

TEST_CASE("calibration argument checks") {
  const auto& gt = reference_truth();
  CHECK_THROWS_AS(calibrate_policy(gt, 2.0, 0.0), ArgumentError);
  CHECK_THROWS_AS(calibrate_policy(gt, 2.0, 1.5), ArgumentError);
  CHECK_THROWS_AS(calibrate_policy(gt, -1.0, 0.5), ArgumentError);
}

TEST_CASE("target ratio 1 observes every cell") {
  const auto& gt = reference_truth();
  const auto policy = calibrate_policy(gt, 2.0, 1.0);
  const auto s = sample_observations(gt, policy, 5);
  CHECK(s.observed.size() == 60000);
  CHECK(s.unobserved.empty());
}

TEST_CASE("observed count is within the binomial 3 sigma band") {
  const auto& gt = reference_truth();
  const auto policy = calibrate_policy(gt, 2.0, 0.3);
  const auto s = sample_observations(gt, policy, 11);
  const double n = static_cast<double>(s.observed.size());
  CHECK(std::abs(n - 18000.0) <= 336.7492);
  CHECK(s.observed.size() + s.unobserved.size() == 60000);
}

TEST_CASE("sampling is deterministic and carries true ratings") {
  const auto& gt = reference_truth();
  const auto policy = calibrate_policy(gt, 2.0, 0.1);
  const auto a = sample_observations(gt, policy, 9);
  const auto b = sample_observations(gt, policy, 9);
  CHECK(a.observed.observed() == b.observed.observed());
  CHECK(a.unobserved.observed() == b.unobserved.observed());
  for (const auto& r : a.observed.observed()) CHECK(r.value == gt.at(r.user, r.item));
  for (const auto& r : a.unobserved.observed()) CHECK(r.value == gt.at(r.user, r.item));
}

TEST_CASE("positive slope induces selection bias") {
  const auto& gt = reference_truth();
  const auto s = sample_observations(gt, calibrate_policy(gt, 2.0, 0.3), 4);
  CHECK(s.observed.mean_rating() > gt.mean() + 0.5);
}
