#include "counterclr/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "counterclr/error.hpp"
#include "counterclr/rng.hpp"

namespace counterclr {

double SyntheticGroundTruth::mean() const {
  double s = 0.0;
  for (double v : full_matrix) s += v;
  return full_matrix.empty() ? 0.0 : s / static_cast<double>(full_matrix.size());
}

SyntheticGroundTruth generate_ground_truth_from_factors(
    std::span<const double> user_factors, std::span<const double> item_factors,
    std::size_t n_users, std::size_t n_items, std::size_t rank,
    double noise_std, const RatingScale& scale, std::uint64_t seed) {
  if (rank == 0 || rank > std::min(n_users, n_items)) {
    throw ArgumentError("rank must lie in [1, min(n_users, n_items)]");
  }
  if (!(noise_std >= 0.0)) throw ArgumentError("noise_std must be >= 0");
  if (user_factors.size() != n_users * rank ||
      item_factors.size() != n_items * rank) {
    throw ArgumentError("factor shapes do not match (n, rank)");
  }
  auto rng = make_rng(seed, Stream::kGroundTruth);
  // Factor draws come first in the stream; skip them so a supplied-factor
  // run sees the same noise as the sampled-factor run with this seed.
  for (std::size_t k = 0; k < (n_users + n_items) * rank; ++k) {
    (void)standard_normal(rng);
  }

  const double inv_sqrt_rank = 1.0 / std::sqrt(static_cast<double>(rank));
  std::vector<double> raw(n_users * n_items);
  for (std::size_t u = 0; u < n_users; ++u) {
    for (std::size_t i = 0; i < n_items; ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < rank; ++k) {
        dot += user_factors[u * rank + k] * item_factors[i * rank + k];
      }
      raw[u * n_items + i] = dot * inv_sqrt_rank;
    }
  }
  if (noise_std > 0.0) {
    for (auto& v : raw) v += noise_std * standard_normal(rng);
  }

  double mean = 0.0;
  for (double v : raw) mean += v;
  mean /= static_cast<double>(raw.size());
  double var = 0.0;
  for (double v : raw) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(raw.size()));

  SyntheticGroundTruth gt;
  gt.n_users = n_users;
  gt.n_items = n_items;
  gt.scale = scale;
  gt.gen_params = {rank, noise_std, seed};
  gt.full_matrix.resize(raw.size());
  const double spread = 0.25 * scale.width();
  const bool degenerate = !(sd > 1e-12 * (1.0 + std::abs(mean)));
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const double r =
        degenerate ? scale.mid() : scale.mid() + (raw[k] - mean) / sd * spread;
    gt.full_matrix[k] = std::clamp(r, scale.r_min, scale.r_max);
  }
  return gt;
}

SyntheticGroundTruth generate_ground_truth(std::size_t n_users,
                                           std::size_t n_items,
                                           std::size_t rank, double noise_std,
                                           const RatingScale& scale,
                                           std::uint64_t seed) {
  if (rank == 0 || rank > std::min(n_users, n_items)) {
    throw ArgumentError("rank must lie in [1, min(n_users, n_items)]");
  }
  auto rng = make_rng(seed, Stream::kGroundTruth);
  std::vector<double> a(n_users * rank);
  std::vector<double> b(n_items * rank);
  for (auto& v : a) v = standard_normal(rng);
  for (auto& v : b) v = standard_normal(rng);
  return generate_ground_truth_from_factors(a, b, n_users, n_items, rank,
                                            noise_std, scale, seed);
}

namespace {

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double ExposurePolicy::probability(double rating) const {
  if (std::isinf(intercept)) return intercept > 0 ? 1.0 : 0.0;
  return logistic(slope * (rating - midscale) + intercept);
}

double expected_ratio(const SyntheticGroundTruth& gt,
                      const ExposurePolicy& policy) {
  double s = 0.0;
  for (double r : gt.full_matrix) s += policy.probability(r);
  return s / static_cast<double>(gt.full_matrix.size());
}

ExposurePolicy calibrate_policy(const SyntheticGroundTruth& gt, double slope,
                                double target_ratio) {
  if (!(target_ratio > 0.0 && target_ratio <= 1.0)) {
    throw ArgumentError("target_ratio must lie in (0, 1]");
  }
  if (!(slope >= 0.0)) throw ArgumentError("slope must be >= 0");
  if (gt.full_matrix.empty()) throw ArgumentError("empty ground truth");

  ExposurePolicy policy{slope, 0.0, target_ratio, gt.scale.mid()};
  if (target_ratio == 1.0) {
    policy.intercept = std::numeric_limits<double>::infinity();
    return policy;
  }
  if (slope == 0.0) {
    policy.intercept = std::log(target_ratio / (1.0 - target_ratio));
    return policy;
  }

  auto gap = [&](double b) {
    policy.intercept = b;
    return expected_ratio(gt, policy) - target_ratio;
  };
  double lo = -1.0;
  double hi = 1.0;
  while (gap(lo) > 0.0) lo *= 2.0;
  while (gap(hi) < 0.0) hi *= 2.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double m = 0.5 * (lo + hi);
    const double g = gap(m);
    if (std::abs(g) <= 1e-9) {
      policy.intercept = m;
      return policy;
    }
    (g < 0.0 ? lo : hi) = m;
  }
  throw NumericalError("exposure calibration did not converge");
}

SampledObservations sample_observations(const SyntheticGroundTruth& gt,
                                        const ExposurePolicy& policy,
                                        std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::kExposure);
  std::vector<Rating> observed;
  std::vector<Rating> unobserved;
  for (std::size_t u = 0; u < gt.n_users; ++u) {
    for (std::size_t i = 0; i < gt.n_items; ++i) {
      const double r = gt.at(u, i);
      const Rating cell{static_cast<UserIndex>(u), static_cast<ItemIndex>(i), r};
      (uniform01(rng) < policy.probability(r) ? observed : unobserved)
          .push_back(cell);
    }
  }
  return {InteractionDataset(gt.n_users, gt.n_items, std::move(observed),
                             gt.scale),
          InteractionDataset(gt.n_users, gt.n_items, std::move(unobserved),
                             gt.scale)};
}

}  // namespace counterclr
