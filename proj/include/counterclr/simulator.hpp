#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "counterclr/data.hpp"

namespace counterclr {

struct GroundTruthParams {
  std::size_t rank = 8;
  double noise_std = 0.5;
  std::uint64_t seed = 0;
};

// Fully known N x M rating matrix (row-major) used as the simulation oracle.
struct SyntheticGroundTruth {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::vector<double> full_matrix;
  RatingScale scale;
  GroundTruthParams gen_params;

  double at(std::size_t u, std::size_t i) const {
    return full_matrix[u * n_items + i];
  }
  double mean() const;
};

// A (N x rank) and B (M x rank) standard-normal factors and per-cell noise,
// raw = A B^T / sqrt(rank) + noise, standardized so that one raw standard
// deviation spans a quarter of the scale width around mid-scale, then clipped.
SyntheticGroundTruth generate_ground_truth(std::size_t n_users,
                                           std::size_t n_items,
                                           std::size_t rank, double noise_std,
                                           const RatingScale& scale,
                                           std::uint64_t seed);

// Same construction with caller-supplied factors (row-major); the noise is
// still drawn from `seed`. Test hook for degenerate factor settings.
SyntheticGroundTruth generate_ground_truth_from_factors(
    std::span<const double> user_factors, std::span<const double> item_factors,
    std::size_t n_users, std::size_t n_items, std::size_t rank,
    double noise_std, const RatingScale& scale, std::uint64_t seed);

// P(o = 1 | r) = logistic(slope * (r - mid) + intercept).
struct ExposurePolicy {
  double slope = 0.0;
  double intercept = 0.0;
  double target_ratio = 1.0;
  double midscale = 3.0;

  double probability(double rating) const;
};

// Bisection on the intercept so that the mean exposure probability over all
// cells is within 1e-6 of `target_ratio`.
ExposurePolicy calibrate_policy(const SyntheticGroundTruth& gt, double slope,
                                double target_ratio);

double expected_ratio(const SyntheticGroundTruth& gt,
                      const ExposurePolicy& policy);

struct SampledObservations {
  InteractionDataset observed;
  InteractionDataset unobserved;  // held-out test cells with true ratings
};

SampledObservations sample_observations(const SyntheticGroundTruth& gt,
                                        const ExposurePolicy& policy,
                                        std::uint64_t seed);

}  // namespace counterclr
