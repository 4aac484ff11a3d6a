#pragma once

#include <optional>
#include <span>
#include <vector>

#include "counterclr/caunet.hpp"
#include "counterclr/data.hpp"

namespace counterclr {

// Per-user exposure / non-exposure rating vectors over `items`.
struct RatingVectorPair {
  std::vector<double> exposure;     // r where observed, else r1_hat
  std::vector<double> nonexposure;  // r0_hat everywhere
  std::vector<ItemIndex> items;
  std::vector<char> observed;
};

// `item_subset` absent means every item; present-but-empty is an error.
RatingVectorPair assemble_rating_vectors(
    const CauNet& net, const ParamSet& params, const ObservationIndex& index,
    UserIndex u, std::optional<std::span<const ItemIndex>> item_subset = {});

struct PreferenceEmbedding {
  std::vector<double> values;
  double tau = 1.0;
  RatingScale scale;
};

// k-th of K thresholds, k = 1..K: (k/K) r_max + ((K-k)/K) r_min.
double preference_threshold(std::size_t k, std::size_t K, const RatingScale& scale);

// f^(k)(r) = (1/M) sum_i sigmoid(tau (t_k - r_i)), a smoothed empirical CDF
// of r evaluated at the K thresholds.
PreferenceEmbedding extract_preference(std::span<const double> r_vec,
                                       std::size_t K, const RatingScale& scale,
                                       double tau);

// Adds d(loss)/d(r_vec) to `d_r` given d(loss)/d(f) in `d_f`.
void extract_preference_backward(std::span<const double> r_vec,
                                 const RatingScale& scale, double tau,
                                 std::span<const double> d_f,
                                 std::span<double> d_r);

struct ContrastiveResult {
  double total = 0.0;
  std::vector<double> per_user;
  // Filled only when gradients are requested.
  std::vector<std::vector<double>> d_exposure;
  std::vector<std::vector<double>> d_nonexposure;
};

// sum_u -log( exp(f1_u . f0_u / t) / sum_{u'} exp(f1_u . f0_{u'} / t) ),
// the denominator running over every batch user including u itself.
// Duplicate users are rejected.
ContrastiveResult contrastive_loss(
    std::span<const UserIndex> users,
    std::span<const std::vector<double>> exposure,
    std::span<const std::vector<double>> nonexposure, double temperature,
    bool with_gradients = false);

}  // namespace counterclr
