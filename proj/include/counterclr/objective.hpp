#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "counterclr/caunet.hpp"
#include "counterclr/gradcheck.hpp"
#include "counterclr/preference.hpp"

namespace counterclr {

// Weights and shape parameters of L = L_base + alpha L_pro + beta L_con.
struct LossSpec {
  double alpha = 1.0;
  double beta = 1.0;
  double temperature = 0.07;
  double tau = 1.0;
  bool stop_gradient_propensity = true;
  RatingScale scale;
};

struct TrainingBatch {
  std::vector<Rating> observed;
  std::vector<LabeledPair> propensity_pairs;
  std::vector<UserIndex> contrast_users;
  // Absent: rating vectors span every item.
  std::optional<std::vector<ItemIndex>> contrast_items;
};

struct LossBreakdown {
  double base = 0.0;
  double propensity = 0.0;
  // Mean of l(u) over the contrastive users.
  double contrastive = 0.0;
  double total = 0.0;
};

// Forward value of the full objective; accumulates exact gradients into
// `grads` when given. L_con is skipped entirely when beta == 0 or the batch
// has no contrastive users.
LossBreakdown compute_loss_and_grads(const CauNet& net, const ParamSet& params,
                                     const ObservationIndex& train,
                                     const TrainingBatch& batch,
                                     const LossSpec& spec,
                                     GradientMap* grads = nullptr,
                                     std::span<const double> frozen_divisors = {});

// max(clip, o) for each observed pair of the batch at `params`.
std::vector<double> propensity_divisors(const CauNet& net,
                                        const ParamSet& params,
                                        std::span<const Rating> observed);

// Finite-difference verification of compute_loss_and_grads. Under stop
// gradient the propensity divisors are frozen at the unperturbed parameters.
// `fault` may corrupt the analytic gradients before comparison.
GradCheckReport check_objective_gradients(
    const CauNet& net, const ObservationIndex& train,
    const TrainingBatch& batch, const LossSpec& spec, double step,
    double rel_tol, const std::function<void(GradientMap&)>& fault = {});

}  // namespace counterclr

namespace counterclr {

// Small randomized problem for gradient verification: random ratings on a
// fraction of the cells, randomized heads with W3 != W2, every pair in the
// L_pro sample (random weights) and every user in the contrastive batch.
struct GradCheckInstance {
  CauNet net;
  InteractionDataset train;
  TrainingBatch batch;
};

GradCheckInstance random_gradcheck_instance(std::uint64_t seed,
                                            std::size_t n_users,
                                            std::size_t n_items, std::size_t K,
                                            const EncoderConfig& encoder,
                                            const RatingScale& scale = {});

}  // namespace counterclr
