#include "counterclr/objective.hpp"

#include <cmath>

#include "counterclr/error.hpp"

namespace counterclr {

namespace {

double contrastive_term(const CauNet& net, const ParamSet& params,
                        const ObservationIndex& train,
                        const TrainingBatch& batch, const LossSpec& spec,
                        GradientMap* grads) {
  const auto& users = batch.contrast_users;
  const std::size_t n_users = users.size();
  std::vector<ItemIndex> all_items;
  if (!batch.contrast_items) {
    all_items.resize(net.backbone().n_items());
    for (std::size_t i = 0; i < all_items.size(); ++i) {
      all_items[i] = static_cast<ItemIndex>(i);
    }
  }
  const std::span<const ItemIndex> items =
      batch.contrast_items ? std::span<const ItemIndex>(*batch.contrast_items)
                           : std::span<const ItemIndex>(all_items);
  const std::size_t K = net.backbone().dim();

  std::vector<RatingVectorPair> vectors(n_users);
  std::vector<std::vector<double>> f1(n_users);
  std::vector<std::vector<double>> f0(n_users);
  for (std::size_t b = 0; b < n_users; ++b) {
    vectors[b] = assemble_rating_vectors(net, params, train, users[b], items);
    f1[b] = extract_preference(vectors[b].exposure, K, spec.scale, spec.tau).values;
    f0[b] = extract_preference(vectors[b].nonexposure, K, spec.scale, spec.tau).values;
  }
  auto result = contrastive_loss(users, f1, f0, spec.temperature, grads != nullptr);
  const double mean_loss = result.total / static_cast<double>(n_users);
  if (!grads) return mean_loss;

  const double scale = spec.beta / static_cast<double>(n_users);
  std::vector<double> d_v1;
  std::vector<double> d_v0;
  CauNet::Trace t;
  for (std::size_t b = 0; b < n_users; ++b) {
    const auto& v = vectors[b];
    d_v1.assign(items.size(), 0.0);
    d_v0.assign(items.size(), 0.0);
    extract_preference_backward(v.exposure, spec.scale, spec.tau,
                                result.d_exposure[b], d_v1);
    extract_preference_backward(v.nonexposure, spec.scale, spec.tau,
                                result.d_nonexposure[b], d_v0);
    for (std::size_t k = 0; k < items.size(); ++k) {
      // Observed entries of the exposure vector are constants.
      const double d_r1 = v.observed[k] ? 0.0 : scale * d_v1[k];
      const double d_r0 = scale * d_v0[k];
      if (d_r1 == 0.0 && d_r0 == 0.0) continue;
      net.trace(params, users[b], items[k], t);
      net.backward(params, users[b], items[k], t.encoder, d_r1, d_r0, 0.0, *grads);
    }
  }
  return mean_loss;
}

}  // namespace

LossBreakdown compute_loss_and_grads(const CauNet& net, const ParamSet& params,
                                     const ObservationIndex& train,
                                     const TrainingBatch& batch,
                                     const LossSpec& spec, GradientMap* grads,
                                     std::span<const double> frozen_divisors) {
  CausalLossOptions causal{spec.alpha, spec.stop_gradient_propensity};
  const auto cau = causal_loss(net, params, batch.observed,
                               batch.propensity_pairs, causal, frozen_divisors,
                               grads);
  if (grads) grads->check_finite("L_cau");
  LossBreakdown out;
  out.base = cau.base;
  out.propensity = cau.propensity;
  if (spec.beta != 0.0 && !batch.contrast_users.empty()) {
    out.contrastive = contrastive_term(net, params, train, batch, spec, grads);
    if (grads) grads->check_finite("L_con");
  }
  out.total = out.base + spec.alpha * out.propensity + spec.beta * out.contrastive;
  if (!std::isfinite(out.total)) throw NumericalError("non-finite total loss");
  return out;
}

std::vector<double> propensity_divisors(const CauNet& net,
                                        const ParamSet& params,
                                        std::span<const Rating> observed) {
  std::vector<double> out;
  out.reserve(observed.size());
  CauNet::Trace t;
  for (const auto& r : observed) {
    net.trace(params, r.user, r.item, t);
    out.push_back(clipped_propensity(t.o, net.options().propensity_clip));
  }
  return out;
}

GradCheckReport check_objective_gradients(
    const CauNet& net, const ObservationIndex& train,
    const TrainingBatch& batch, const LossSpec& spec, double step,
    double rel_tol, const std::function<void(GradientMap&)>& fault) {
  const auto& params = net.params();
  std::vector<double> frozen;
  if (spec.stop_gradient_propensity) {
    frozen = propensity_divisors(net, params, batch.observed);
  }
  GradientMap grads(params);
  compute_loss_and_grads(net, params, train, batch, spec, &grads, frozen);
  if (fault) fault(grads);
  auto loss = [&](const ParamSet& p) {
    return compute_loss_and_grads(net, p, train, batch, spec, nullptr, frozen).total;
  };
  return finite_difference_check(params, loss, grads, step, rel_tol);
}

}  // namespace counterclr

#include "counterclr/rng.hpp"

namespace counterclr {

GradCheckInstance random_gradcheck_instance(std::uint64_t seed,
                                            std::size_t n_users,
                                            std::size_t n_items, std::size_t K,
                                            const EncoderConfig& encoder,
                                            const RatingScale& scale) {
  auto rng = make_rng(seed, Stream::kGroundTruth);
  std::vector<Rating> observed;
  for (std::size_t u = 0; u < n_users; ++u) {
    for (std::size_t i = 0; i < n_items; ++i) {
      // Guarantee one observation per user; the rest at rate 0.4.
      if (i == u % n_items || uniform01(rng) < 0.4) {
        const double r = scale.r_min + scale.width() * uniform01(rng);
        observed.push_back({static_cast<UserIndex>(u), static_cast<ItemIndex>(i), r});
      }
    }
  }
  InteractionDataset train(n_users, n_items, observed, scale);

  CauNet net(n_users, n_items, K, encoder, CauNetOptions{});
  net.initialize(seed, scale.mid());
  auto& params = net.params();
  // Embeddings large enough that every path carries signal.
  for (auto block : {net.backbone().user_block(), net.backbone().item_block()}) {
    for (auto& v : params[block].values) v = 0.8 * standard_normal(rng);
  }
  for (const auto* head : {&net.exposure_head(), &net.nonexposure_head()}) {
    for (auto& v : params[head->weight].values) v = 0.5 * standard_normal(rng);
    params[head->bias].values[0] = scale.mid() + 0.5 * standard_normal(rng);
  }

  GradCheckInstance out{std::move(net), std::move(train), {}};
  out.batch.observed = out.train.observed();
  const ObservationIndex index(out.train);
  for (std::size_t u = 0; u < n_users; ++u) {
    for (std::size_t i = 0; i < n_items; ++i) {
      const auto uu = static_cast<UserIndex>(u);
      const auto ii = static_cast<ItemIndex>(i);
      out.batch.propensity_pairs.push_back(
          {uu, ii, index.observed(uu, ii), 0.5 + 1.5 * uniform01(rng)});
    }
    out.batch.contrast_users.push_back(static_cast<UserIndex>(u));
  }
  return out;
}

}  // namespace counterclr
