#include "counterclr/caunet.hpp"

#include <cmath>

#include "counterclr/error.hpp"
#include "counterclr/rng.hpp"

namespace counterclr {

namespace {

HeadBlocks add_head(ParamSet& params, const std::string& prefix,
                    std::size_t z_dim, bool trainable) {
  HeadBlocks head;
  head.weight = params.add(prefix + ".weight", {z_dim}, trainable);
  head.bias = params.add(prefix + ".bias", {1}, trainable);
  return head;
}

}  // namespace

CauNet::CauNet(std::size_t n_users, std::size_t n_items, std::size_t dim,
               EncoderConfig encoder, CauNetOptions options)
    : options_(options) {
  if (!(options.momentum >= 0.0 && options.momentum <= 1.0)) {
    throw ArgumentError("momentum must lie in [0, 1]");
  }
  if (!(options.propensity_clip > 0.0 && options.propensity_clip <= 1.0)) {
    throw ArgumentError("propensity_clip must lie in (0, 1]");
  }
  backbone_ = Backbone(params_, n_users, n_items, dim, std::move(encoder));
  const auto p = backbone_.z_dim();
  exposure_ = add_head(params_, "exposure_head", p, true);
  nonexposure_ = add_head(params_, "nonexposure_head", p, false);
  propensity_ = params_.add("propensity.h", {p}, false);
}

void CauNet::initialize(std::uint64_t seed, double head_bias) {
  auto rng = make_rng(seed, Stream::kInit);
  backbone_.initialize(params_, rng);
  const auto p = backbone_.z_dim();
  const double sd = 1.0 / std::sqrt(static_cast<double>(p));
  auto& w2 = params_[exposure_.weight].values;
  if (backbone_.encoder_config().mode == EncoderMode::kMf) {
    // Start from plain MF: weight 1 on the product features, 0 elsewhere.
    const std::size_t k_dim = backbone_.dim();
    for (std::size_t k = 0; k < w2.size(); ++k) w2[k] = k >= 2 * k_dim ? 1.0 : 0.0;
  } else {
    for (auto& v : w2) v = sd * standard_normal(rng);
  }
  params_[exposure_.bias].values[0] = head_bias;
  for (auto& v : params_[propensity_].values) v = sd * standard_normal(rng);

  params_[nonexposure_.weight].values = params_[exposure_.weight].values;
  params_[nonexposure_.bias].values = params_[exposure_.bias].values;
}

double CauNet::head_value(const ParamSet& params, const HeadBlocks& head,
                          std::span<const double> z) const {
  return params[head.bias].values[0] + dot(params[head.weight].values, z);
}

void CauNet::head_backward(const ParamSet& params, const HeadBlocks& head,
                           std::span<const double> z, double d_r,
                           GradientMap& grads, std::span<double> dz) const {
  const auto& w = params[head.weight].values;
  for (std::size_t k = 0; k < w.size(); ++k) dz[k] += d_r * w[k];
  if (grads.has(head.weight)) {
    auto gw = grads[head.weight];
    for (std::size_t k = 0; k < w.size(); ++k) gw[k] += d_r * z[k];
  }
  if (grads.has(head.bias)) grads[head.bias][0] += d_r;
}

void CauNet::trace(const ParamSet& params, UserIndex u, ItemIndex i,
                   Trace& out) const {
  backbone_.forward(params, u, i, out.encoder);
  const auto z = out.encoder.z();
  out.r1 = head_value(params, exposure_, z);
  out.r0 = head_value(params, nonexposure_, z);
  out.logit = dot(params[propensity_].values, z);
  out.o = sigmoid(out.logit);
}

double CauNet::trace_exposure(const ParamSet& params, UserIndex u, ItemIndex i,
                              EncoderTrace& out) const {
  backbone_.forward(params, u, i, out);
  return head_value(params, exposure_, out.z());
}

PredictionBundle CauNet::forward(const ParamSet& params, UserIndex u,
                                 ItemIndex i) const {
  thread_local Trace t;
  trace(params, u, i, t);
  if (!std::isfinite(t.r1) || !std::isfinite(t.r0) || !std::isfinite(t.o)) {
    throw NumericalError("non-finite CauNet output");
  }
  return {t.r1, t.r0, t.o};
}

PredictionBundle CauNet::forward(UserIndex u, ItemIndex i) const {
  return forward(params_, u, i);
}

double CauNet::predict(UserIndex u, ItemIndex i) const {
  thread_local EncoderTrace t;
  return trace_exposure(params_, u, i, t);
}

void CauNet::backward(const ParamSet& params, UserIndex u, ItemIndex i,
                      const EncoderTrace& encoder, double d_r1, double d_r0,
                      double d_logit, GradientMap& grads) const {
  thread_local std::vector<double> dz;
  const auto z = encoder.z();
  dz.assign(z.size(), 0.0);
  if (d_r1 != 0.0) head_backward(params, exposure_, z, d_r1, grads, dz);
  if (d_r0 != 0.0) head_backward(params, nonexposure_, z, d_r0, grads, dz);
  if (d_logit != 0.0) {
    const auto& h = params[propensity_].values;
    for (std::size_t k = 0; k < h.size(); ++k) dz[k] += d_logit * h[k];
  }
  backbone_.backward(params, u, i, encoder, dz, grads);
}

void CauNet::momentum_update() {
  const double m = options_.momentum;
  auto blend = [&](std::size_t target, std::size_t source) {
    auto& w3 = params_[target].values;
    const auto& w2 = params_[source].values;
    for (std::size_t k = 0; k < w3.size(); ++k) {
      w3[k] = m * w3[k] + (1.0 - m) * w2[k];
    }
  };
  blend(nonexposure_.weight, exposure_.weight);
  blend(nonexposure_.bias, exposure_.bias);
}

CausalLoss causal_loss(const CauNet& net, const ParamSet& params,
                       std::span<const Rating> observed,
                       std::span<const LabeledPair> pairs,
                       const CausalLossOptions& options,
                       std::span<const double> frozen_divisors,
                       GradientMap* grads, double grad_scale) {
  if (observed.empty()) throw ArgumentError("causal loss needs observed pairs");
  if (!frozen_divisors.empty() && frozen_divisors.size() != observed.size()) {
    throw ArgumentError("frozen divisors must match the observed batch");
  }
  const double clip = net.options().propensity_clip;
  thread_local CauNet::Trace t;
  CausalLoss loss;

  const double n_obs = static_cast<double>(observed.size());
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const auto& r = observed[k];
    net.trace(params, r.user, r.item, t);
    const double divisor =
        frozen_divisors.empty() ? clipped_propensity(t.o, clip) : frozen_divisors[k];
    const double err = t.r1 - r.value;
    loss.base += err * err / divisor;
    if (grads) {
      const double d_r1 = grad_scale * 2.0 * err / divisor / n_obs;
      double d_logit = 0.0;
      if (!options.stop_gradient_propensity && frozen_divisors.empty() &&
          t.o >= clip) {
        // d(e^2 / o)/d(logit) = -e^2 / o^2 * o (1 - o)
        d_logit = -grad_scale * err * err * (1.0 - t.o) / t.o / n_obs;
      }
      net.backward(params, r.user, r.item, t.encoder, d_r1, 0.0, d_logit, *grads);
    }
  }
  loss.base /= n_obs;

  if (!pairs.empty()) {
    const double n_pairs = static_cast<double>(pairs.size());
    const bool backprop = grads && options.alpha != 0.0;
    for (const auto& p : pairs) {
      net.trace(params, p.user, p.item, t);
      // -log o = softplus(-s), -log(1 - o) = softplus(s)
      loss.propensity += p.weight * (p.observed ? softplus(-t.logit) : softplus(t.logit));
      if (backprop) {
        const double d_logit = grad_scale * options.alpha * p.weight *
                               (t.o - (p.observed ? 1.0 : 0.0)) / n_pairs;
        net.backward(params, p.user, p.item, t.encoder, 0.0, 0.0, d_logit, *grads);
      }
    }
    loss.propensity /= n_pairs;
  }
  loss.total = loss.base + options.alpha * loss.propensity;
  if (!std::isfinite(loss.base)) throw NumericalError("non-finite L_base");
  if (!std::isfinite(loss.propensity)) throw NumericalError("non-finite L_pro");
  return loss;
}

}  // namespace counterclr
