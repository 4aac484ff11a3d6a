#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "counterclr/backbone.hpp"
#include "counterclr/data.hpp"
#include "counterclr/ops.hpp"
#include "counterclr/params.hpp"

namespace counterclr {

struct CauNetOptions {
  double momentum = 0.999;
  double propensity_clip = 0.05;
};

// Exposure rating r1, non-exposure rating r0 and propensity o for one pair.
struct PredictionBundle {
  double r1_hat = 0.0;
  double r0_hat = 0.0;
  double o_hat = 0.5;
};

// Affine rating head r = w.z + b.
struct HeadBlocks {
  std::size_t weight = 0;
  std::size_t bias = 0;
};

// Three-headed causal network. The parameter set holds the backbone
// (embeddings + encoder W1), the exposure head W2, the non-exposure head W3
// (updated only by momentum) and the frozen propensity vector h.
class CauNet {
 public:
  struct Trace {
    EncoderTrace encoder;
    double r1 = 0.0;
    double r0 = 0.0;
    double logit = 0.0;  // h^T z
    double o = 0.5;
  };

  CauNet() = default;
  CauNet(std::size_t n_users, std::size_t n_items, std::size_t dim,
         EncoderConfig encoder, CauNetOptions options);

  // Seeds embeddings, encoder, W2 (bias = head_bias), h ~ N(0, 1/p), and
  // copies W2 into W3.
  void initialize(std::uint64_t seed, double head_bias);

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const Backbone& backbone() const { return backbone_; }
  const CauNetOptions& options() const { return options_; }
  void set_options(const CauNetOptions& options) { options_ = options; }
  const HeadBlocks& exposure_head() const { return exposure_; }
  const HeadBlocks& nonexposure_head() const { return nonexposure_; }
  std::size_t propensity_block() const { return propensity_; }

  PredictionBundle forward(UserIndex u, ItemIndex i) const;
  PredictionBundle forward(const ParamSet& params, UserIndex u,
                           ItemIndex i) const;
  double predict(UserIndex u, ItemIndex i) const;

  void trace(const ParamSet& params, UserIndex u, ItemIndex i,
             Trace& out) const;
  // Exposure head only; skips W3 and h.
  double trace_exposure(const ParamSet& params, UserIndex u, ItemIndex i,
                        EncoderTrace& out) const;

  // Back-propagates d/dr1, d/dr0 and d/d(h^T z) into the trainable blocks.
  // W3 and h receive nothing; the r0 path still reaches z.
  void backward(const ParamSet& params, UserIndex u, ItemIndex i,
                const EncoderTrace& encoder, double d_r1, double d_r0,
                double d_logit, GradientMap& grads) const;

  // W3 <- m W3 + (1 - m) W2.
  void momentum_update();

 private:
  double head_value(const ParamSet& params, const HeadBlocks& head,
                    std::span<const double> z) const;
  void head_backward(const ParamSet& params, const HeadBlocks& head,
                     std::span<const double> z, double d_r,
                     GradientMap& grads, std::span<double> dz) const;

  ParamSet params_;
  Backbone backbone_;
  CauNetOptions options_;
  HeadBlocks exposure_;
  HeadBlocks nonexposure_;
  std::size_t propensity_ = 0;
};

// Propensity divisor used in L_base: max(clip, o).
inline double clipped_propensity(double o, double clip) {
  return o < clip ? clip : o;
}

struct LabeledPair {
  UserIndex user;
  ItemIndex item;
  bool observed;
  double weight = 1.0;
};

struct CausalLossOptions {
  double alpha = 1.0;
  // When true the 1/o divisor is a constant under differentiation.
  bool stop_gradient_propensity = true;
};

struct CausalLoss {
  double base = 0.0;
  double propensity = 0.0;
  double total = 0.0;  // base + alpha * propensity
};

// L_base = mean over `observed` of (r1 - r)^2 / max(clip, o)
// L_pro  = mean over `pairs` of weight * BCE(o, observed)
// `frozen_divisors`, when non-empty, replaces max(clip, o) per observed pair.
// Gradients (scaled by `grad_scale`) are accumulated into `grads` if given.
CausalLoss causal_loss(const CauNet& net, const ParamSet& params,
                       std::span<const Rating> observed,
                       std::span<const LabeledPair> pairs,
                       const CausalLossOptions& options,
                       std::span<const double> frozen_divisors = {},
                       GradientMap* grads = nullptr, double grad_scale = 1.0);

}  // namespace counterclr
