#include "counterclr/adam.hpp"

#include <cmath>

#include "counterclr/error.hpp"

namespace counterclr {

AdamState::AdamState(const ParamSet& params, AdamConfig config)
    : config_(config) {
  for (const auto& b : params) {
    m_.emplace_back(b.trainable ? b.size() : 0, 0.0);
    v_.emplace_back(b.trainable ? b.size() : 0, 0.0);
  }
}

void AdamState::apply(ParamSet& params, const GradientMap& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ArgumentError("adam: parameter/gradient layout mismatch");
  }
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  const double lr = config_.learning_rate;
  const double wd = config_.weight_decay;

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& block = params[k];
    if (!block.trainable) continue;
    if (!grads.has(k) || grads[k].size() != block.size()) {
      throw ArgumentError("adam: gradient shape mismatch for " + block.name);
    }
    auto g = grads[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t j = 0; j < block.size(); ++j) {
      const double gj = g[j] + wd * block.values[j];
      m[j] = b1 * m[j] + (1.0 - b1) * gj;
      v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
      block.values[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.epsilon);
    }
  }
}

}  // namespace counterclr
