#pragma once

#include <cstdint>
#include <vector>

#include "counterclr/params.hpp"

namespace counterclr {

struct AdamConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // L2 penalty added to the gradient of every trainable block.
  double weight_decay = 0.0;
};

class AdamState {
 public:
  AdamState(const ParamSet& params, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  std::uint64_t step() const { return step_; }
  const std::vector<double>& first_moment(std::size_t block) const {
    return m_[block];
  }
  const std::vector<double>& second_moment(std::size_t block) const {
    return v_[block];
  }

  // Bias-corrected Adam update of every trainable block. Non-trainable
  // blocks are left untouched.
  void apply(ParamSet& params, const GradientMap& grads);

 private:
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_ = 0;
};

}  // namespace counterclr
