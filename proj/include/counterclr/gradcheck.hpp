#pragma once

#include <functional>
#include <string>
#include <vector>

#include "counterclr/params.hpp"

namespace counterclr {

struct BlockCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<BlockCheck> blocks;
  double rel_tol = 0.0;
  double step = 0.0;
  bool passed = true;

  // First failing block name, or empty.
  std::string first_failure() const;
};

using LossFunction = std::function<double(const ParamSet&)>;

// Central differences over every trainable scalar:
//   numeric = (loss(theta + step) - loss(theta - step)) / (2 step)
//   rel     = |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
// The first argument is copied and perturbed one coordinate at a time.
GradCheckReport finite_difference_check(ParamSet params,
                                        const LossFunction& loss,
                                        const GradientMap& analytic,
                                        double step, double rel_tol);

}  // namespace counterclr
