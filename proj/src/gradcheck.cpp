#include "counterclr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "counterclr/error.hpp"

namespace counterclr {

std::string GradCheckReport::first_failure() const {
  for (const auto& b : blocks) {
    if (!b.passed) return b.name;
  }
  return {};
}

GradCheckReport finite_difference_check(ParamSet params,
                                        const LossFunction& loss,
                                        const GradientMap& analytic,
                                        double step, double rel_tol) {
  if (!(step > 0.0)) throw ArgumentError("finite difference step must be > 0");
  if (analytic.size() != params.size()) {
    throw ArgumentError("gradient map does not match parameter layout");
  }
  GradCheckReport report;
  report.rel_tol = rel_tol;
  report.step = step;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].trainable) continue;
    BlockCheck check{params[k].name, 0.0, 0, true};
    for (std::size_t j = 0; j < params[k].size(); ++j) {
      const double saved = params[k].values[j];
      params[k].values[j] = saved + step;
      const double up = loss(params);
      params[k].values[j] = saved - step;
      const double down = loss(params);
      params[k].values[j] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (!(rel <= check.max_rel_error)) {
        check.max_rel_error = rel;
        check.worst_index = j;
      }
    }
    check.passed = check.max_rel_error <= rel_tol;
    report.passed = report.passed && check.passed;
    report.blocks.push_back(check);
  }
  return report;
}

}  // namespace counterclr
