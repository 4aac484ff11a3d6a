#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace counterclr {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// -log softmax(logits)[target], max-subtracted. When `d_logits` is non-empty
// it receives softmax(logits) - onehot(target).
double softmax_cross_entropy(std::span<const double> logits,
                             std::size_t target,
                             std::span<double> d_logits = {});

}  // namespace counterclr
