#include "counterclr/params.hpp"

#include <cmath>
#include <algorithm>

#include "counterclr/error.hpp"

namespace counterclr {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::size_t ParamSet::add(std::string name, std::vector<std::size_t> shape,
                          bool trainable) {
  if (contains(name)) throw ArgumentError("duplicate parameter block " + name);
  const auto n = shape_size(shape);
  blocks_.push_back(
      {std::move(name), std::move(shape), std::vector<double>(n, 0.0), trainable});
  return blocks_.size() - 1;
}

std::size_t ParamSet::index_of(std::string_view name) const {
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    if (blocks_[k].name == name) return k;
  }
  throw ArgumentError("no parameter block named " + std::string(name));
}

bool ParamSet::contains(std::string_view name) const {
  return std::any_of(blocks_.begin(), blocks_.end(),
                     [&](const ParamBlock& b) { return b.name == name; });
}

void ParamSet::check_finite() const {
  for (const auto& b : blocks_) {
    for (double v : b.values) {
      if (!std::isfinite(v)) {
        throw NumericalError("non-finite value in parameter block " + b.name);
      }
    }
  }
}

GradientMap::GradientMap(const ParamSet& params) {
  for (const auto& b : params) {
    grads_.emplace_back(b.trainable ? b.size() : 0, 0.0);
    present_.push_back(b.trainable);
    names_.push_back(b.name);
  }
}

void GradientMap::zero() {
  for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
}

void GradientMap::check_finite(std::string_view term) const {
  for (std::size_t k = 0; k < grads_.size(); ++k) {
    for (double v : grads_[k]) {
      if (!std::isfinite(v)) {
        throw NumericalError("non-finite gradient of " + std::string(term) +
                             " in block " + names_[k]);
      }
    }
  }
}

}  // namespace counterclr
