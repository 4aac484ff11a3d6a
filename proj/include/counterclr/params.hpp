#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace counterclr {

// Named dense parameter array with a fixed shape.
struct ParamBlock {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
  bool trainable = true;

  std::size_t size() const { return values.size(); }
  bool operator==(const ParamBlock&) const = default;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);

class ParamSet {
 public:
  // Returns the block's position; names must be unique.
  std::size_t add(std::string name, std::vector<std::size_t> shape,
                  bool trainable = true);

  std::size_t size() const { return blocks_.size(); }
  ParamBlock& operator[](std::size_t k) { return blocks_[k]; }
  const ParamBlock& operator[](std::size_t k) const { return blocks_[k]; }

  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;
  ParamBlock& at(std::string_view name) { return blocks_[index_of(name)]; }
  const ParamBlock& at(std::string_view name) const {
    return blocks_[index_of(name)];
  }

  auto begin() { return blocks_.begin(); }
  auto end() { return blocks_.end(); }
  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }

  // Throws NumericalError naming the first block with a non-finite value.
  void check_finite() const;
  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<ParamBlock> blocks_;
};

// Gradient arrays aligned with a ParamSet; non-trainable blocks carry none.
class GradientMap {
 public:
  GradientMap() = default;
  explicit GradientMap(const ParamSet& params);

  std::size_t size() const { return grads_.size(); }
  bool has(std::size_t block) const { return present_[block]; }
  std::span<double> operator[](std::size_t block) { return grads_[block]; }
  std::span<const double> operator[](std::size_t block) const {
    return grads_[block];
  }
  const std::string& name(std::size_t block) const { return names_[block]; }

  void zero();
  // Throws NumericalError naming `term` and the block on non-finite entries.
  void check_finite(std::string_view term) const;

 private:
  std::vector<std::vector<double>> grads_;
  std::vector<bool> present_;
  std::vector<std::string> names_;
};

}  // namespace counterclr
