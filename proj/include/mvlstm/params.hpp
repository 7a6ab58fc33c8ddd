// SPDX-License-Identifier: Apache-2.0
/**
 * @file   params.hpp
 * @brief  Ordered collection of named, learnable tensors.
 */

#ifndef MVLSTM_PARAMS_HPP
#define MVLSTM_PARAMS_HPP

#include <mvlstm/autodiff.hpp>
#include <mvlstm/tensor.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace mvlstm {

struct NamedTensor {
  std::string name;
  Tensor value;
  /// Weight tensors take the L2 penalty; biases do not.
  bool decay = true;
};

class ParamSet {
public:
  void add(std::string name, Tensor value, bool decay);

  std::size_t size() const { return entries_.size(); }
  const NamedTensor &operator[](std::size_t i) const { return entries_[i]; }
  NamedTensor &operator[](std::size_t i) { return entries_[i]; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Index of `name`; throws ContractViolation if absent.
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;
  const Tensor &get(std::string_view name) const;
  Tensor &get(std::string_view name);

  std::vector<Tensor> zeros_like() const;
  std::size_t scalar_count() const;

  /// Registers every tensor as a differentiable parameter leaf.
  std::vector<ad::Var> bind(ad::Tape &tape) const;

  bool operator==(const ParamSet &other) const;

private:
  std::vector<NamedTensor> entries_;
};

/// Parameters bound to a tape, addressable by name.
class BoundParams {
public:
  BoundParams(const ParamSet &set, std::span<const ad::Var> vars)
    : set_(&set), vars_(vars) {}
  ad::Var operator[](std::string_view name) const {
    return vars_[set_->index_of(name)];
  }

private:
  const ParamSet *set_;
  std::span<const ad::Var> vars_;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(const Shape &shape, std::size_t fan_in,
                      std::size_t fan_out, std::mt19937_64 &rng);

/// SplitMix64 finalizer; derives independent stream seeds from a base seed.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream);

} // namespace mvlstm

#endif // MVLSTM_PARAMS_HPP
