// SPDX-License-Identifier: Apache-2.0

#include <mvlstm/error.hpp>
#include <mvlstm/params.hpp>

#include <cmath>

namespace mvlstm {

void ParamSet::add(std::string name, Tensor value, bool decay) {
  if (contains(name))
    throw ContractViolation("duplicate parameter name '" + name + "'");
  entries_.push_back({std::move(name), std::move(value), decay});
}

std::size_t ParamSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name)
      return i;
  throw ContractViolation("unknown parameter '" + std::string(name) + "'");
}

bool ParamSet::contains(std::string_view name) const {
  for (const NamedTensor &e : entries_)
    if (e.name == name)
      return true;
  return false;
}

const Tensor &ParamSet::get(std::string_view name) const {
  return entries_[index_of(name)].value;
}

Tensor &ParamSet::get(std::string_view name) {
  return entries_[index_of(name)].value;
}

std::vector<Tensor> ParamSet::zeros_like() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const NamedTensor &e : entries_)
    out.emplace_back(e.value.shape());
  return out;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const NamedTensor &e : entries_)
    n += e.value.size();
  return n;
}

std::vector<ad::Var> ParamSet::bind(ad::Tape &tape) const {
  std::vector<ad::Var> vars;
  vars.reserve(entries_.size());
  for (const NamedTensor &e : entries_)
    vars.push_back(tape.parameter(e.value));
  return vars;
}

bool ParamSet::operator==(const ParamSet &other) const {
  if (entries_.size() != other.entries_.size())
    return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const NamedTensor &a = entries_[i], &b = other.entries_[i];
    if (a.name != b.name || a.decay != b.decay || !(a.value == b.value))
      return false;
  }
  return true;
}

Tensor glorot_uniform(const Shape &shape, std::size_t fan_in,
                      std::size_t fan_out, std::mt19937_64 &rng) {
  const double limit =
    std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor out(shape);
  for (double &v : out.data())
    v = dist(rng);
  return out;
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace mvlstm
