#pragma once

#include <map>
#include <string>
#include <vector>

#include "evdiff/core/errors.hpp"
#include "evdiff/core/tensor.hpp"

namespace evdiff {

/// One named trainable (or frozen) array. `decay` marks tensors subject to
/// weight decay; biases and phase vectors are created with decay=false.
template <typename Scalar>
struct Parameter {
  Tensor<Scalar> value;
  bool trainable = true;
  bool decay = true;
};

/// Named, shaped storage for every trainable symbol of the model. Names are
/// unique and shapes are immutable after creation. Iteration order is the
/// lexicographic name order, which keeps serialization and optimizer updates
/// deterministic.
template <typename Scalar>
class ParameterStore {
 public:
  Tensor<Scalar>& create(const std::string& name, std::vector<int> shape,
                         bool trainable = true, bool decay = true) {
    if (entries_.count(name))
      throw ContractError("parameter '" + name + "' already exists");
    Parameter<Scalar> p;
    p.value = Tensor<Scalar>::zeros(std::move(shape));
    p.trainable = trainable;
    p.decay = decay;
    auto [it, ok] = entries_.emplace(name, std::move(p));
    (void)ok;
    return it->second.value;
  }

  bool has(const std::string& name) const { return entries_.count(name) > 0; }

  Parameter<Scalar>& entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw IndexError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Parameter<Scalar>& entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw IndexError("unknown parameter '" + name + "'");
    return it->second;
  }

  Tensor<Scalar>& at(const std::string& name) { return entry(name).value; }
  const Tensor<Scalar>& at(const std::string& name) const { return entry(name).value; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
  }

  std::size_t size() const { return entries_.size(); }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Total number of scalar entries across all parameters.
  long total_scalars() const {
    long n = 0;
    for (const auto& [k, p] : entries_) n += p.value.numel();
    return n;
  }

  template <typename Other>
  ParameterStore<Other> cast() const {
    ParameterStore<Other> out;
    for (const auto& [k, p] : entries_) {
      auto& t = out.create(k, p.value.shape, p.trainable, p.decay);
      t.data = p.value.data.template cast<Other>();
    }
    return out;
  }

 private:
  std::map<std::string, Parameter<Scalar>> entries_;
};

/// Gradient accumulator shaped like a ParameterStore. Each window/record may
/// fill its own buffer; buffers merge associatively in a fixed order.
template <typename Scalar>
class GradientBuffer {
 public:
  explicit GradientBuffer(const ParameterStore<Scalar>& store) {
    for (const auto& [name, p] : store) {
      if (p.trainable) grads_.emplace(name, VecX<Scalar>::Zero(p.value.numel()));
    }
  }

  void zero() {
    for (auto& [k, g] : grads_) g.setZero();
  }

  bool has(const std::string& name) const { return grads_.count(name) > 0; }

  VecX<Scalar>& at(const std::string& name) {
    auto it = grads_.find(name);
    if (it == grads_.end()) throw IndexError("no gradient slot for '" + name + "'");
    return it->second;
  }
  const VecX<Scalar>& at(const std::string& name) const {
    auto it = grads_.find(name);
    if (it == grads_.end()) throw IndexError("no gradient slot for '" + name + "'");
    return it->second;
  }

  void add(const std::string& name, const VecX<Scalar>& g) {
    auto& slot = at(name);
    if (slot.size() != g.size())
      throw DimensionError("gradient shape mismatch for '" + name + "'");
    slot += g;
  }

  void merge(const GradientBuffer& other) {
    for (const auto& [k, g] : other.grads_) add(k, g);
  }

  void scale(Scalar a) {
    for (auto& [k, g] : grads_) g *= a;
  }

  auto begin() const { return grads_.begin(); }
  auto end() const { return grads_.end(); }

 private:
  std::map<std::string, VecX<Scalar>> grads_;
};

}  // namespace evdiff
