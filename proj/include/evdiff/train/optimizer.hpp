#pragma once

#include <cstdint>
#include <map>

#include "evdiff/core/params.hpp"

namespace evdiff {

/// Adaptive-moment optimizer with decoupled weight decay. The decay is not
/// part of the gradient: each update shrinks decay-flagged tensors by
/// lr * wd * p directly, which realizes the L4 regularizer.
template <typename Scalar>
class AdamW {
 public:
  struct Settings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  AdamW(const ParameterStore<Scalar>& store, Settings settings)
      : settings_(settings) {
    for (const auto& [name, p] : store) {
      if (!p.trainable) continue;
      m_.emplace(name, VecX<Scalar>::Zero(p.value.numel()));
      v_.emplace(name, VecX<Scalar>::Zero(p.value.numel()));
    }
  }

  void step(ParameterStore<Scalar>& store, const GradientBuffer<Scalar>& grads,
            double lr) {
    ++steps_;
    const double bc1 = 1.0 - std::pow(settings_.beta1, steps_);
    const double bc2 = 1.0 - std::pow(settings_.beta2, steps_);
    for (auto& [name, p] : store) {
      if (!p.trainable) continue;
      const VecX<Scalar>& g = grads.at(name);
      VecX<Scalar>& m = m_.at(name);
      VecX<Scalar>& v = v_.at(name);
      m = static_cast<Scalar>(settings_.beta1) * m +
          static_cast<Scalar>(1.0 - settings_.beta1) * g;
      v = (static_cast<Scalar>(settings_.beta2) * v.array() +
           static_cast<Scalar>(1.0 - settings_.beta2) * g.array().square())
              .matrix();
      auto m_hat = m.array() / static_cast<Scalar>(bc1);
      auto v_hat = v.array() / static_cast<Scalar>(bc2);
      p.value.data.array() -=
          static_cast<Scalar>(lr) * m_hat /
          (v_hat.sqrt() + static_cast<Scalar>(settings_.eps));
      if (p.decay && settings_.weight_decay != 0.0)
        p.value.data *=
            static_cast<Scalar>(1.0 - lr * settings_.weight_decay);
    }
  }

  std::int64_t step_count() const { return steps_; }
  void set_step_count(std::int64_t n) { steps_ = n; }
  const Settings& settings() const { return settings_; }

  std::map<std::string, VecX<Scalar>>& first_moments() { return m_; }
  std::map<std::string, VecX<Scalar>>& second_moments() { return v_; }

 private:
  Settings settings_;
  std::int64_t steps_ = 0;
  std::map<std::string, VecX<Scalar>> m_, v_;
};

}  // namespace evdiff
