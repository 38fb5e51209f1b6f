#pragma once

// Finite-difference oracles for gradient verification. These stay on the
// test side: they evaluate the loss through fresh forward passes only and
// never touch the reverse-mode path they are checking.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "evdiff/core/params.hpp"

namespace evdiff::testing {

struct FdReport {
  double max_rel = 0.0;
  std::string worst;
};

/// Central differences (step h) on every trainable scalar in the store,
/// compared elementwise against the analytic buffer. `loss` must be a pure
/// function of the store.
template <typename LossFn>
FdReport fd_check(ParameterStore<double>& store, LossFn&& loss,
                  const GradientBuffer<double>& analytic, double h = 1e-5,
                  double guard = 1e-6) {
  FdReport rep;
  for (auto& [name, p] : store) {
    if (!p.trainable) continue;
    for (int i = 0; i < p.value.numel(); ++i) {
      double& slot = p.value.data[i];
      const double orig = slot;
      slot = orig + h;
      const double fp = loss();
      slot = orig - h;
      const double fm = loss();
      slot = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = analytic.at(name)[i];
      const double rel =
          std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), guard});
      if (rel > rep.max_rel) {
        rep.max_rel = rel;
        rep.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return rep;
}

struct GroupReport {
  std::string name;
  double rel = 0.0;
};

/// Per-parameter-group comparison: relative L2 distance between the
/// finite-difference gradient vector and the analytic one.
template <typename LossFn>
std::vector<GroupReport> fd_check_groups(ParameterStore<double>& store, LossFn&& loss,
                                         const GradientBuffer<double>& analytic,
                                         double h = 1e-5) {
  std::vector<GroupReport> out;
  for (auto& [name, p] : store) {
    if (!p.trainable) continue;
    VecX<double> fd(p.value.numel());
    for (int i = 0; i < p.value.numel(); ++i) {
      double& slot = p.value.data[i];
      const double orig = slot;
      slot = orig + h;
      const double fp = loss();
      slot = orig - h;
      const double fm = loss();
      slot = orig;
      fd[i] = (fp - fm) / (2.0 * h);
    }
    const VecX<double>& ad = analytic.at(name);
    const double denom = std::max({fd.norm(), ad.norm(), 1e-8});
    out.push_back({name, (fd - ad).norm() / denom});
  }
  return out;
}

}  // namespace evdiff::testing
