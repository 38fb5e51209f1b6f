#pragma once

#include <Eigen/Core>
#include <atomic>
#include <cmath>
#include <span>
#include <vector>

#include "evdiff/core/errors.hpp"

namespace evdiff {

/// Default floor on inter-event intervals (normalized units) before the
/// logarithm; the transform is undefined at zero gaps.
inline constexpr double kIntervalFloor = 1e-6;

/// Cap on a log-interval when exponentiating back; exp(50) ~ 5e21 keeps the
/// reconstruction finite for any network output.
inline constexpr double kLogIntervalCap = 50.0;

/// Number of times time_inverse had to cap an overflowing log-interval.
std::atomic<long>& time_overflow_warnings();

/// Log-interval image of an event-time vector: x_i = log(tau_i) with
/// tau_1 = t_1 - anchor and tau_i = t_i - t_{i-1}. Intervals below the floor
/// are floored; non-positive intervals are a contract violation.
inline Eigen::VectorXd time_forward(std::span<const double> times, double anchor,
                                    double floor = kIntervalFloor) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(times.size()));
  double prev = anchor;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double tau = times[i] - prev;
    if (tau <= 0.0)
      throw ContractError("time_forward: non-positive interval at index " +
                          std::to_string(i));
    x[static_cast<Eigen::Index>(i)] = std::log(std::max(tau, floor));
    prev = times[i];
  }
  return x;
}

/// Inverse map: t_i = anchor + sum_{r<=i} exp(x_r). Strictly increasing by
/// construction for any real input; overflowing exponents are capped and
/// counted.
inline std::vector<double> time_inverse(const Eigen::Ref<const Eigen::VectorXd>& x,
                                        double anchor, double cap = kLogIntervalCap) {
  std::vector<double> times(static_cast<std::size_t>(x.size()));
  double t = anchor;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double v = x[i];
    if (v > cap) {
      v = cap;
      ++time_overflow_warnings();
    }
    t += std::exp(v);
    times[static_cast<std::size_t>(i)] = t;
  }
  return times;
}

}  // namespace evdiff
