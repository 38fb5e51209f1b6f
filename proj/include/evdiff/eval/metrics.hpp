#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "evdiff/core/rng.hpp"
#include "evdiff/data/events.hpp"
#include "evdiff/model/predictor.hpp"

namespace evdiff {

/// Multi-step prediction metrics. Matching is positional: the i-th predicted
/// event is scored against the i-th true event, for times (absolute error)
/// and marks (exact match). Times are in normalized units; divide by the
/// manifest scale for raw units.
struct MetricsReport {
  double mae = 0.0;
  double acc = 0.0;
  Eigen::VectorXd per_step_mae;
  Eigen::VectorXd per_step_acc;
  int n_windows = 0;
};

/// Seed for one window derived from the window content, so metrics are
/// invariant to window order.
inline std::uint64_t window_seed(std::uint64_t root, const PredictionWindow& w) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  auto feed_bytes = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001B3ull;
    }
  };
  feed_bytes(w.history.times.data(), w.history.times.size() * sizeof(double));
  feed_bytes(w.history.marks.data(), w.history.marks.size() * sizeof(int));
  feed_bytes(w.target.times.data(), w.target.times.size() * sizeof(double));
  feed_bytes(w.target.marks.data(), w.target.marks.size() * sizeof(int));
  return derive_seed(root, "eval-window", {h});
}

namespace detail {

/// Accumulates positional metrics of `predict(window)` over all windows.
template <typename PredictFn>
MetricsReport score_windows(std::span<const PredictionWindow> windows,
                            PredictFn&& predict) {
  if (windows.empty()) throw ConfigError("evaluate: empty window set");
  const int Lp = static_cast<int>(windows.front().target.size());
  MetricsReport r;
  r.per_step_mae = Eigen::VectorXd::Zero(Lp);
  r.per_step_acc = Eigen::VectorXd::Zero(Lp);
  for (const auto& w : windows) {
    const EventSequence pred = predict(w);
    for (int j = 0; j < Lp; ++j) {
      r.per_step_mae[j] += std::abs(pred.times[j] - w.target.times[j]);
      r.per_step_acc[j] += pred.marks[j] == w.target.marks[j] ? 1.0 : 0.0;
    }
  }
  r.n_windows = static_cast<int>(windows.size());
  r.per_step_mae /= r.n_windows;
  r.per_step_acc /= r.n_windows;
  r.mae = r.per_step_mae.mean();
  r.acc = r.per_step_acc.mean();
  return r;
}

}  // namespace detail

/// Samples each window once (or S times per the predictor) with a
/// content-derived seed and scores positionally.
template <typename Scalar>
MetricsReport evaluate(const Predictor<Scalar>& predictor,
                       std::span<const PredictionWindow> windows,
                       std::uint64_t root_seed) {
  return detail::score_windows(windows, [&](const PredictionWindow& w) {
    Rng rng(window_seed(root_seed, w));
    return predictor.predict(w, rng);
  });
}

/// Baseline (a): future times extend the history's mean inter-arrival gap;
/// the mark is the history's majority class (ties toward the lowest index).
inline MetricsReport baseline_mean_interval(std::span<const PredictionWindow> windows,
                                            int num_marks) {
  return detail::score_windows(windows, [&](const PredictionWindow& w) {
    const auto& ht = w.history.times;
    const int L = static_cast<int>(ht.size());
    const double gap = L > 1 ? (ht.back() - ht.front()) / (L - 1) : 1.0;
    std::vector<int> counts(num_marks, 0);
    for (const int m : w.history.marks) ++counts[m];
    const int mark = static_cast<int>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
    EventSequence pred;
    for (std::size_t j = 1; j <= w.target.size(); ++j) {
      pred.times.push_back(w.anchor + static_cast<double>(j) * gap);
      pred.marks.push_back(mark);
    }
    return pred;
  });
}

/// Baseline (b): repeat the last history gap and the last history mark.
inline MetricsReport baseline_last_interval(std::span<const PredictionWindow> windows) {
  return detail::score_windows(windows, [&](const PredictionWindow& w) {
    const auto& ht = w.history.times;
    const int L = static_cast<int>(ht.size());
    const double gap = L > 1 ? ht[L - 1] - ht[L - 2] : 1.0;
    EventSequence pred;
    for (std::size_t j = 1; j <= w.target.size(); ++j) {
      pred.times.push_back(w.anchor + static_cast<double>(j) * gap);
      pred.marks.push_back(w.history.marks.back());
    }
    return pred;
  });
}

struct HorizonRow {
  int horizon = 0;
  double mae = 0.0;
  double acc = 0.0;
};

/// Metrics at each requested horizon, from one shared set of full-length
/// samples (so shorter horizons are exact prefixes of the full run).
template <typename Scalar>
std::vector<HorizonRow> horizon_curve(const Predictor<Scalar>& predictor,
                                      std::span<const PredictionWindow> windows,
                                      std::span<const int> steps,
                                      std::uint64_t root_seed) {
  const int Lp = predictor.model->config().target_len;
  for (const int s : steps)
    if (s < 1 || s > Lp)
      throw ConfigError("horizon_curve: step " + std::to_string(s) +
                        " exceeds trained L'=" + std::to_string(Lp));
  const MetricsReport full = evaluate(predictor, windows, root_seed);
  std::vector<HorizonRow> rows;
  for (const int s : steps) {
    HorizonRow r;
    r.horizon = s;
    r.mae = full.per_step_mae.head(s).mean();
    r.acc = full.per_step_acc.head(s).mean();
    rows.push_back(r);
  }
  return rows;
}

}  // namespace evdiff
