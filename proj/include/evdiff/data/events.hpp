#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evdiff/core/errors.hpp"

namespace evdiff {

/// A marked event sequence: categorical marks in [0, K) and strictly
/// increasing positive arrival times. The unit of all ingestion and
/// prediction.
struct EventSequence {
  std::vector<int> marks;
  std::vector<double> times;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }

  /// Enforces the data model; `context` names the sequence in errors.
  void validate(int num_marks, const std::string& context) const;
};

/// One supervised example: L history events, L' target events, and the
/// anchor time (last history arrival) the time transform is conditioned on.
struct PredictionWindow {
  EventSequence history;
  EventSequence target;
  double anchor = 0.0;
};

/// Sliding windows at offsets 0, stride, 2*stride, ... while L+L' events
/// remain. A sequence shorter than L+L' yields no windows.
std::vector<PredictionWindow> make_windows(const EventSequence& seq, int history_len,
                                           int target_len, int stride);

/// Rescales every time in the corpus by 100 / T_max so the corpus maximum
/// lands exactly on 100. Returns the applied scale (100 / T_max).
double normalize_times(std::vector<EventSequence>& corpus);

struct SplitIndices {
  std::vector<int> train, val, test;
};

/// Seeded shuffle split by whole sequence (fractions of the corpus;
/// remainder goes to test).
SplitIndices split_sequences(int n, std::uint64_t seed, double train_frac = 0.6,
                             double val_frac = 0.2);

}  // namespace evdiff
