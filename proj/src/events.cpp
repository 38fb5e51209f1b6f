#include "evdiff/data/events.hpp"

#include <algorithm>
#include <cmath>

#include "evdiff/core/rng.hpp"

namespace evdiff {

void EventSequence::validate(int num_marks, const std::string& context) const {
  if (marks.size() != times.size())
    throw ValidationError(context + ": marks/times length mismatch");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]))
      throw ValidationError(context + ": non-finite time at index " + std::to_string(i));
    if (times[i] <= 0.0)
      throw ValidationError(context + ": non-positive time at index " + std::to_string(i));
    if (i > 0 && times[i] <= times[i - 1])
      throw ValidationError(context + ": non-increasing at index " + std::to_string(i));
    if (marks[i] < 0 || (num_marks > 0 && marks[i] >= num_marks))
      throw ValidationError(context + ": mark " + std::to_string(marks[i]) +
                            " out of range at index " + std::to_string(i));
  }
}

std::vector<PredictionWindow> make_windows(const EventSequence& seq, int history_len,
                                           int target_len, int stride) {
  if (history_len < 1 || target_len < 1 || stride < 1)
    throw ConfigError("make_windows: L, L' and stride must be >= 1");
  std::vector<PredictionWindow> out;
  const int total = history_len + target_len;
  const int n = static_cast<int>(seq.size());
  for (int off = 0; off + total <= n; off += stride) {
    PredictionWindow w;
    w.history.marks.assign(seq.marks.begin() + off, seq.marks.begin() + off + history_len);
    w.history.times.assign(seq.times.begin() + off, seq.times.begin() + off + history_len);
    w.target.marks.assign(seq.marks.begin() + off + history_len,
                          seq.marks.begin() + off + total);
    w.target.times.assign(seq.times.begin() + off + history_len,
                          seq.times.begin() + off + total);
    w.anchor = w.history.times.back();
    out.push_back(std::move(w));
  }
  return out;
}

double normalize_times(std::vector<EventSequence>& corpus) {
  double t_max = 0.0;
  for (const auto& s : corpus)
    if (!s.empty()) t_max = std::max(t_max, s.times.back());
  if (corpus.empty() || t_max <= 0.0)
    throw ValidationError("normalize_times: empty corpus or max time <= 0");
  const double scale = 100.0 / t_max;
  for (auto& s : corpus)
    for (auto& t : s.times) t = (t == t_max) ? 100.0 : t * scale;
  return scale;
}

SplitIndices split_sequences(int n, std::uint64_t seed, double train_frac,
                             double val_frac) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "split"));
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(0, i)]);
  const int n_train = static_cast<int>(std::floor(n * train_frac));
  const int n_val = static_cast<int>(std::floor(n * val_frac));
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test.assign(order.begin() + n_train + n_val, order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace evdiff
