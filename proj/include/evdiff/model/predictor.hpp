#pragma once

#include <algorithm>
#include <vector>

#include "evdiff/diffusion/diffusion.hpp"
#include "evdiff/model/denoiser.hpp"
#include "evdiff/seqmap/mark_map.hpp"
#include "evdiff/seqmap/time_map.hpp"

namespace evdiff {

/// Samples whole future sequences: draws x^N ~ N(0,I), runs the reverse loop
/// with the trained denoiser (clamping mark blocks for n <= clamp_start),
/// then reconstructs times via the inverse interval map and marks via the
/// rounding network's argmax.
template <typename Scalar>
struct Predictor {
  const Denoiser<Scalar>* model = nullptr;
  const ParameterStore<Scalar>* store = nullptr;
  const NoiseSchedule* schedule = nullptr;
  int clamp_start = 0;    // clamp applies for n <= clamp_start
  int num_samples = 1;    // S-sample aggregation: mean times, majority marks

  EventSequence predict(const PredictionWindow& window, Rng& rng) const {
    const VecX<Scalar> h = model->encode_history_value(*store, window.history);
    if (num_samples <= 1) return predict_once(h, window.anchor, rng);

    const auto& cfg = model->config();
    const int Lp = cfg.target_len;
    std::vector<EventSequence> draws;
    draws.reserve(num_samples);
    for (int s = 0; s < num_samples; ++s)
      draws.push_back(predict_once(h, window.anchor, rng));
    EventSequence out;
    out.times.assign(Lp, 0.0);
    out.marks.assign(Lp, 0);
    for (int j = 0; j < Lp; ++j) {
      std::vector<int> votes(cfg.num_marks, 0);
      for (const auto& dr : draws) {
        out.times[j] += dr.times[j] / num_samples;
        ++votes[dr.marks[j]];
      }
      out.marks[j] = static_cast<int>(
          std::max_element(votes.begin(), votes.end()) - votes.begin());
    }
    // Averaging can in principle collapse an interval; keep strict order.
    for (int j = 1; j < Lp; ++j)
      if (out.times[j] <= out.times[j - 1])
        out.times[j] = std::nextafter(out.times[j - 1], 1e300);
    return out;
  }

  EventSequence predict_once(const VecX<Scalar>& h, double anchor, Rng& rng) const {
    const auto& cfg = model->config();
    const DiffusionLayout layout = cfg.layout();
    const Tensor<Scalar>& table = store->at(kMarkTableName);

    std::function<VecX<Scalar>(const VecX<Scalar>&, int)> denoise_fn =
        [&](const VecX<Scalar>& xn, int n) {
          return model->forward_value(*store, xn, n, h);
        };
    std::function<void(VecX<Scalar>&)> clamp_fn = [&](VecX<Scalar>& x0_hat) {
      clamp_mark_blocks(x0_hat, layout, table);
    };
    const VecX<Scalar> x0 = reverse_loop<Scalar>(layout.total(), denoise_fn, clamp_fn,
                                                 clamp_start, *schedule, rng);

    Eigen::VectorXd x_time(layout.target_len);
    VecX<Scalar> x_mark(layout.target_len * layout.embed_dim);
    for (int j = 0; j < layout.target_len; ++j) {
      x_time[j] = static_cast<double>(x0[layout.time_index(j)]);
      x_mark.segment(static_cast<Eigen::Index>(j) * layout.embed_dim,
                     layout.embed_dim) =
          x0.segment(layout.mark_offset(j), layout.embed_dim);
    }
    EventSequence out;
    out.times = time_inverse(x_time, anchor);
    out.marks = mark_round_argmax(*store, x_mark, layout.embed_dim);
    return out;
  }
};

}  // namespace evdiff
