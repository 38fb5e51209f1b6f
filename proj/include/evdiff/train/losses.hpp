#pragma once

#include "evdiff/core/rng.hpp"
#include "evdiff/core/tape.hpp"
#include "evdiff/data/events.hpp"
#include "evdiff/diffusion/diffusion.hpp"
#include "evdiff/model/denoiser.hpp"
#include "evdiff/seqmap/mark_map.hpp"
#include "evdiff/seqmap/time_map.hpp"

namespace evdiff {

/// Per-step loss values; total = l1 + l2 + l3 + l4 always holds (l3 and l4
/// are the weighted contributions actually optimized).
struct LossBreakdown {
  double l1 = 0, l2 = 0, l3 = 0, l4 = 0, total = 0;
};

/// The random draws of one training step, frozen so a step can be replayed
/// deterministically (and finite-differenced in tests).
template <typename Scalar>
struct StepNoise {
  int level = 1;             // n ~ Uniform{1..N}
  VecX<Scalar> eps_embed;    // mark-embedding noise, standard normal
  VecX<Scalar> eps_corrupt;  // forward-corruption noise, standard normal
};

template <typename Scalar>
StepNoise<Scalar> draw_step_noise(const DiffusionLayout& layout, int levels, Rng& rng) {
  StepNoise<Scalar> s;
  s.level = rng.uniform_int(1, levels);
  s.eps_embed = gaussian_vector<Scalar>(layout.target_len * layout.embed_dim, rng);
  s.eps_corrupt = gaussian_vector<Scalar>(layout.total(), rng);
  return s;
}

template <typename Scalar>
struct WindowLossNodes {
  int x0 = -1;
  int l1 = -1;
  int l2 = -1;
  int l3 = -1;      // raw ||sqrt(ab_N) x0||^2 node, -1 when weighted out
  int total = -1;   // l1 + l2 + l3_weight * l3
};

/// Builds the per-window objective on the tape:
///   x^0  = [log-intervals ; EMB(marks) + sigma0 * eps]
///   x^n  = sqrt(ab_n) x^0 + sqrt(1-ab_n) eps'
///   l1   = ||x^0 - f(x^n, n | h)||^2          for n > 1
///        = ||f(x^1, 1 | h) - [x_time ; EMB(marks)]||^2 for n = 1
///   l2   = mean cross-entropy of the rounding network on x^0's mark blocks
///   l3   = ab_N ||x^0||^2 (weighted by l3_weight in the total)
/// Gradients flow into the denoiser, the rounding network and the embedding
/// table (through the reparameterized noise, the n=1 target and l3).
template <typename Scalar>
WindowLossNodes<Scalar> build_window_loss(Tape<Scalar>& tape,
                                          const ParameterStore<Scalar>& store,
                                          const Denoiser<Scalar>& model,
                                          const PredictionWindow& window,
                                          const StepNoise<Scalar>& noise,
                                          double sigma0, const NoiseSchedule& sched,
                                          double l3_weight) {
  const auto& cfg = model.config();
  const DiffusionLayout layout = cfg.layout();
  const int Lp = cfg.target_len;
  const int d = cfg.embed_dim;
  if (static_cast<int>(window.target.size()) != Lp)
    throw ContractError("build_window_loss: target length != L'");

  const Eigen::VectorXd x_time_d =
      time_forward(window.target.times, window.anchor);
  const int x_time = tape.constant(x_time_d.cast<Scalar>(), Lp, 1);

  const int phi = tape.param(store, kMarkTableName);
  const int emb_rows = tape.gather_rows(phi, window.target.marks);
  const int x_mark =
      sigma0 != 0.0
          ? tape.axpy(Scalar(1), emb_rows, static_cast<Scalar>(sigma0),
                      tape.constant(noise.eps_embed, Lp, d))
          : emb_rows;
  const int parts_x0[2] = {x_time, x_mark};
  WindowLossNodes<Scalar> out;
  out.x0 = tape.concat_cols(parts_x0);

  const int n = noise.level;
  const double ab = sched.alpha_bar_at(n);
  const int xn = tape.axpy(static_cast<Scalar>(std::sqrt(ab)), out.x0,
                           static_cast<Scalar>(std::sqrt(1.0 - ab)),
                           tape.constant(noise.eps_corrupt, Lp, cfg.event_width()));

  const int h = model.encode_history(tape, store, window.history);
  const int x0_hat = model.forward(tape, store, xn, n, h);

  if (n > 1) {
    out.l1 = tape.sum_squares(tape.sub(out.x0, x0_hat));
  } else {
    const int parts_t[2] = {x_time, emb_rows};
    const int target = tape.concat_cols(parts_t);
    out.l1 = tape.sum_squares(tape.sub(x0_hat, target));
  }

  out.l2 = tape.softmax_cross_entropy_rows(
      rounding_logits(tape, store, tape.slice_cols(out.x0, 1, d)),
      window.target.marks);

  int total = tape.add(out.l1, out.l2);
  if (l3_weight != 0.0) {
    out.l3 = tape.scale(tape.sum_squares(out.x0),
                        static_cast<Scalar>(sched.alpha_bar_at(sched.levels)));
    total = tape.add(total, tape.scale(out.l3, static_cast<Scalar>(l3_weight)));
  }
  out.total = total;
  return out;
}

/// Reported value of the weight-decay term: 0.5 * wd * sum ||w||^2 over the
/// decayed tensors. The optimizer applies the matching decoupled update.
template <typename Scalar>
double weight_decay_loss(const ParameterStore<Scalar>& store, double weight_decay) {
  if (weight_decay == 0.0) return 0.0;
  double acc = 0.0;
  for (const auto& [name, p] : store)
    if (p.trainable && p.decay)
      acc += p.value.data.template cast<double>().squaredNorm();
  return 0.5 * weight_decay * acc;
}

}  // namespace evdiff
