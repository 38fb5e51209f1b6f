#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <span>
#include <vector>

#include "evdiff/eval/metrics.hpp"
#include "evdiff/model/predictor.hpp"
#include "evdiff/train/losses.hpp"
#include "evdiff/train/optimizer.hpp"

namespace evdiff {

struct TrainSettings {
  int epochs = 50;
  int batch_size = 64;
  int patience = 10;
  double lr0 = 1e-3;
  double lr_decay = 0.98;  // lr_t = lr0 * decay^epoch
  double weight_decay = 0.01;
  double sigma0 = 0.1;
  double l3_weight = 1.0;
  int clamp_start = 0;
  int val_max_windows = 64;
  int eval_samples = 1;
  std::uint64_t seed = 1;
  bool verbose = true;
  int max_steps = 0;  // 0 = unlimited; otherwise stop after this many updates
};

struct EpochLog {
  int epoch = 0;
  double lr = 0, l1 = 0, l2 = 0, l3 = 0, l4 = 0;
  double val_mae = 0, val_acc = 0;
};

struct TrainOutcome {
  int best_epoch = -1;
  double best_val_mae = 0, best_val_acc = 0;
  std::vector<EpochLog> log;
  int aborted_steps = 0;
  int steps_done = 0;
};

/// One optimizer update over a batch of windows. Draws per-window diffusion
/// levels and noise from streams keyed by (epoch, batch, slot), builds the
/// mean objective on one tape, backpropagates and steps. A non-finite value
/// anywhere aborts before the optimizer is touched.
template <typename Scalar>
LossBreakdown train_step(const Denoiser<Scalar>& model, ParameterStore<Scalar>& store,
                         AdamW<Scalar>& opt, const NoiseSchedule& sched,
                         std::span<const PredictionWindow> batch,
                         const TrainSettings& ts, int epoch, int batch_index,
                         double lr) {
  Tape<Scalar> tape;
  const DiffusionLayout layout = model.config().layout();
  std::vector<int> totals;
  totals.reserve(batch.size());
  LossBreakdown sum;
  for (std::size_t slot = 0; slot < batch.size(); ++slot) {
    Rng rng(derive_seed(ts.seed, "train",
                        {static_cast<std::uint64_t>(epoch),
                         static_cast<std::uint64_t>(batch_index),
                         static_cast<std::uint64_t>(slot)}));
    const StepNoise<Scalar> noise =
        draw_step_noise<Scalar>(layout, sched.levels, rng);
    const auto nodes = build_window_loss(tape, store, model, batch[slot], noise,
                                         ts.sigma0, sched, ts.l3_weight);
    totals.push_back(nodes.total);
    sum.l1 += tape.scalar_value(nodes.l1);
    sum.l2 += tape.scalar_value(nodes.l2);
    if (nodes.l3 >= 0) sum.l3 += ts.l3_weight * tape.scalar_value(nodes.l3);
  }
  const int batch_loss = tape.mean_n(totals);
  tape.backward(batch_loss);
  GradientBuffer<Scalar> grads(store);
  tape.accumulate_param_grads(store, grads);

  const double inv = 1.0 / static_cast<double>(batch.size());
  LossBreakdown out;
  out.l1 = sum.l1 * inv;
  out.l2 = sum.l2 * inv;
  out.l3 = sum.l3 * inv;
  out.l4 = weight_decay_loss(store, ts.weight_decay);
  out.total = out.l1 + out.l2 + out.l3 + out.l4;

  opt.step(store, grads, lr);
  return out;
}

/// Epochs of shuffled mini-batches with exponential learning-rate decay,
/// per-epoch validation (fixed seed, capped window count), best-checkpoint
/// retention in memory and early stopping on patience.
template <typename Scalar>
TrainOutcome train_loop(const Denoiser<Scalar>& model, ParameterStore<Scalar>& store,
                        AdamW<Scalar>& opt, const NoiseSchedule& sched,
                        std::span<const PredictionWindow> train_windows,
                        std::span<const PredictionWindow> val_windows,
                        const TrainSettings& ts,
                        ParameterStore<Scalar>* best_params_out,
                        int start_epoch = 0) {
  if (train_windows.empty()) throw ConfigError("train_loop: empty training split");
  if (val_windows.empty()) throw ConfigError("train_loop: empty validation split");

  std::vector<PredictionWindow> val_subset(
      val_windows.begin(),
      val_windows.begin() +
          std::min<std::size_t>(val_windows.size(),
                                static_cast<std::size_t>(ts.val_max_windows)));

  Predictor<Scalar> predictor{&model, &store, &sched, ts.clamp_start, ts.eval_samples};

  TrainOutcome outcome;
  double best_score = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<int> order(train_windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = start_epoch; epoch < start_epoch + ts.epochs; ++epoch) {
    const double lr = ts.lr0 * std::pow(ts.lr_decay, epoch);
    Rng shuffle_rng(derive_seed(ts.seed, "shuffle", {static_cast<std::uint64_t>(epoch)}));
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    int n_batches = 0;
    bool hit_step_cap = false;
    for (std::size_t off = 0; off < order.size(); off += ts.batch_size) {
      const std::size_t end = std::min(order.size(), off + ts.batch_size);
      std::vector<PredictionWindow> batch;
      batch.reserve(end - off);
      for (std::size_t i = off; i < end; ++i)
        batch.push_back(train_windows[order[i]]);
      try {
        const LossBreakdown lb =
            train_step(model, store, opt, sched, batch, ts, epoch, n_batches, lr);
        log.l1 += lb.l1;
        log.l2 += lb.l2;
        log.l3 += lb.l3;
        log.l4 = lb.l4;
        ++outcome.steps_done;
      } catch (const NumericError& e) {
        ++outcome.aborted_steps;
        std::cerr << "[train] step aborted (epoch " << epoch << ", batch "
                  << n_batches << "): " << e.what() << "\n";
        if (outcome.aborted_steps > 3)
          throw Error(std::string("training diverged: ") + e.what());
      }
      ++n_batches;
      if (ts.max_steps > 0 && outcome.steps_done >= ts.max_steps) {
        hit_step_cap = true;
        break;
      }
    }
    log.l1 /= n_batches;
    log.l2 /= n_batches;
    log.l3 /= n_batches;

    const MetricsReport val =
        evaluate(predictor, val_subset, derive_seed(ts.seed, "val"));
    log.val_mae = val.mae;
    log.val_acc = val.acc;
    outcome.log.push_back(log);
    if (ts.verbose)
      std::cerr << "[train] epoch " << epoch << " lr " << lr << " l1 " << log.l1
                << " l2 " << log.l2 << " l3 " << log.l3 << " l4 " << log.l4
                << " val_mae " << val.mae << " val_acc " << val.acc << "\n";

    const double score = val.mae + (1.0 - val.acc);
    if (score < best_score) {
      best_score = score;
      outcome.best_epoch = epoch;
      outcome.best_val_mae = val.mae;
      outcome.best_val_acc = val.acc;
      since_best = 0;
      if (best_params_out) *best_params_out = store;
    } else {
      ++since_best;
    }
    if (since_best >= ts.patience || hit_step_cap) break;
  }
  return outcome;
}

}  // namespace evdiff
