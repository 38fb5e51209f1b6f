#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "evdiff/core/gru.hpp"
#include "evdiff/core/params.hpp"
#include "evdiff/core/rng.hpp"
#include "evdiff/core/tape.hpp"
#include "evdiff/data/events.hpp"
#include "evdiff/seqmap/mark_map.hpp"

namespace evdiff {

enum class DecoderKind { Gru, Feedforward };

/// Sizes and wiring of the denoising network. Hidden states, embeddings and
/// conv channels all share the width d.
struct DenoiserConfig {
  int num_marks = 0;    // K
  int history_len = 0;  // L
  int target_len = 0;   // L'
  int embed_dim = 0;    // d, must be even (sinusoidal codes come in pairs)
  int n_blocks = 1;     // residual blocks; 0 drops the conv stack entirely
  int kernel = 3;
  std::vector<int> dilations;  // one per block; default 2^i
  int levels = 0;              // N, for step-embedding range checks
  DecoderKind decoder = DecoderKind::Gru;
  int rounding_hidden = 0;  // defaults to d
  int skip_hidden = 0;      // skip-aggregation MLP hidden width; defaults to 2d
  int fuse_hidden = 0;      // output MLP hidden width; defaults to 2d

  void finalize() {
    if (dilations.empty())
      for (int i = 0; i < n_blocks; ++i) dilations.push_back(1 << i);
    if (rounding_hidden == 0) rounding_hidden = embed_dim;
    if (skip_hidden == 0) skip_hidden = 2 * embed_dim;
    if (fuse_hidden == 0) fuse_hidden = 2 * embed_dim;
  }

  void validate() const {
    if (num_marks < 1) throw ConfigError("denoiser: K must be >= 1");
    if (history_len < 1 || target_len < 1)
      throw ConfigError("denoiser: L and L' must be >= 1");
    if (embed_dim < 2 || embed_dim % 2 != 0)
      throw ConfigError("denoiser: embedding width must be even and >= 2");
    if (n_blocks < 0) throw ConfigError("denoiser: n_blocks must be >= 0");
    if (kernel < 1 || kernel % 2 == 0)
      throw ConfigError("denoiser: kernel width must be odd");
    if (static_cast<int>(dilations.size()) != n_blocks)
      throw ConfigError("denoiser: dilation plan length must equal n_blocks");
    for (const int dil : dilations)
      if (dil < 1) throw ConfigError("denoiser: dilations must be >= 1");
    if (levels < 1) throw ConfigError("denoiser: N must be >= 1");
  }

  DiffusionLayout layout() const { return DiffusionLayout{target_len, embed_dim}; }
  int event_width() const { return embed_dim + 1; }
};

/// The trainable network f(x^n, n | h): a history encoder (event embedding +
/// GRU) and a denoising decoder (GRU seeded with the history embedding, a
/// gated dilated-conv residual stack conditioned on the diffusion step, and
/// a fusion head that emits the x^0 estimate).
template <typename Scalar>
class Denoiser {
 public:
  explicit Denoiser(DenoiserConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.finalize();
    cfg_.validate();
  }

  const DenoiserConfig& config() const { return cfg_; }

  void create_params(ParameterStore<Scalar>& store, Rng& rng) const {
    const int d = cfg_.embed_dim;
    const int K = cfg_.num_marks;
    // History encoder: mark table, time2vec, GRU over [mark; time] pairs.
    auto& enc_emb = store.create("enc.emb", {K, d});
    const double es = 1.0 / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < enc_emb.numel(); ++i)
      enc_emb.data[i] = static_cast<Scalar>(rng.normal() * es);
    auto& omega = store.create("enc.time.omega", {d});
    for (int i = 0; i < d; ++i) omega.data[i] = static_cast<Scalar>(rng.normal());
    auto& phase = store.create("enc.time.phase", {d}, true, /*decay=*/false);
    for (int i = 0; i < d; ++i) phase.data[i] = static_cast<Scalar>(rng.normal());
    gru_create_params(store, "enc.gru", 2 * d, d);
    gru_init(store, "enc.gru", 2 * d, d, rng);

    // Diffusion-step embedding MLP over the sinusoidal code.
    init_uniform_fanin(store.create("step.U1", {d, d}), d, rng);
    store.create("step.c1", {d}, true, false);
    init_uniform_fanin(store.create("step.U2", {d, d}), d, rng);
    store.create("step.c2", {d}, true, false);

    // Decoder sequential layer.
    if (cfg_.decoder == DecoderKind::Gru) {
      gru_create_params(store, "dec.gru", d + 1, d);
      gru_init(store, "dec.gru", d + 1, d, rng);
    } else {
      init_uniform_fanin(store.create("dec.ff.W", {d, (d + 1) + d}), (d + 1) + d, rng);
      store.create("dec.ff.b", {d}, true, false);
    }

    // Residual stack.
    if (cfg_.n_blocks > 0) {
      init_uniform_fanin(store.create("dec.inproj.W", {d, d + 1}), d + 1, rng);
      store.create("dec.inproj.b", {d}, true, false);
      for (int b = 0; b < cfg_.n_blocks; ++b) {
        const std::string p = block_prefix(b);
        init_uniform_fanin(store.create(p + ".conv", {2 * d, d * cfg_.kernel}),
                           d * cfg_.kernel, rng);
        init_uniform_fanin(store.create(p + ".cond.W", {2 * d, d}), d, rng);
        init_uniform_fanin(store.create(p + ".out.W", {d, d}), d, rng);
        store.create(p + ".out.b", {d}, true, false);
        init_uniform_fanin(store.create(p + ".skip.W", {d, d}), d, rng);
        store.create(p + ".skip.b", {d}, true, false);
      }
      init_uniform_fanin(store.create("dec.skip.W1", {cfg_.skip_hidden, cfg_.n_blocks * d}),
                         cfg_.n_blocks * d, rng);
      store.create("dec.skip.b1", {cfg_.skip_hidden}, true, false);
      init_uniform_fanin(store.create("dec.skip.W2", {d, cfg_.skip_hidden}),
                         cfg_.skip_hidden, rng);
      store.create("dec.skip.b2", {d}, true, false);
    }

    // Fusion head. Without the conv stack the step embedding joins the
    // per-event features directly so the network still sees the level.
    const int fuse_in = cfg_.n_blocks > 0 ? d + (d + 1) + d : (d + 1) + d + d;
    init_uniform_fanin(store.create("dec.fuse.W1", {cfg_.fuse_hidden, fuse_in}),
                       fuse_in, rng);
    store.create("dec.fuse.b1", {cfg_.fuse_hidden}, true, false);
    init_uniform_fanin(store.create("dec.fuse.W2", {d + 1, cfg_.fuse_hidden}),
                       cfg_.fuse_hidden, rng);
    store.create("dec.fuse.b2", {d + 1}, true, false);
  }

  /// [mark embedding; cos(omega t + phase)] for one event.
  int embed_event(Tape<Scalar>& tape, const ParameterStore<Scalar>& store, int mark,
                  double t) const {
    if (mark < 0 || mark >= cfg_.num_marks)
      throw IndexError("embed_event: mark out of range");
    const int idx[1] = {mark};
    const int row = tape.gather_rows(tape.param(store, "enc.emb"), idx);
    const int tv = tape.time_cos(tape.param(store, "enc.time.omega"),
                                 tape.param(store, "enc.time.phase"),
                                 static_cast<Scalar>(t));
    const int parts[2] = {row, tv};
    return tape.concat(parts);
  }

  /// GRU over the embedded history events in temporal order; returns the
  /// final hidden state.
  int encode_history(Tape<Scalar>& tape, const ParameterStore<Scalar>& store,
                     const EventSequence& history) const {
    if (static_cast<int>(history.size()) != cfg_.history_len)
      throw ContractError("encode_history: history length " +
                          std::to_string(history.size()) + " != L=" +
                          std::to_string(cfg_.history_len));
    const int d = cfg_.embed_dim;
    const int emb = tape.param(store, "enc.emb");
    const int omega = tape.param(store, "enc.time.omega");
    const int phase = tape.param(store, "enc.time.phase");
    const int rows = tape.gather_rows(emb, history.marks);
    const GruRefs gru = gru_lease(tape, store, "enc.gru");
    int h = tape.constant(VecX<Scalar>::Zero(d));
    for (int i = 0; i < cfg_.history_len; ++i) {
      const int mark_i = tape.slice(rows, i * d, d);
      const int time_i = tape.time_cos(omega, phase, static_cast<Scalar>(history.times[i]));
      const int parts[2] = {mark_i, time_i};
      const int e = tape.concat(parts);
      h = gru_cell(tape, gru, e, h);
    }
    return h;
  }

  /// Sinusoidal code of level n through the two-layer SiLU MLP.
  int step_embedding(Tape<Scalar>& tape, const ParameterStore<Scalar>& store,
                     int n) const {
    if (n < 0 || n > cfg_.levels)
      throw IndexError("step_embedding: level out of [0,N]");
    const int p = tape.constant(sinusoidal_code(n));
    const int hidden = tape.silu(tape.linear(p, tape.param(store, "step.U1"),
                                             tape.param(store, "step.c1")));
    return tape.linear(hidden, tape.param(store, "step.U2"),
                       tape.param(store, "step.c2"));
  }

  VecX<Scalar> sinusoidal_code(int n) const {
    const int d = cfg_.embed_dim;
    VecX<Scalar> p(d);
    for (int i = 0; i < d / 2; ++i) {
      const double freq = std::pow(10000.0, -2.0 * i / d);
      p[2 * i] = static_cast<Scalar>(std::sin(n * freq));
      p[2 * i + 1] = static_cast<Scalar>(std::cos(n * freq));
    }
    return p;
  }

  /// One gated residual block: dilated conv over (x_in + v), conditioned on
  /// the sequential feature through a 1x1 conv, tanh*sigmoid gate on the
  /// split channels, residual pass-through and skip projections.
  std::pair<int, int> residual_block(Tape<Scalar>& tape,
                                     const ParameterStore<Scalar>& store, int index,
                                     int x_in, int g, int v) const {
    const int d = cfg_.embed_dim;
    const std::string p = block_prefix(index);
    const int xi = tape.add_row_broadcast(x_in, v);
    int y = tape.conv1d(xi, tape.param(store, p + ".conv"), cfg_.kernel,
                        cfg_.dilations[index]);
    y = tape.add(y, tape.row_linear(g, tape.param(store, p + ".cond.W")));
    const int gate = tape.mul(tape.tanh(tape.slice_cols(y, 0, d)),
                              tape.sigmoid(tape.slice_cols(y, d, d)));
    const int pass = tape.add(
        x_in, tape.row_linear(gate, tape.param(store, p + ".out.W"),
                              tape.param(store, p + ".out.b")));
    const int skip = tape.row_linear(gate, tape.param(store, p + ".skip.W"),
                                     tape.param(store, p + ".skip.b"));
    return {pass, skip};
  }

  /// Full decoder: x^n (as an [L', d+1] node) and the history embedding h
  /// yield the x^0 estimate with the same layout.
  int forward(Tape<Scalar>& tape, const ParameterStore<Scalar>& store, int xn, int n,
              int h) const {
    const int d = cfg_.embed_dim;
    const int w = cfg_.event_width();
    const int Lp = cfg_.target_len;
    if (tape.rows(xn) != Lp || tape.cols(xn) != w)
      throw DimensionError("denoiser forward: x^n node must be [L', d+1]");

    // Sequential feature g: decoder GRU seeded with h (or the per-event
    // feedforward variant, which sees h by concatenation).
    std::vector<int> g_parts;
    g_parts.reserve(Lp);
    if (cfg_.decoder == DecoderKind::Gru) {
      const GruRefs gru = gru_lease(tape, store, "dec.gru");
      int state = h;
      for (int j = 0; j < Lp; ++j) {
        const int xj = tape.slice(xn, j * w, w);
        state = gru_cell(tape, gru, xj, state);
        g_parts.push_back(state);
      }
    } else {
      const int W = tape.param(store, "dec.ff.W");
      const int b = tape.param(store, "dec.ff.b");
      for (int j = 0; j < Lp; ++j) {
        const int xj = tape.slice(xn, j * w, w);
        const int parts[2] = {xj, h};
        g_parts.push_back(tape.tanh(tape.linear(tape.concat(parts), W, b)));
      }
    }
    const int g = tape.reshape(tape.concat(g_parts), Lp, d);

    const int v = step_embedding(tape, store, n);

    int fuse_in;
    if (cfg_.n_blocks > 0) {
      int x = tape.row_linear(xn, tape.param(store, "dec.inproj.W"),
                              tape.param(store, "dec.inproj.b"));
      std::vector<int> skips;
      skips.reserve(cfg_.n_blocks);
      for (int b = 0; b < cfg_.n_blocks; ++b) {
        auto [pass, skip] = residual_block(tape, store, b, x, g, v);
        x = pass;
        skips.push_back(skip);
      }
      const int ctx_in = tape.concat_cols(skips);
      const int ctx = tape.row_linear(
          tape.silu(tape.row_linear(ctx_in, tape.param(store, "dec.skip.W1"),
                                    tape.param(store, "dec.skip.b1"))),
          tape.param(store, "dec.skip.W2"), tape.param(store, "dec.skip.b2"));
      const int parts[3] = {ctx, xn, g};
      fuse_in = tape.concat_cols(parts);
    } else {
      const int vmat = tape.add_row_broadcast(
          tape.constant(VecX<Scalar>::Zero(Lp * d), Lp, d), v);
      const int parts[3] = {xn, g, vmat};
      fuse_in = tape.concat_cols(parts);
    }
    const int hidden = tape.silu(tape.row_linear(fuse_in, tape.param(store, "dec.fuse.W1"),
                                                 tape.param(store, "dec.fuse.b1")));
    return tape.row_linear(hidden, tape.param(store, "dec.fuse.W2"),
                           tape.param(store, "dec.fuse.b2"));
  }

  /// Forward-only history encoding to a plain vector (computed once per
  /// window, then reused across all reverse steps).
  VecX<Scalar> encode_history_value(const ParameterStore<Scalar>& store,
                                    const EventSequence& history) const {
    Tape<Scalar> tape(/*grads_enabled=*/false);
    return tape.value(encode_history(tape, store, history));
  }

  /// Forward-only x^0 estimate for sampling.
  VecX<Scalar> forward_value(const ParameterStore<Scalar>& store,
                             const VecX<Scalar>& xn, int n,
                             const VecX<Scalar>& h) const {
    Tape<Scalar> tape(/*grads_enabled=*/false);
    const int xn_node = tape.constant(xn, cfg_.target_len, cfg_.event_width());
    const int h_node = tape.constant(h);
    return tape.value(forward(tape, store, xn_node, n, h_node));
  }

 private:
  static std::string block_prefix(int index) {
    return "dec.res.b" + std::to_string(index);
  }

  DenoiserConfig cfg_;
};

/// Creates every trainable tensor of the model in a fixed order: the
/// diffusion-side mark table, the rounding network, then the denoiser.
template <typename Scalar>
void create_model_params(ParameterStore<Scalar>& store, const Denoiser<Scalar>& model,
                         Rng& rng) {
  const auto& cfg = model.config();
  create_mark_table(store, cfg.num_marks, cfg.embed_dim, rng);
  create_rounding_params(store, cfg.num_marks, cfg.embed_dim, cfg.rounding_hidden, rng);
  model.create_params(store, rng);
}

}  // namespace evdiff
