#pragma once

#include <span>
#include <string>
#include <vector>

#include "evdiff/core/gru.hpp"
#include "evdiff/core/params.hpp"
#include "evdiff/core/rng.hpp"
#include "evdiff/core/tape.hpp"
#include "evdiff/core/tensor.hpp"

namespace evdiff {

/// Layout of the Euclidean image of a target sequence: per-event blocks
/// [time; mark_1..mark_d], flattened row-major, total length L'*(d+1).
struct DiffusionLayout {
  int target_len = 0;  // L'
  int embed_dim = 0;   // d

  int event_width() const { return embed_dim + 1; }
  int total() const { return target_len * event_width(); }
  int time_index(int event) const { return event * event_width(); }
  int mark_offset(int event) const { return event * event_width() + 1; }
};

inline const std::string kMarkTableName = "phi.emb";

/// Creates the diffusion-side mark embedding table (K x d), rows drawn from
/// N(0, 1/d).
template <typename Scalar>
void create_mark_table(ParameterStore<Scalar>& store, int num_marks, int embed_dim,
                       Rng& rng) {
  auto& t = store.create(kMarkTableName, {num_marks, embed_dim});
  const double s = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  for (int i = 0; i < t.numel(); ++i)
    t.data[i] = static_cast<Scalar>(rng.normal() * s);
}

/// Data-space mark embedding: table rows plus Gaussian noise of scale
/// sigma0 (standard deviation). Deterministic given the generator state.
template <typename Scalar>
VecX<Scalar> mark_embed(std::span<const int> marks, const Tensor<Scalar>& table,
                        double sigma0, Rng& rng) {
  const int d = table.cols();
  const int K = table.rows();
  VecX<Scalar> out(static_cast<Eigen::Index>(marks.size()) * d);
  auto T = table.mat();
  for (std::size_t j = 0; j < marks.size(); ++j) {
    if (marks[j] < 0 || marks[j] >= K)
      throw IndexError("mark_embed: mark " + std::to_string(marks[j]) + " out of [0," +
                       std::to_string(K) + ")");
    out.segment(static_cast<Eigen::Index>(j) * d, d) = T.row(marks[j]).transpose();
  }
  if (sigma0 != 0.0)
    for (Eigen::Index i = 0; i < out.size(); ++i)
      out[i] += static_cast<Scalar>(sigma0 * rng.normal());
  return out;
}

/// Replaces each event's mark block with the Euclidean-nearest table row;
/// ties break toward the lowest mark index. Returns the chosen indices.
template <typename Scalar>
std::vector<int> clamp_marks(Eigen::Ref<VecX<Scalar>> x_mark,
                             const Tensor<Scalar>& table) {
  const int d = table.cols();
  const int n_events = static_cast<int>(x_mark.size()) / d;
  auto T = table.mat();
  std::vector<int> chosen(n_events);
  for (int j = 0; j < n_events; ++j) {
    auto block = x_mark.segment(static_cast<Eigen::Index>(j) * d, d);
    int best = 0;
    Scalar best_d2 = (T.row(0).transpose() - block).squaredNorm();
    for (int k = 1; k < table.rows(); ++k) {
      const Scalar d2 = (T.row(k).transpose() - block).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = k;
      }
    }
    block = T.row(best).transpose();
    chosen[j] = best;
  }
  return chosen;
}

/// Clamps only the mark blocks of a full diffusion vector in place.
template <typename Scalar>
void clamp_mark_blocks(VecX<Scalar>& x0, const DiffusionLayout& layout,
                       const Tensor<Scalar>& table) {
  for (int j = 0; j < layout.target_len; ++j) {
    auto block = x0.segment(layout.mark_offset(j), layout.embed_dim);
    auto T = table.mat();
    int best = 0;
    Scalar best_d2 = (T.row(0).transpose() - block).squaredNorm();
    for (int k = 1; k < table.rows(); ++k) {
      const Scalar d2 = (T.row(k).transpose() - block).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = k;
      }
    }
    block = T.row(best).transpose();
  }
}

// ---- rounding network ------------------------------------------------------
//
// Two affine layers with a GELU between and a softmax on top; maps a mark
// block back to a categorical distribution over marks.

template <typename Scalar>
void create_rounding_params(ParameterStore<Scalar>& store, int num_marks,
                            int embed_dim, int hidden, Rng& rng) {
  init_uniform_fanin(store.create("round.W1", {hidden, embed_dim}), embed_dim, rng);
  store.create("round.b1", {hidden}, true, /*decay=*/false);
  init_uniform_fanin(store.create("round.W2", {num_marks, hidden}), hidden, rng);
  store.create("round.b2", {num_marks}, true, /*decay=*/false);
}

/// Tape builder: logits [n_events, K] from mark blocks [n_events, d].
template <typename Scalar>
int rounding_logits(Tape<Scalar>& tape, const ParameterStore<Scalar>& store,
                    int mark_blocks) {
  const int h = tape.row_linear(mark_blocks, tape.param(store, "round.W1"),
                                tape.param(store, "round.b1"));
  return tape.row_linear(tape.gelu(h), tape.param(store, "round.W2"),
                         tape.param(store, "round.b2"));
}

/// Per-event categorical distribution (rows on the probability simplex).
template <typename Scalar>
int mark_round(Tape<Scalar>& tape, const ParameterStore<Scalar>& store,
               int mark_blocks) {
  return tape.softmax_rows(rounding_logits(tape, store, mark_blocks));
}

/// Data-space argmax prediction through the rounding network.
template <typename Scalar>
std::vector<int> mark_round_argmax(const ParameterStore<Scalar>& store,
                                   const VecX<Scalar>& x_mark, int embed_dim) {
  const int n_events = static_cast<int>(x_mark.size()) / embed_dim;
  Tape<Scalar> tape(/*grads_enabled=*/false);
  const int x = tape.constant(x_mark, n_events, embed_dim);
  const int logits = rounding_logits(tape, store, x);
  const auto& v = tape.value(logits);
  const int K = tape.cols(logits);
  std::vector<int> out(n_events);
  for (int j = 0; j < n_events; ++j) {
    int best = 0;
    for (int k = 1; k < K; ++k)
      if (v[j * K + k] > v[j * K + best]) best = k;
    out[j] = best;
  }
  return out;
}

}  // namespace evdiff
