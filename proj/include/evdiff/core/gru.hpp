#pragma once

#include <string>

#include "evdiff/core/params.hpp"
#include "evdiff/core/rng.hpp"
#include "evdiff/core/tape.hpp"

namespace evdiff {

/// Node ids of one GRU cell's nine weight tensors on a tape.
struct GruRefs {
  int Wz, Uz, bz;
  int Wr, Ur, br;
  int Wn, Un, bn;
};

/// Registers the parameters of a fully-gated GRU cell under `prefix`.
/// W* act on the input (d_h x d_in), U* on the hidden state (d_h x d_h).
template <typename Scalar>
void gru_create_params(ParameterStore<Scalar>& store, const std::string& prefix,
                       int d_in, int d_h) {
  for (const char* gate : {"z", "r", "n"}) {
    store.create(prefix + ".W" + gate, {d_h, d_in});
    store.create(prefix + ".U" + gate, {d_h, d_h});
    store.create(prefix + ".b" + gate, {d_h}, true, /*decay=*/false);
  }
}

template <typename Scalar>
GruRefs gru_lease(Tape<Scalar>& tape, const ParameterStore<Scalar>& store,
                  const std::string& prefix) {
  GruRefs r;
  r.Wz = tape.param(store, prefix + ".Wz");
  r.Uz = tape.param(store, prefix + ".Uz");
  r.bz = tape.param(store, prefix + ".bz");
  r.Wr = tape.param(store, prefix + ".Wr");
  r.Ur = tape.param(store, prefix + ".Ur");
  r.br = tape.param(store, prefix + ".br");
  r.Wn = tape.param(store, prefix + ".Wn");
  r.Un = tape.param(store, prefix + ".Un");
  r.bn = tape.param(store, prefix + ".bn");
  return r;
}

/// One step of the standard fully-gated GRU. The exact recurrence used is
///
///   z  = sigmoid(Wz x + Uz h + bz)          (update gate)
///   r  = sigmoid(Wr x + Ur h + br)          (reset gate)
///   n  = tanh(Wn x + r .* (Un h) + bn)      (candidate)
///   h' = (1 - z) .* n + z .* h
///
/// so an update gate saturated at 1 passes the previous state through
/// unchanged, and the all-zero parameter point maps h = 0 to h' = 0.
template <typename Scalar>
int gru_cell(Tape<Scalar>& tape, const GruRefs& p, int x, int h) {
  const int z = tape.sigmoid(tape.add(tape.linear(x, p.Wz, p.bz), tape.linear(h, p.Uz)));
  const int r = tape.sigmoid(tape.add(tape.linear(x, p.Wr, p.br), tape.linear(h, p.Ur)));
  const int cand = tape.tanh(
      tape.add(tape.linear(x, p.Wn, p.bn), tape.mul(r, tape.linear(h, p.Un))));
  return tape.add(tape.mul(tape.affine(z, Scalar(-1), Scalar(1)), cand),
                  tape.mul(z, h));
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for a weight matrix,
/// matching the usual recurrent-layer default.
template <typename Scalar>
void init_uniform_fanin(Tensor<Scalar>& w, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (int i = 0; i < w.numel(); ++i)
    w.data[i] = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * bound);
}

template <typename Scalar>
void gru_init(ParameterStore<Scalar>& store, const std::string& prefix, int d_in,
              int d_h, Rng& rng) {
  for (const char* gate : {"z", "r", "n"}) {
    init_uniform_fanin(store.at(prefix + ".W" + gate), d_in, rng);
    init_uniform_fanin(store.at(prefix + ".U" + gate), d_h, rng);
  }
}

}  // namespace evdiff
