#include "evdiff/data/hawkes.hpp"

#include <array>
#include <cmath>

#include "evdiff/core/rng.hpp"

namespace evdiff {

Eigen::VectorXd HawkesModel::intensities(const EventSequence& events, double t) const {
  Eigen::VectorXd lam = base_rates;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const double dt = t - events.times[i];
    if (dt < 0.0) break;
    const auto& row = kernels[events.marks[i]];
    for (int j = 0; j < num_marks(); ++j) lam[j] += row[j](dt);
  }
  return lam;
}

HawkesModel HawkesModel::random_from_menu(int num_marks, double horizon,
                                          double base_rate, std::uint64_t seed) {
  if (num_marks < 1) throw ConfigError("hawkes: need at least one mark");
  static constexpr std::array<ExpKernel, 4> kMenu = {
      ExpKernel{0.4, 1.0}, ExpKernel{0.2, 0.5}, ExpKernel{0.6, 2.0},
      ExpKernel{0.1, 0.2}};
  HawkesModel m;
  m.base_rates = Eigen::VectorXd::Constant(num_marks, base_rate);
  m.horizon = horizon;
  m.kernels.resize(num_marks);
  Rng rng(derive_seed(seed, "hawkes-kernels"));
  for (int i = 0; i < num_marks; ++i) {
    m.kernels[i].resize(num_marks);
    for (int j = 0; j < num_marks; ++j) {
      ExpKernel k = kMenu[rng.uniform_int(0, 3)];
      k.a /= num_marks;
      m.kernels[i][j] = k;
    }
  }
  return m;
}

std::vector<EventSequence> hawkes_generate(const HawkesModel& model, int n_sequences,
                                           std::uint64_t seed,
                                           int max_events_per_sequence) {
  if (model.horizon <= 0.0) throw ConfigError("hawkes: horizon must be > 0");
  if (model.base_rates.size() == 0 || model.base_rates.maxCoeff() <= 0.0)
    throw ConfigError("hawkes: base rates must not all be zero");
  if (model.base_rates.minCoeff() < 0.0)
    throw ConfigError("hawkes: base rates must be >= 0");

  std::vector<EventSequence> out;
  out.reserve(n_sequences);
  for (int s = 0; s < n_sequences; ++s) {
    Rng rng(derive_seed(seed, "hawkes-seq", {static_cast<std::uint64_t>(s)}));
    EventSequence seq;
    double t = 0.0;
    while (true) {
      // Kernels decay monotonically, so the total intensity just after t
      // bounds the intensity anywhere in (t, next event].
      const double bound = model.intensities(seq, t).sum();
      if (bound <= 0.0) break;
      t += rng.exponential(bound);
      if (t >= model.horizon) break;
      const Eigen::VectorXd lam = model.intensities(seq, t);
      const double total = lam.sum();
      const double ratio = total / bound;
      if (ratio > 1.0 + 1e-9)
        throw Error("hawkes: intensity bound violated (ratio " + std::to_string(ratio) + ")");
      if (rng.uniform() < ratio) {
        double u = rng.uniform() * total;
        int mark = 0;
        while (mark + 1 < model.num_marks() && u >= lam[mark]) {
          u -= lam[mark];
          ++mark;
        }
        seq.marks.push_back(mark);
        seq.times.push_back(t);
        if (static_cast<int>(seq.size()) > max_events_per_sequence)
          throw Error("hawkes: sequence exceeded " +
                      std::to_string(max_events_per_sequence) +
                      " events; the model is likely supercritical");
      }
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace evdiff
