#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "evdiff/core/errors.hpp"

namespace evdiff {

/// Noise schedule for N diffusion levels: beta_n in (0,1), alpha_n = 1-beta_n
/// and alpha_bar_n = prod_{r<=n} alpha_r, with alpha_bar_0 := 1. Index n is
/// 1-based throughout; accessors take n in [1, N].
struct NoiseSchedule {
  int levels = 0;  // N
  Eigen::VectorXd beta;
  Eigen::VectorXd alpha;
  Eigen::VectorXd alpha_bar;

  /// Linear interpolation of beta between beta_1 and beta_N.
  static NoiseSchedule linear(int levels, double beta_1, double beta_n) {
    if (levels < 1) throw ConfigError("schedule: N must be >= 1");
    if (!(0.0 < beta_1 && beta_1 <= beta_n && beta_n < 1.0))
      throw ConfigError("schedule: need 0 < beta_1 <= beta_N < 1");
    NoiseSchedule s;
    s.levels = levels;
    s.beta.resize(levels);
    s.alpha.resize(levels);
    s.alpha_bar.resize(levels);
    double bar = 1.0;
    for (int i = 0; i < levels; ++i) {
      const double frac = levels == 1 ? 0.0 : static_cast<double>(i) / (levels - 1);
      s.beta[i] = beta_1 + frac * (beta_n - beta_1);
      s.alpha[i] = 1.0 - s.beta[i];
      bar *= s.alpha[i];
      s.alpha_bar[i] = bar;
    }
    return s;
  }

  double beta_at(int n) const { return beta[check(n) - 1]; }
  double alpha_at(int n) const { return alpha[check(n) - 1]; }
  double alpha_bar_at(int n) const { return n == 0 ? 1.0 : alpha_bar[check(n) - 1]; }

  /// Whether the terminal corrupted marginal is usably close to N(0, I);
  /// useful schedules satisfy alpha_bar_N < 1e-2.
  bool terminal_mixing_ok() const { return alpha_bar[levels - 1] < 1e-2; }

  /// FNV-1a over N and the beta bytes; ties checkpoints to their schedule.
  std::string hash() const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    auto feed = [&h](const unsigned char* p, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
      }
    };
    feed(reinterpret_cast<const unsigned char*>(&levels), sizeof(levels));
    feed(reinterpret_cast<const unsigned char*>(beta.data()),
         sizeof(double) * beta.size());
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
  }

 private:
  int check(int n) const {
    if (n < 1 || n > levels)
      throw IndexError("schedule: level " + std::to_string(n) + " out of [1," +
                       std::to_string(levels) + "]");
    return n;
  }
};

}  // namespace evdiff
