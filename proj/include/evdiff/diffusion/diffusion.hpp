#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "evdiff/core/rng.hpp"
#include "evdiff/core/tensor.hpp"
#include "evdiff/diffusion/schedule.hpp"

namespace evdiff {

template <typename Scalar>
VecX<Scalar> gaussian_vector(Eigen::Index n, Rng& rng) {
  VecX<Scalar> v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = static_cast<Scalar>(rng.normal());
  return v;
}

/// Closed-form forward corruption: x^n = sqrt(ab_n) x^0 + sqrt(1-ab_n) eps.
template <typename Scalar>
VecX<Scalar> q_sample(const VecX<Scalar>& x0, int n, const VecX<Scalar>& eps,
                      const NoiseSchedule& sched) {
  const double ab = sched.alpha_bar_at(n);
  return (std::sqrt(ab) * x0.template cast<double>() +
          std::sqrt(1.0 - ab) * eps.template cast<double>())
      .template cast<Scalar>();
}

/// Sequential forward chain: n single-level corruptions
/// x^r = sqrt(1-beta_r) x^{r-1} + sqrt(beta_r) eps_r. Marginally equal in
/// distribution to q_sample at level n.
template <typename Scalar>
VecX<Scalar> q_sample_chain(const VecX<Scalar>& x0, int n, const NoiseSchedule& sched,
                            Rng& rng) {
  if (n < 0 || n > sched.levels)
    throw IndexError("q_sample_chain: level out of range");
  VecX<double> x = x0.template cast<double>();
  for (int r = 1; r <= n; ++r) {
    const double b = sched.beta_at(r);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      x[i] = std::sqrt(1.0 - b) * x[i] + std::sqrt(b) * rng.normal();
  }
  return x.template cast<Scalar>();
}

/// Coefficients of the forward-process posterior q(x^{n-1} | x^n, x^0) =
/// N(mu, beta_tilde I) with mu = c0 * x^0 + cn * x^n.
struct PosteriorCoeffs {
  double c0 = 0.0;
  double cn = 0.0;
  double beta_tilde = 0.0;
};

inline PosteriorCoeffs posterior_coeffs(int n, const NoiseSchedule& sched) {
  const double beta_n = sched.beta_at(n);
  const double alpha_n = sched.alpha_at(n);
  const double ab_n = sched.alpha_bar_at(n);
  const double ab_prev = sched.alpha_bar_at(n - 1);
  PosteriorCoeffs c;
  c.c0 = std::sqrt(ab_prev) * beta_n / (1.0 - ab_n);
  c.cn = std::sqrt(alpha_n) * (1.0 - ab_prev) / (1.0 - ab_n);
  c.beta_tilde = (1.0 - ab_prev) / (1.0 - ab_n) * beta_n;
  return c;
}

/// Posterior mean and variance given the clean and corrupted vectors.
template <typename Scalar>
std::pair<VecX<Scalar>, double> posterior_params(const VecX<Scalar>& x0,
                                                 const VecX<Scalar>& xn, int n,
                                                 const NoiseSchedule& sched) {
  const PosteriorCoeffs c = posterior_coeffs(n, sched);
  VecX<Scalar> mu = (c.c0 * x0.template cast<double>() +
                     c.cn * xn.template cast<double>())
                        .template cast<Scalar>();
  return {std::move(mu), c.beta_tilde};
}

/// One reverse step: draw x^{n-1} ~ N(mu(x0_hat, x^n, n), beta_tilde_n I).
/// At n = 1 the variance is zero and the step is deterministic (no random
/// numbers are consumed).
template <typename Scalar>
VecX<Scalar> denoise_step(const VecX<Scalar>& xn, int n, const VecX<Scalar>& x0_hat,
                          const NoiseSchedule& sched, Rng& rng) {
  auto [mu, beta_tilde] = posterior_params(x0_hat, xn, n, sched);
  if (beta_tilde > 0.0) {
    const Scalar sd = static_cast<Scalar>(std::sqrt(beta_tilde));
    for (Eigen::Index i = 0; i < mu.size(); ++i)
      mu[i] += sd * static_cast<Scalar>(rng.normal());
  }
  return mu;
}

/// Full reverse loop from x^N ~ N(0, I) down to x^0. `denoiser` maps
/// (x^n, n) to the x^0 estimate; `clamp` (if set) snaps the estimate's mark
/// blocks and is applied only for n <= clamp_start.
template <typename Scalar>
VecX<Scalar> reverse_loop(Eigen::Index dim,
                          const std::function<VecX<Scalar>(const VecX<Scalar>&, int)>& denoiser,
                          const std::function<void(VecX<Scalar>&)>& clamp,
                          int clamp_start, const NoiseSchedule& sched, Rng& rng) {
  VecX<Scalar> x = gaussian_vector<Scalar>(dim, rng);
  for (int n = sched.levels; n >= 1; --n) {
    VecX<Scalar> x0_hat = denoiser(x, n);
    if (clamp && n <= clamp_start) clamp(x0_hat);
    x = denoise_step(x, n, x0_hat, sched, rng);
  }
  return x;
}

}  // namespace evdiff
