#pragma once

#include <functional>
#include <vector>

#include "biodiff/rng.hpp"
#include "biodiff/schedule.hpp"
#include "biodiff/tensor.hpp"

namespace biodiff {

// Closed-form forward marginal: x_t = sqrt(abar_t) x0 + sqrt(1-abar_t) eps.
Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched);
// Same with explicit abar, for hand arithmetic in tests.
Tensor q_sample_abar(const Tensor& x0, double alpha_bar, const Tensor& eps);

// Single forward step x_t ~ q(x_t | x_{t-1}).
Tensor q_step(const Tensor& x_prev, int t, const Tensor& eps, const NoiseSchedule& sched);

// Model mean from predicted noise:
//   mu = (x_t - beta_t / sqrt(1-abar_t) * eps) / sqrt(alpha_t)
Tensor posterior_mean_from_eps(const Tensor& x_t, int t, const Tensor& eps_hat,
                               const NoiseSchedule& sched);

// True posterior mean given x0:
//   mu = sqrt(abar_{t-1}) beta_t / (1-abar_t) * x0
//      + sqrt(alpha_t) (1-abar_{t-1}) / (1-abar_t) * x_t
Tensor posterior_mean_from_x0(const Tensor& x_t, int t, const Tensor& x0,
                              const NoiseSchedule& sched);

// beta_tilde_t = (1-abar_{t-1}) / (1-abar_t) * beta_t
double posterior_variance(int t, const NoiseSchedule& sched);

// Interpolated variance, v in [0,1]: beta_tilde^(1-v) * beta^v.
// v=0 gives the posterior variance, v=1 gives beta_t. At t=1 beta_tilde is 0,
// so interpolation falls back to beta_tilde unless v == 1.
double interp_variance(int t, double v, const NoiseSchedule& sched);

// Recover x0 estimate from x_t and predicted noise.
Tensor predict_x0_from_eps(const Tensor& x_t, int t, const Tensor& eps_hat,
                           const NoiseSchedule& sched);

// One reverse step. At t == 1 returns the mean (no noise is added regardless
// of z). Otherwise x_{t-1} = mu + sqrt(var) * z with var = interp_variance.
Tensor p_sample_step(const Tensor& x_t, int t, const Tensor& eps_hat, const Tensor& z,
                     const NoiseSchedule& sched, double v = 0.0);
// Convenience: draws z from rng (skipped at t == 1 to keep streams aligned is
// NOT done here; t == 1 still ignores the draw so callers may share one rng).
Tensor p_sample_step(const Tensor& x_t, int t, const Tensor& eps_hat, Rng& rng,
                     const NoiseSchedule& sched, double v = 0.0);

// Mean absolute error between predicted and true noise (the training loss).
double simple_loss(const Tensor& eps_hat, const Tensor& eps);
// Mean squared error, used by restoration checks.
double mse(const Tensor& a, const Tensor& b);

// Per-element ELBO decomposition in nats, all terms averaged over elements.
//   prior_term:  KL(q(x_T|x0) || N(0,I))
//   kl[t-2]:     KL(q(x_{t-1}|x_t,x0) || p(x_{t-1}|x_t)) for t = 2..T
//   recon_nll:   -log p(x0 | x_1) under N(mu_theta(x_1,1), sigma_1^2 I)
// Monte Carlo over mc_draws noise draws per t with the provided rng.
struct ElboTerms {
    double prior_term = 0.0;
    std::vector<double> kl;  // size T-1, index 0 is t=2
    double recon_nll = 0.0;
    double total() const;
};

using EpsPredictor = std::function<Tensor(const Tensor& x_t, int t)>;

ElboTerms elbo_terms(const Tensor& x0, const EpsPredictor& predict,
                     const NoiseSchedule& sched, int mc_draws, Rng& rng, double v = 0.0);

// Closed-form per-element prior term 0.5*(abar_T x0^2 + (1-abar_T) - 1 - ln(1-abar_T))
// averaged over elements; used both by elbo_terms and directly in tests.
double prior_kl_term(const Tensor& x0, const NoiseSchedule& sched);

}  // namespace biodiff
