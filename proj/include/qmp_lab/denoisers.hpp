#pragma once

#include "qmp_lab/gaussian_ops.hpp"
#include "qmp_lab/model.hpp"
#include "qmp_lab/types.hpp"

namespace qmp {

// Coordinate-wise posterior moments under the awgn observation model
// y = z + w, w ~ N(0, noise_var), starting from the Gaussian belief (m, v):
//   v_post = 1 / (1/v + 1/noise_var),  m_post = v_post (m/v + y/noise_var).
// noise_var = 0 collapses onto the observation: (y, 0).
DiagGaussian channel_posterior_awgn(const Vec& y, const DiagGaussian& belief,
                                    double noise_var);

// Conjugate Gaussian-prior posterior (same precision weighting as awgn).
DiagGaussian prior_posterior_gaussian(const DiagGaussian& belief,
                                      double prior_mean, double prior_var);

// Posterior for the two-point prior (1-rho) delta(x) + rho delta(x-1).
// Evaluated in log space; the posterior mean is a logistic in (m, v):
//   m_post = sigmoid(log(rho/(1-rho)) + (2m - 1)/(2v)),  v_post = m(1-m).
// Real-valued prior: only the real part of the belief mean is used.
DiagGaussian prior_posterior_bernoulli01(const DiagGaussian& belief,
                                         double rho, double var_floor = 1e-11);

// Posterior for the flat prior on [a, b]: truncated-normal moments with
// far-tail handling (see truncated_normal_moments).
DiagGaussian prior_posterior_uniform(const DiagGaussian& belief, double a,
                                     double b, double var_floor = 1e-11);

// dispatch on PriorSpec
DiagGaussian prior_posterior(const PriorSpec& prior,
                             const DiagGaussian& belief);

// scalar versions (building blocks; the vector forms map over these)
void bernoulli01_posterior_scalar(double m, double v, double rho,
                                  double var_floor, double& mean_out,
                                  double& var_out);

}  // namespace qmp
