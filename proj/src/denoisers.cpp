#include "qmp_lab/denoisers.hpp"

#include <cmath>

#include "qmp_lab/math_util.hpp"

namespace qmp {

DiagGaussian channel_posterior_awgn(const Vec& y, const DiagGaussian& belief,
                                    double noise_var) {
  require(y.size() == belief.mean.size() && y.size() == belief.var.size(),
          "channel_posterior_awgn: size mismatch");
  require(noise_var >= 0.0 && std::isfinite(noise_var),
          "channel_posterior_awgn: bad noise_var");
  Eigen::Index n = y.size();
  DiagGaussian out;
  out.mean.resize(n);
  out.var.resize(n);
  if (noise_var == 0.0) {
    out.mean = y;
    out.var.setZero();
    return out;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = belief.var(i);
    require(v > 0.0 && std::isfinite(v),
            "channel_posterior_awgn: variances must be positive");
    double vp = 1.0 / (1.0 / v + 1.0 / noise_var);
    out.var(i) = vp;
    out.mean(i) = vp * (belief.mean(i) / v + y(i) / noise_var);
  }
  return out;
}

DiagGaussian prior_posterior_gaussian(const DiagGaussian& belief,
                                      double prior_mean, double prior_var) {
  require(prior_var > 0.0 && std::isfinite(prior_var),
          "prior_posterior_gaussian: bad prior_var");
  Eigen::Index n = belief.mean.size();
  DiagGaussian out;
  out.mean.resize(n);
  out.var.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = belief.var(i);
    require(v > 0.0 && std::isfinite(v),
            "prior_posterior_gaussian: variances must be positive");
    double vp = 1.0 / (1.0 / v + 1.0 / prior_var);
    out.var(i) = vp;
    out.mean(i) = vp * (belief.mean(i) / v + prior_mean / prior_var);
  }
  return out;
}

void bernoulli01_posterior_scalar(double m, double v, double rho,
                                  double var_floor, double& mean_out,
                                  double& var_out) {
  require(v > 0.0 && std::isfinite(v) && std::isfinite(m),
          "prior_posterior_bernoulli01: bad belief parameters");
  if (rho <= 0.0) {
    mean_out = 0.0;
    var_out = var_floor;
    return;
  }
  if (rho >= 1.0) {
    mean_out = 1.0;
    var_out = var_floor;
    return;
  }
  // log odds of the atom at 1 against the atom at 0; exact in log space, so
  // small v cannot underflow the normalizer
  double logit = std::log(rho) - std::log1p(-rho) + (2.0 * m - 1.0) / (2.0 * v);
  double p = sigmoid(logit);
  mean_out = p;
  var_out = std::max(p * (1.0 - p), var_floor);
}

DiagGaussian prior_posterior_bernoulli01(const DiagGaussian& belief,
                                         double rho, double var_floor) {
  require(rho >= 0.0 && rho <= 1.0, "prior_posterior_bernoulli01: bad rho");
  Eigen::Index n = belief.mean.size();
  DiagGaussian out;
  out.mean.resize(n);
  out.var.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mo, vo;
    bernoulli01_posterior_scalar(belief.mean(i).real(), belief.var(i), rho,
                                 var_floor, mo, vo);
    out.mean(i) = mo;
    out.var(i) = vo;
  }
  return out;
}

DiagGaussian prior_posterior_uniform(const DiagGaussian& belief, double a,
                                     double b, double var_floor) {
  require(a < b, "prior_posterior_uniform: need a < b");
  Eigen::Index n = belief.mean.size();
  DiagGaussian out;
  out.mean.resize(n);
  out.var.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    TruncNormMoments tm = truncated_normal_moments(a, b, belief.mean(i).real(),
                                                   belief.var(i), var_floor);
    out.mean(i) = tm.mean;
    out.var(i) = tm.var;
  }
  return out;
}

DiagGaussian prior_posterior(const PriorSpec& prior,
                             const DiagGaussian& belief) {
  switch (prior.kind) {
    case PriorKind::gaussian:
      return prior_posterior_gaussian(belief, prior.mean, prior.var);
    case PriorKind::bernoulli01:
      return prior_posterior_bernoulli01(belief, prior.rho);
    case PriorKind::uniform:
      return prior_posterior_uniform(belief, prior.a, prior.b);
  }
  throw error("prior_posterior: unknown prior kind");
}

}  // namespace qmp
