#pragma once

#include <utility>
#include <vector>

#include "qmp_lab/types.hpp"

namespace qmp {

double norm_pdf(double x);
double norm_logpdf(double x);
double norm_cdf(double x);

// inverse standard normal CDF; |error| < 1e-14 after refinement
double norm_quantile(double p);

// scaled complementary error function exp(x^2) * erfc(x) for x >= 0,
// overflow-free for large x
double erfcx(double x);

// numerically stable logistic
double sigmoid(double x);

struct TruncNormMoments {
  double mean;
  double var;
  bool degenerate;  // normalizer underflowed; moments pinned to a bound
};

// Mean/variance of a normal N(m, v) truncated to [lo, hi]. Far-tail cases are
// evaluated with erfcx-scaled ratios; if the mass underflows entirely the
// nearest bound is returned with variance var_floor and degenerate set.
TruncNormMoments truncated_normal_moments(double lo, double hi, double m,
                                          double v,
                                          double var_floor = 1e-11);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Hermite rule in probabilists' normalization: sum_k w_k f(x_k)
// approximates E[f(X)] with X ~ N(0,1); weights sum to 1.
QuadratureRule gauss_hermite(int n);

// Gauss-Legendre rule on [a, b]: sum_k w_k f(x_k) approximates the integral
// of f over [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

}  // namespace qmp
