#pragma once

#include <cstddef>
#include <vector>

#include "qmp_lab/model.hpp"
#include "qmp_lab/types.hpp"

namespace qmp {

// Global ambiguity of the quadratic model that the error metric must mod out:
// complex signals are recovered up to a phase, real signals up to a sign, and
// nonnegative-support priors (bernoulli01, uniform with a >= 0) pin the
// representative so no alignment applies.
enum class AlignMode { none, sign, phase };

AlignMode align_mode_for(Field field, const PriorSpec& prior);

// the alignment factor itself: e^{i theta} with theta = arg(est^H truth),
// +-1 for sign mode, 1 for none
cplx align_factor(const Vec& estimate, const Vec& truth, AlignMode mode);

// per-coordinate mean squared error after alignment: ||s est - truth||^2 / N
double aligned_mse(const Vec& estimate, const Vec& truth, AlignMode mode);

// sorted residuals paired with standard-normal quantiles at plotting
// positions (k - 0.5)/n
struct QqData {
  std::vector<double> sample;
  std::vector<double> theoretical;
};

QqData qq_data(const std::vector<double>& residuals);

// Kolmogorov-Smirnov distance of the sample against N(0,1), and the
// asymptotic p-value with the finite-sample correction
// lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) * D.
double ks_statistic_normal(std::vector<double> residuals);
double ks_pvalue(double d_stat, std::size_t n);

}  // namespace qmp
