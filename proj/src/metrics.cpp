#include "qmp_lab/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "qmp_lab/math_util.hpp"

namespace qmp {

AlignMode align_mode_for(Field field, const PriorSpec& prior) {
  switch (prior.kind) {
    case PriorKind::bernoulli01:
      return AlignMode::none;
    case PriorKind::uniform:
      // a support crossing zero keeps the sign ambiguity alive
      return prior.a >= 0.0 ? AlignMode::none : AlignMode::sign;
    case PriorKind::gaussian:
      break;
  }
  if (field == Field::complex_circular) return AlignMode::phase;
  return AlignMode::sign;
}

cplx align_factor(const Vec& estimate, const Vec& truth, AlignMode mode) {
  require(estimate.size() == truth.size() && estimate.size() > 0,
          "align: need equal nonzero lengths");
  switch (mode) {
    case AlignMode::none:
      return {1.0, 0.0};
    case AlignMode::sign: {
      double ip = estimate.real().dot(truth.real()) +
                  estimate.imag().dot(truth.imag());
      return {ip >= 0.0 ? 1.0 : -1.0, 0.0};
    }
    case AlignMode::phase: {
      cplx ip = estimate.dot(truth);  // est^H truth
      double r = std::abs(ip);
      if (r == 0.0) return {1.0, 0.0};
      return ip / r;  // e^{i arg(est^H truth)} minimizes the distance
    }
  }
  throw error("align: unknown mode");
}

double aligned_mse(const Vec& estimate, const Vec& truth, AlignMode mode) {
  cplx s = align_factor(estimate, truth, mode);
  return (s * estimate - truth).squaredNorm() /
         static_cast<double>(truth.size());
}

QqData qq_data(const std::vector<double>& residuals) {
  require(residuals.size() >= 2, "qq_data: need at least two residuals");
  QqData out;
  out.sample = residuals;
  std::sort(out.sample.begin(), out.sample.end());
  std::size_t n = out.sample.size();
  out.theoretical.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.theoretical[k] =
        norm_quantile((static_cast<double>(k) + 0.5) / static_cast<double>(n));
  }
  return out;
}

double ks_statistic_normal(std::vector<double> residuals) {
  require(!residuals.empty(), "ks: empty sample");
  std::sort(residuals.begin(), residuals.end());
  std::size_t n = residuals.size();
  double d = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double f = norm_cdf(residuals[k]);
    double lo = static_cast<double>(k) / static_cast<double>(n);
    double hi = static_cast<double>(k + 1) / static_cast<double>(n);
    d = std::max(d, std::max(f - lo, hi - f));
  }
  return d;
}

double ks_pvalue(double d_stat, std::size_t n) {
  require(n > 0, "ks: empty sample");
  double rn = std::sqrt(static_cast<double>(n));
  double lambda = (rn + 0.12 + 0.11 / rn) * d_stat;
  if (lambda <= 0.0) return 1.0;
  // alternating Kolmogorov series; converges fast for lambda of interest
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace qmp
