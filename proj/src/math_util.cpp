#include "qmp_lab/math_util.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace qmp {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kSqrt2Pi = 2.5066282746310005024;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double norm_logpdf(double x) {
  return -0.5 * x * x - 0.91893853320467274178;  // log sqrt(2 pi)
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double erfcx(double x) {
  require(x >= 0.0, "erfcx: negative argument not supported");
  if (x < 20.0) return std::exp(x * x) * std::erfc(x);
  // asymptotic series 1/(x sqrt(pi)) * sum (-1)^k (2k-1)!! / (2 x^2)^k;
  // at x >= 20 eight terms reach full double precision
  double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 8; ++k) {
    term *= -(2.0 * k - 1.0) * inv2x2;
    sum += term;
  }
  return sum / (x * 1.7724538509055160273);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

// Acklam's rational approximation to the normal quantile, then one Halley
// refinement against erfc-based norm_cdf.
double norm_quantile_approx(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
          a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double norm_quantile(double p) {
  require(p > 0.0 && p < 1.0, "norm_quantile: p must be in (0,1)");
  double x = norm_quantile_approx(p);
  // Halley step: f = cdf(x) - p, f' = pdf(x), f'' = -x pdf(x)
  for (int it = 0; it < 2; ++it) {
    double e = norm_cdf(x) - p;
    double u = e / norm_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

TruncNormMoments truncated_normal_moments(double lo, double hi, double m,
                                          double v, double var_floor) {
  require(lo < hi, "truncated_normal_moments: empty interval");
  require(v > 0.0 && std::isfinite(v) && std::isfinite(m) &&
              std::isfinite(lo) && std::isfinite(hi),
          "truncated_normal_moments: bad belief parameters");
  double sig = std::sqrt(v);
  double alpha = (lo - m) / sig;
  double beta = (hi - m) / sig;

  // Interval much narrower than the belief sd: the density over [lo, hi] is
  // an exponential tilt of a uniform up to a curvature factor that varies by
  // under h^2/8 across the window, so the tilted-uniform cumulants plus a
  // first-order curvature correction give the moments cancellation-free. The
  // general-path formula is hopeless here: it assembles a variance of order
  // h^2/12 out of O(1)-or-larger terms. The width is computed from the
  // bounds; beta - alpha can absorb to zero when |m| is astronomically large.
  double h = (hi - lo) / sig;
  if (h <= 0.01) {
    double mid = 0.5 * (alpha + beta);
    double x = -0.5 * mid * h;  // tilt times half-width
    double mean_s, var_s;       // moments of the offset from the midpoint
    if (std::abs(x) < 0.05) {
      double x2 = x * x;
      mean_s = 0.5 * h * (x / 3.0 - x * x2 / 45.0) - h * h * h * x / 180.0;
      var_s = h * h / 12.0 * (1.0 - x2 / 5.0 + 2.0 * x2 * x2 / 105.0);
    } else {
      // exact tilted-uniform cumulants; sinh overflow collapses 1/sinh^2 to
      // zero, which is the concentrated-at-edge limit. The h^3 term is the
      // curvature correction -(mu3 + 2 mean_s mu2)/2 to the mean.
      double sh = std::sinh(x);
      double inv_sh2 = 1.0 / (sh * sh);
      double coth = 1.0 / std::tanh(x);
      double ell = coth - 1.0 / x;
      var_s = 0.25 * h * h * (1.0 / (x * x) - inv_sh2);
      mean_s = 0.5 * h * ell -
               0.125 * h * h * h *
                   (coth * inv_sh2 - 1.0 / (x * x * x) +
                    ell * (1.0 / (x * x) - inv_sh2));
    }
    double mean = 0.5 * (lo + hi) + sig * mean_s;
    // matching curvature correction to the variance (untilted coefficient)
    double var = var_s * v * (1.0 - h * h / 30.0);
    if (!std::isfinite(mean) || !std::isfinite(var))
      return {mid > 0.0 ? hi : lo, var_floor, true};
    if (mean < lo) mean = lo;
    if (mean > hi) mean = hi;
    if (var < var_floor) var = var_floor;
    return {mean, var, false};
  }

  // Mirror x -> -x when the interval sits at or below the mean, so that the
  // one-sided tail case always has alpha >= 0 and the erfcx-scaled form
  // applies. The mixed case alpha < 0 < beta is cancellation-free as an erf
  // difference (the two terms have opposite signs).
  bool mirrored = false;
  if (beta <= 0.0) {
    mirrored = true;
    double t = alpha;
    alpha = -beta;
    beta = -t;
    m = -m;
    double tl = lo;
    lo = -hi;
    hi = -tl;
  }

  double ra, rb;  // pdf(alpha)/Z and pdf(beta)/Z
  if (alpha < 0.0) {
    double z = 0.5 * (std::erf(beta / kSqrt2) - std::erf(alpha / kSqrt2));
    if (!(z > 1e-300)) return {mirrored ? -lo : lo, var_floor, true};
    ra = norm_pdf(alpha) / z;
    rb = norm_pdf(beta) / z;
  } else {
    // both ends in the upper tail: Z = 0.5 exp(-alpha^2/2) * D with the
    // scaled difference D below; stable for arbitrarily large alpha
    double k = std::exp(-0.5 * (beta - alpha) * (beta + alpha));
    double ea = erfcx(alpha / kSqrt2);
    double d = ea - k * erfcx(beta / kSqrt2);
    if (!(d > ea * 1e-14) || !std::isfinite(d))
      return {mirrored ? -lo : lo, var_floor, true};
    ra = (2.0 / kSqrt2Pi) / d;
    rb = k * ra;
  }

  double diff = ra - rb;
  double mean = m + sig * diff;
  double var = v * (1.0 + (alpha * ra - beta * rb) - diff * diff);
  if (!std::isfinite(mean) || !std::isfinite(var))
    return {mirrored ? -lo : lo, var_floor, true};
  if (mean < lo) mean = lo;
  if (mean > hi) mean = hi;
  if (var < var_floor) var = var_floor;
  if (var > v) var = v;  // truncation never inflates a Gaussian's variance
  if (mirrored) mean = -mean;
  return {mean, var, false};
}

namespace {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix, weights are the
// squared first components of its eigenvectors.
QuadratureRule golub_welsch(const Eigen::VectorXd& diag,
                            const Eigen::VectorXd& offdiag, double mass) {
  int n = static_cast<int>(diag.size());
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    jacobi(i, i) = diag(i);
    if (i + 1 < n) {
      jacobi(i, i + 1) = offdiag(i);
      jacobi(i + 1, i) = offdiag(i);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  require(es.info() == Eigen::Success, "golub_welsch: eigensolver failed");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = mass * v0 * v0;
  }
  return rule;
}

}  // namespace

QuadratureRule gauss_hermite(int n) {
  require(n >= 1, "gauss_hermite: need at least one node");
  // probabilists' Hermite recurrence: a_k = 0, b_k = sqrt(k)
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd off(n - 1 > 0 ? n - 1 : 0);
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
  return golub_welsch(diag, off, 1.0);
}

QuadratureRule gauss_legendre(int n, double a, double b) {
  require(n >= 1, "gauss_legendre: need at least one node");
  require(a < b, "gauss_legendre: empty interval");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd off(n - 1 > 0 ? n - 1 : 0);
  for (int k = 1; k < n; ++k) {
    double kk = static_cast<double>(k);
    off(k - 1) = kk / std::sqrt(4.0 * kk * kk - 1.0);
  }
  QuadratureRule rule = golub_welsch(diag, off, 2.0);
  // map from [-1, 1] to [a, b]
  double half = 0.5 * (b - a);
  double mid = 0.5 * (a + b);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

}  // namespace qmp
