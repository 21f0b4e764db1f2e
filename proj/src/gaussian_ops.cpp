#include "qmp_lab/gaussian_ops.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace qmp {

namespace {

void check_diag(const DiagGaussian& g, const char* who,
                bool allow_zero_var = false) {
  require(g.mean.size() == g.var.size(), std::string(who) + ": size mismatch");
  for (Eigen::Index i = 0; i < g.var.size(); ++i) {
    bool ok = std::isfinite(g.var(i)) &&
              (g.var(i) > 0.0 || (allow_zero_var && g.var(i) == 0.0));
    require(ok, std::string(who) + ": variances must be positive finite");
    require(std::isfinite(g.mean(i).real()) && std::isfinite(g.mean(i).imag()),
            std::string(who) + ": non-finite mean");
  }
}

}  // namespace

double ext_var_scalar(double v_hat, double v_in, const ClampPolicy& clamp,
                      OpDiagnostics* diag) {
  double p = 1.0 / v_hat - 1.0 / v_in;
  if (!(p > 0.0) || !std::isfinite(p)) {
    if (diag) ++diag->ext_clamps;
    return clamp.v_ceil;
  }
  double v = 1.0 / p;
  if (v < clamp.v_floor || v > clamp.v_ceil) {
    if (diag) ++diag->ext_clamps;
    v = std::min(std::max(v, clamp.v_floor), clamp.v_ceil);
  }
  return v;
}

DiagGaussian ext(const DiagGaussian& posterior, const DiagGaussian& input,
                 const ClampPolicy& clamp, OpDiagnostics* diag) {
  check_diag(posterior, "ext posterior", /*allow_zero_var=*/true);
  check_diag(input, "ext input");
  require(posterior.mean.size() == input.mean.size(), "ext: size mismatch");

  Eigen::Index n = posterior.mean.size();
  DiagGaussian out;
  out.mean.resize(n);
  out.var.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (posterior.var(i) == 0.0) {
      // exact posterior (zero-noise observation): the extrinsic message is
      // the observation itself at the variance floor
      if (diag) ++diag->ext_clamps;
      out.var(i) = clamp.v_floor;
      out.mean(i) = posterior.mean(i);
      continue;
    }
    double p = 1.0 / posterior.var(i) - 1.0 / input.var(i);
    if (!(p > 0.0) || !std::isfinite(p)) {
      // division failed: neutralize the message but keep the posterior mean
      if (diag) ++diag->ext_clamps;
      out.var(i) = clamp.v_ceil;
      out.mean(i) = posterior.mean(i);
      continue;
    }
    double v = 1.0 / p;
    if (v < clamp.v_floor || v > clamp.v_ceil) {
      if (diag) ++diag->ext_clamps;
      v = std::min(std::max(v, clamp.v_floor), clamp.v_ceil);
    }
    out.var(i) = v;
    out.mean(i) = v * (posterior.mean(i) / posterior.var(i) -
                       input.mean(i) / input.var(i));
  }
  return out;
}

FullGaussian lex(const NaturalGaussian& nat, const DiagGaussian& input,
                 OpDiagnostics* diag) {
  check_diag(input, "lex input");
  Eigen::Index n = input.mean.size();
  require(nat.precision.rows() == n && nat.precision.cols() == n &&
              nat.shift.size() == n,
          "lex: dimension mismatch");

  // Hermitian part only; accumulation noise can leave a tiny skew component
  Mat h = 0.5 * (nat.precision + nat.precision.adjoint());
  for (Eigen::Index i = 0; i < n; ++i) h(i, i) += 1.0 / input.var(i);

  Vec rhs = nat.shift + input.mean.cwiseQuotient(input.var.cast<cplx>());

  double base = std::abs(h.real().trace()) / static_cast<double>(n);
  if (!(base > 0.0)) base = 1.0;
  double jitter = 1e-12 * base;

  Eigen::LLT<Mat> llt;
  for (int attempt = 0; attempt <= 4; ++attempt) {
    Mat try_h = h;
    if (attempt > 0) {
      try_h += jitter * Mat::Identity(n, n);
      jitter *= 10.0;
      if (diag) ++diag->lex_jitter_rounds;
    }
    llt.compute(try_h);
    if (llt.info() == Eigen::Success) {
      FullGaussian out;
      out.cov = llt.solve(Mat::Identity(n, n));
      out.cov = 0.5 * (out.cov + out.cov.adjoint()).eval();
      out.mean = out.cov * rhs;
      if (out.mean.allFinite() && out.cov.allFinite()) return out;
    }
  }
  throw numeric_error("lex: factorization failed after jitter escalation");
}

PexResult pex_factored(const Vec& m_hat, const Mat& c_hat, cplx m_z,
                       double v_z, double a_h, const Vec& h_adj) {
  Eigen::Index n = m_hat.size();
  require(c_hat.rows() == n && c_hat.cols() == n && h_adj.size() == n,
          "pex: dimension mismatch");
  require(v_z > 0.0 && std::isfinite(v_z) && a_h >= 0.0 && std::isfinite(a_h),
          "pex: bad scalar parameters");

  PexResult out;
  out.u = c_hat * h_adj;                      // C_hat h^H
  double q = h_adj.dot(out.u).real();         // h C_hat h^H (real, PSD form)
  double d_full = v_z + std::norm(m_z) * a_h; // denominator before downdate
  double d = d_full - q;
  double floor = 1e-12 * (d_full + std::abs(q));
  if (!(d > floor) || !std::isfinite(d)) {
    out.mean = m_hat;
    out.u.setZero();
    out.coeff = 0.0;
    out.degenerate = true;
    return out;
  }
  cplx resid = m_z - h_adj.dot(m_hat);  // m_z - h m_hat
  out.mean = m_hat - (resid / d) * out.u;
  out.coeff = 1.0 / d;
  out.degenerate = false;
  return out;
}

FullGaussian pex(const Vec& m_hat, const Mat& c_hat, cplx m_z, double v_z,
                 double a_h, const Vec& h_adj, OpDiagnostics* diag) {
  PexResult r = pex_factored(m_hat, c_hat, m_z, v_z, a_h, h_adj);
  FullGaussian out;
  if (r.degenerate) {
    if (diag) ++diag->pex_fallbacks;
    out.mean = m_hat;
    out.cov = 0.5 * (c_hat + c_hat.adjoint());
    return out;
  }
  out.mean = std::move(r.mean);
  out.cov = c_hat + r.coeff * (r.u * r.u.adjoint());
  out.cov = 0.5 * (out.cov + out.cov.adjoint()).eval();
  return out;
}

EzResult ez(const Vec& h_adj, const Mat& c_h, const Vec& m_x, const Mat& c_x) {
  Eigen::Index n = m_x.size();
  require(h_adj.size() == n && c_h.rows() == n && c_h.cols() == n &&
              c_x.rows() == n && c_x.cols() == n,
          "ez: dimension mismatch");
  EzResult out;
  out.mean = h_adj.dot(m_x);  // row * m_x
  // tr(c_h c_x) = sum_{jk} c_h(j,k) c_x(k,j), evaluated entrywise in O(n^2)
  double tr = c_h.transpose().cwiseProduct(c_x).sum().real();
  double qh = h_adj.dot(c_x * h_adj).real();
  double qx = m_x.dot(c_h * m_x).real();
  out.var = tr + qh + qx;
  return out;
}

DiagGaussian gaussian_product(const DiagGaussian& lhs,
                              const DiagGaussian& rhs) {
  check_diag(lhs, "gaussian_product lhs");
  check_diag(rhs, "gaussian_product rhs");
  require(lhs.mean.size() == rhs.mean.size(), "gaussian_product: size mismatch");
  Eigen::Index n = lhs.mean.size();
  DiagGaussian out;
  out.mean.resize(n);
  out.var.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1.0 / lhs.var(i) + 1.0 / rhs.var(i);
    out.var(i) = 1.0 / p;
    out.mean(i) =
        out.var(i) * (lhs.mean(i) / lhs.var(i) + rhs.mean(i) / rhs.var(i));
  }
  return out;
}

}  // namespace qmp
