#pragma once

#include "qmp_lab/types.hpp"

namespace qmp {

// Diagonal Gaussian belief: independent coordinates, complex mean, real
// per-coordinate variance (E|x - m|^2 in complex mode).
struct DiagGaussian {
  Vec mean;
  RealVec var;
};

// Dense Gaussian belief.
struct FullGaussian {
  Vec mean;
  Mat cov;
};

// Natural-form accumulator: shift vector b and precision-like matrix
// precision (possibly rank-deficient; it only becomes invertible after a
// diagonal prior precision is added).
struct NaturalGaussian {
  Vec shift;
  Mat precision;
};

struct ClampPolicy {
  double v_floor = 1e-11;
  double v_ceil = 1e11;
};

struct OpDiagnostics {
  int ext_clamps = 0;        // extrinsic variances pinned to a bound
  int lex_jitter_rounds = 0; // diagonal jitter escalations inside lex
  int pex_fallbacks = 0;     // degenerate rank-one downdates
};

// ext: divide the posterior (m_hat, v_hat) by the cavity input (m1, v1),
// coordinate-wise:
//   v2 = 1 / (1/v_hat - 1/v1),  m2 = v2 * (m_hat/v_hat - m1/v1).
// A nonpositive or non-finite raw precision is replaced by v_ceil with the
// posterior mean passed through unchanged; otherwise v2 is clamped into
// [v_floor, v_ceil].
DiagGaussian ext(const DiagGaussian& posterior, const DiagGaussian& input,
                 const ClampPolicy& clamp = {}, OpDiagnostics* diag = nullptr);

// scalar version of the same rule (used by the scalar recursions)
double ext_var_scalar(double v_hat, double v_in, const ClampPolicy& clamp = {},
                      OpDiagnostics* diag = nullptr);

// lex: combine natural-form evidence with a diagonal Gaussian input,
//   C_hat = (precision + diag(1/v))^{-1},  m_hat = C_hat (b + m / v),
// via a Cholesky factorization; on failure a diagonal jitter of
// 1e-12 * trace/n is added and escalated tenfold, at most four times.
FullGaussian lex(const NaturalGaussian& nat, const DiagGaussian& input,
                 OpDiagnostics* diag = nullptr);

// pex: remove one rank-one measurement term from a dense belief.
// h_adj is the conjugate transpose of the measurement row; a_h the row's
// relative-variance scalar; (m_z, v_z) the extrinsic z-belief. With
//   d = v_z + |m_z|^2 a_h - h C_hat h^H,
// the downdated belief is
//   cov  = C_hat + (C_hat h^H)(h C_hat) / d,
//   mean = m_hat - ((m_z - h m_hat) / d) * C_hat h^H.
// Storage is factored: cov = C_hat + coeff * u u^H with u = C_hat h^H.
// If d falls below d_floor = 1e-12 * (v_z + |m_z|^2 a_h + |h C_hat h^H|)
// the result is flagged degenerate and callers should substitute the
// broadcast belief.
struct PexResult {
  Vec mean;
  Vec u;
  double coeff = 0.0;
  bool degenerate = false;
};

PexResult pex_factored(const Vec& m_hat, const Mat& c_hat, cplx m_z,
                       double v_z, double a_h, const Vec& h_adj);

// dense convenience wrapper materializing the covariance (symmetrized)
FullGaussian pex(const Vec& m_hat, const Mat& c_hat, cplx m_z, double v_z,
                 double a_h, const Vec& h_adj,
                 OpDiagnostics* diag = nullptr);

// ez: moments of the bilinear form z = xcheck^H A x when row = xcheck^H A has
// mean h_adj^H (h_adj passed conjugate-transposed) and covariance c_h, and x
// has moments (m_x, c_x):
//   m_z = h m_x,  v_z = tr(c_h c_x) + h c_x h^H + m_x^H c_h m_x.
struct EzResult {
  cplx mean;
  double var = 0.0;
};

EzResult ez(const Vec& h_adj, const Mat& c_h, const Vec& m_x, const Mat& c_x);

// density product of two diagonal Gaussians (precision-weighted average)
DiagGaussian gaussian_product(const DiagGaussian& lhs, const DiagGaussian& rhs);

}  // namespace qmp
