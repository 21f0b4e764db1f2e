#pragma once

#include <cstdint>
#include <vector>

#include "qmp_lab/gaussian_ops.hpp"
#include "qmp_lab/model.hpp"
#include "qmp_lab/records.hpp"

namespace qmp {

// Per-measurement leave-one-out belief, factored against the shared broadcast
// covariance: cov = C_broadcast + coeff * u u^H. coeff = 0 means the belief
// simply aliases the broadcast (used at init and after degenerate downdates).
struct MeasBelief {
  Vec mean;
  Vec u;
  double coeff = 0.0;
};

struct QmpConfig {
  int max_iters = 30;
  // mixing of consecutive extrinsic messages, new = (1-eta) fresh + eta old
  // on means and log-variances; 0 reproduces the plain update
  double damping = 0.3;
  // early stop when ||m^{t} - m^{t-1}|| / ||m^{t-1}|| < tol; 0 runs all
  // iterations
  double tol = 1e-8;
  // initialization offset, times sqrt(E x^2), per coordinate. Zero-mean
  // priors start at a symmetric point the iteration cannot leave on its own;
  // an offset well clear of zero (but below the signal scale) breaks the
  // symmetry without biasing the informative priors, which converge from any
  // small offset.
  double init_jitter = 0.4;
  ClampPolicy clamp;
  // exact per-measurement trace in the z-variance update, O(M N^3) per
  // iteration; small-N oracle comparisons only. The default uses the
  // concentration shortcut tr(A^H C A C) ~ (tr C / N)^2 ||A||_F^2, exact for
  // scalar C and accurate for iid operators.
  bool exact_z_variance = false;
  // keep per-iteration normalized residuals (m^- - x)/sqrt(v^-) for QQ plots
  bool record_residuals = false;

  void validate() const;
};

struct QmpState {
  int t = 0;  // completed iterations
  QmpConfig cfg;
  DiagGaussian z_plus;    // bilinear-side z belief entering the channel
  DiagGaussian z_minus;   // extrinsic z belief after the channel (damped)
  DiagGaussian xt_plus;   // signal belief entering the quadratic block
  DiagGaussian xt_minus;  // extrinsic signal belief toward the prior (damped)
  DiagGaussian xt_post;   // prior posterior; the running output estimate
  NaturalGaussian aggregate;  // (b, Lambda) accumulated by the backward pass
  FullGaussian broadcast;     // shared dense belief behind bel1/bel2
  std::vector<MeasBelief> bel1, bel2;
  RealVec a1, a2;             // per-measurement relative-variance scalars
  std::vector<Vec> g1, g2;    // cached A_i m1_i and A_i^H m2_i rows
  RealVec op_fro2;            // ||A_i||_F^2, fixed per instance
  OpDiagnostics diag;
};

enum class StopReason { max_iters, tol_reached };

struct QmpOutput {
  Vec mean;      // posterior mean after the final iteration
  RealVec var;   // posterior variance
  std::vector<IterationRecord> records;
  StopReason reason = StopReason::max_iters;
  int iterations = 0;
  OpDiagnostics diag;
};

// Deterministic setup: signal beliefs at the prior mean plus a small seeded
// jitter (the symmetric start is a spurious fixed point of the quadratic
// update), variances at the prior variance, per-measurement beliefs copying
// the broadcast, and z beliefs from one forward moment evaluation.
QmpState init_state(const GqeInstance& inst, const PriorSpec& prior,
                    const QmpConfig& cfg);

// Channel-to-signal sweep: channel posterior, extrinsic z message, the
// per-measurement relative-variance scalars, the natural-form aggregates
// (b, Lambda), and the extrinsic signal message toward the prior.
void backward_pass(QmpState& s, const GqeInstance& inst,
                   const ChannelSpec& channel);

// Prior-to-channel sweep: prior posterior, extrinsic signal message, the
// dense broadcast belief, the per-measurement rank-one downdates, and fresh
// bilinear z moments.
void forward_pass(QmpState& s, const GqeInstance& inst,
                  const PriorSpec& prior);

// Full solve: alternate passes up to max_iters, record per-iteration aligned
// MSE against the planted signal, stop early on tol. Numerical failures
// surface as numeric_error tagged with the iteration index.
QmpOutput run(const GqeInstance& inst, const PriorSpec& prior,
              const ChannelSpec& channel, const QmpConfig& cfg);

}  // namespace qmp
