#pragma once

#include <cstdint>
#include <vector>

#include "qmp_lab/gaussian_ops.hpp"
#include "qmp_lab/model.hpp"
#include "qmp_lab/types.hpp"

namespace qmp {

// Scalar recursion predicting the per-iteration variances of the solver from
// the problem dimensions, the prior/channel pair, and the operator set alone.
// No observations are consumed; the recursion tracks variance-like scalars
// and small Monte-Carlo ensembles of per-measurement mean vectors.

struct SeConfig {
  int iters = 30;      // recursion length
  int trials = 64;     // Monte-Carlo trials for the mean ensembles
  int gh_nodes = 61;   // quadrature nodes for the 1-D channel/prior integrals
  std::uint64_t seed = 1;
  // regenerate the operator set per trial instead of reusing the instance
  // matrices (slower: the draws are replayed every iteration)
  bool fresh_matrices = false;
  ClampPolicy clamp;
  void validate() const;
};

// Sampled per-measurement mean vectors (one n x m column block per trial) and
// their images through the operators. Type 1 columns map through A_k, type 2
// through A_k^H.
struct SeEnsembles {
  std::vector<Mat> x1, x2;  // sampled mean columns
  std::vector<Mat> a1, a2;  // a1[r].col(k) = A_k x1[r].col(k), a2 analogous with A_k^H
  double fro2_x1 = 0.0;     // trial-averaged squared Frobenius norms
  double fro2_x2 = 0.0;
  double fro2_a1 = 0.0;
  double fro2_a2 = 0.0;
  double fro2_ops = 0.0;    // trial-averaged sum of ||A_i||_F^2
};

// Mutable recursion state: the scalar variances currently in force, one fixed
// prior draw and one propagated ensemble center per trial, and the most
// recently sampled ensembles.
struct SeState {
  double t_x = 0.0;  // prior second moment
  double t_a = 0.0;  // operator entry variance, 1/n
  double t_z = 0.0;  // second moment of z = x^H A x, n^2 t_a t_x^2 = n t_x^2
  double v_z_plus = 0.0;
  double v_x_plus = 0.0;
  double c1 = 0.0;  // per-measurement mean-spread scalars of the two ensembles
  double c2 = 0.0;
  Field field = Field::real;
  std::vector<Vec> x_true;   // fixed prior draws, one per trial
  std::vector<Vec> central;  // ensemble centers, propagated by Monte Carlo
  SeEnsembles ens;
};

// One iteration of outputs. v_hat_x_plus is the headline prediction: the
// expected squared error of the posterior mean produced by the solver's
// matching iteration (records with the same 1-based iter pair up).
struct SeIterate {
  int iter = 0;
  double v_z_plus = 0.0;  // z pseudo-prior variance in force this iteration
  double q_z = 0.0;
  double v_hat_z_minus = 0.0;
  double v_z_minus = 0.0;
  double w_z_minus = 0.0;
  double a1 = 0.0, a2 = 0.0;  // relative-variance scalars of the mean ensembles
  double w1 = 0.0, w2 = 0.0;  // per-row denominators fed to the eigen expectation
  double v_hat_x_minus = 0.0;
  double v_x_minus = 0.0;
  double q_x = 0.0;
  double v_hat_x_plus = 0.0;  // predicted solver MSE at this iteration
  double v_x_plus = 0.0;      // pseudo-prior variance handed to the next iteration
  double c1 = 0.0, c2 = 0.0;  // updated spread scalars
};

struct SeTrajectory {
  double t_x = 0.0;
  double t_a = 0.0;
  double t_z = 0.0;
  std::vector<SeIterate> iters;
};

// Channel-side overlap: the expected squared conditional mean E|E[z|y]|^2
// when z splits as sqrt(t_z - v_z_plus) xi + a residual of variance v_z_plus.
// The inner z-integrals are Gaussian-conjugate for the awgn channel; the
// outer expectation over (xi, y) is evaluated by nested Gauss-Hermite
// quadrature (the real and complex fields reduce to the same form by
// circular symmetry). Requires 0 < v_z_plus <= t_z.
double qz_integral(double v_z_plus, double t_z, const ChannelSpec& channel,
                   const SeConfig& cfg);

// Prior-side overlap: E[m_hat^2] where m_hat is the posterior mean of the
// matched denoiser applied to the scalar observation x + sqrt(v_x_minus) eps.
// The Gaussian prior reduces to a single exact Gauss-Hermite pass; the 0-1
// and interval priors integrate with composite Gauss-Legendre panels of
// order gh_nodes, refined toward the steep regions of the posterior mean so
// the result stays stable as the denoiser sharpens. Returns a value in
// [0, t_x]. Requires v_x_minus > 0.
double qx_integral(double v_x_minus, const PriorSpec& prior,
                   const SeConfig& cfg);

// Channel-side expected posterior variance E_y[Var(z | y)] under the same
// split as qz_integral. For the awgn channel this is the conjugate form
// v_z_plus v_w / (v_z_plus + v_w), independent of the observation. The total
// law E|z|^2 = q_z + v_hat_z holds exactly, but evaluating the variance
// directly stays accurate when v_z_plus is many orders below t_z, where the
// difference t_z - q_z is pure cancellation.
double vhat_z_integral(double v_z_plus, double t_z, const ChannelSpec& channel,
                       const SeConfig& cfg);

// Prior-side expected posterior variance E[Var(x | x + sqrt(v_x_minus) eps)]
// of the matched scalar denoiser, integrated with the same panel scheme as
// qx_integral. Direct counterpart of t_x - q_x with the same cancellation
// caveat as vhat_z_integral.
double vhat_x_integral(double v_x_minus, const PriorSpec& prior,
                       const SeConfig& cfg);

// Which ensemble, if any, contributes all but its first column to the Gram
// combination (the leave-one-out form used for the spread scalars).
enum class LeaveOut { none, type1_first, type2_first };

// Trial-averaged mean of 1/(lambda + shift) over the eigenvalues of
//   G = (1/w1) M1 M1^H + (1/w2) M2 M2^H,
// with the designated first column removed. Equals the trial average of
// (1/n) Tr[(G + shift I)^{-1}]. Requires w1, w2, shift > 0.
double eigen_expectation(const std::vector<Mat>& ens_a1,
                         const std::vector<Mat>& ens_a2, double w1, double w2,
                         double shift, LeaveOut leave_out);

// Redraw se.ens around the current centers with per-coordinate spreads
// max(v_x_plus - c1, 0) and max(v_x_plus - c2, 0), then apply the operators.
// Deterministic in (cfg.seed, t, trial index).
void sample_mean_ensembles(SeState& se, const std::vector<Mat>& a_ops,
                           const SeConfig& cfg, int t);

// Run the full recursion against the given operator set (only the dimensions
// are read when cfg.fresh_matrices is set). The field and prior must be
// compatible: the 0-1 and interval priors are real-valued.
SeTrajectory run_se(const std::vector<Mat>& a_ops, const PriorSpec& prior,
                    const ChannelSpec& channel, Field field,
                    const SeConfig& cfg);

}  // namespace qmp
