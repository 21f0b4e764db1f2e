#pragma once

#include <cstdint>
#include <vector>

#include "qmp_lab/model.hpp"
#include "qmp_lab/records.hpp"
#include "qmp_lab/types.hpp"

namespace qmp {

// Gradient-descent reference solvers for the quadratic-measurement loss
//   L(x) = (1/2M) sum_i |y_i - x^H A_i x|^2
// with spectral initialization. They exist as comparison points for the
// message-passing solver; the step schedule and projection strength are
// config-exposed so the comparison stays tunable rather than a strawman.
struct WfConfig {
  int max_iters = 30;
  // base step size, applied as mu_t / (||x_0||^2 / n) with a linear ramp
  // over the first `ramp` iterations; 0 freezes the iterate (diagnostic)
  double mu0 = 0.2;
  int ramp = 5;
  // power-method iterations for the spectral initializer
  int power_iters = 50;
  // projection strength in [0, 1] for the thresholded variant: each step
  // pulls the iterate this far toward the prior support (nearest of {0, 1},
  // or the interval [a, b]). 0 disables the pull and makes run_twf
  // reproduce run_wf exactly; gaussian priors have no support to project
  // onto and are never pulled.
  double threshold = 1.0;
  // stream for the power-method start vector
  std::uint64_t seed = 1;

  void validate() const;
};

struct WfOutput {
  Vec estimate;
  std::vector<IterationRecord> records;
  int iterations = 0;
  // the loss guard tripped (non-finite or above 1e12); stopped early
  bool diverged = false;
};

// loss and Wirtinger gradient at x:
//   g = -(1/M) sum_i (conj(r_i) A_i x + r_i A_i^H x),  r_i = y_i - x^H A_i x.
// The gradient is exposed for the finite-difference check; for a real
// instance it reduces to -(1/M) sum_i r_i (A_i + A_i^H) x.
double wf_loss(const GqeInstance& inst, const Vec& x);
Vec wf_gradient(const GqeInstance& inst, const Vec& x);

// Top eigenvector of the Hermitian data matrix
//   D = (1/M) sum_i (conj(y_i) A_i + y_i A_i^H) / 2
// by power iteration, rescaled so the induced measurements v^H A_i v match y
// in least squares. Deterministic in (instance seed, config seed).
Vec spectral_init(const GqeInstance& inst, const WfConfig& cfg);

// Run the descent from the spectral initializer (or from x0 when provided;
// an empty x0 means "use spectral_init"). Records the aligned MSE after
// every step under solver name "wf" / "twf".
WfOutput run_wf(const GqeInstance& inst, const WfConfig& cfg,
                const Vec& x0 = Vec());
WfOutput run_twf(const GqeInstance& inst, const WfConfig& cfg,
                 const Vec& x0 = Vec());

}  // namespace qmp
