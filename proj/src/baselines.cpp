#include "qmp_lab/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "qmp_lab/math_util.hpp"
#include "qmp_lab/metrics.hpp"
#include "qmp_lab/rng.hpp"

namespace qmp {

namespace {

constexpr std::uint64_t kWfSpectralStream = 0x77f50000ULL;

// loss guard: beyond this the step size was too aggressive and the iterate
// is garbage; stop instead of overflowing into NaN
constexpr double kDivergenceLoss = 1e12;

// pull each coordinate `strength` of the way toward the prior support
void support_pull(Vec& x, const PriorSpec& prior, double strength) {
  if (strength == 0.0 || prior.kind == PriorKind::gaussian) return;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    double re = x(j).real();
    double target = prior.kind == PriorKind::bernoulli01
                        ? (re >= 0.5 ? 1.0 : 0.0)
                        : std::clamp(re, prior.a, prior.b);
    // convex form so a full-strength pull lands exactly on the target
    x(j) = cplx((1.0 - strength) * re + strength * target, x(j).imag());
  }
}

WfOutput descend(const GqeInstance& inst, const WfConfig& cfg, const Vec& x0,
                 const char* name, double pull) {
  cfg.validate();
  inst.prior.validate();
  require_config(!inst.a_ops.empty() && inst.signal.size() > 0,
                 "wf: instance has no operators or signal");

  Vec x = x0.size() > 0 ? x0 : spectral_init(inst, cfg);
  require_config(x.size() == inst.signal.size(),
                 "wf: start vector size does not match the instance");
  AlignMode align = align_mode_for(inst.field, inst.prior);

  // per-coordinate energy of the start point normalizes the step, as in
  // standard practice; a zero start falls back to the raw step
  double denom = x.squaredNorm() / static_cast<double>(x.size());
  if (!(denom > 0.0)) denom = 1.0;

  WfOutput out;
  out.records.reserve(static_cast<std::size_t>(cfg.max_iters));
  for (int t = 1; t <= cfg.max_iters; ++t) {
    double mu =
        cfg.mu0 * std::min(1.0, static_cast<double>(t) /
                                    static_cast<double>(cfg.ramp));
    x -= (mu / denom) * wf_gradient(inst, x);
    support_pull(x, inst.prior, pull);
    out.iterations = t;

    IterationRecord rec;
    rec.solver = name;
    rec.seed = inst.seed;
    rec.iter = t;
    rec.mse = aligned_mse(x, inst.signal, align);
    rec.mse_db = 10.0 * std::log10(std::max(rec.mse, 1e-300));
    out.records.push_back(std::move(rec));

    double loss = wf_loss(inst, x);
    if (!std::isfinite(loss) || loss > kDivergenceLoss) {
      out.diverged = true;
      break;
    }
  }
  out.estimate = std::move(x);
  return out;
}

}  // namespace

void WfConfig::validate() const {
  require_config(max_iters >= 1, "wf config: max_iters must be >= 1");
  require_config(mu0 >= 0.0 && std::isfinite(mu0),
                 "wf config: mu0 must be >= 0");
  require_config(ramp >= 1, "wf config: ramp must be >= 1");
  require_config(power_iters >= 1, "wf config: power_iters must be >= 1");
  require_config(threshold >= 0.0 && threshold <= 1.0,
                 "wf config: threshold must be in [0, 1]");
}

double wf_loss(const GqeInstance& inst, const Vec& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < inst.a_ops.size(); ++i) {
    cplx r = inst.y(static_cast<Eigen::Index>(i)) -
             x.dot(inst.a_ops[i] * x);
    acc += std::norm(r);
  }
  return acc / (2.0 * static_cast<double>(inst.a_ops.size()));
}

Vec wf_gradient(const GqeInstance& inst, const Vec& x) {
  Vec acc = Vec::Zero(x.size());
  for (std::size_t i = 0; i < inst.a_ops.size(); ++i) {
    Vec ax = inst.a_ops[i] * x;
    cplx r = inst.y(static_cast<Eigen::Index>(i)) - x.dot(ax);
    acc.noalias() += std::conj(r) * ax;
    acc.noalias() += r * (inst.a_ops[i].adjoint() * x);
  }
  return -acc / static_cast<double>(inst.a_ops.size());
}

Vec spectral_init(const GqeInstance& inst, const WfConfig& cfg) {
  cfg.validate();
  require_config(!inst.a_ops.empty(), "wf: instance has no operators");
  const Eigen::Index n = inst.a_ops[0].rows();
  const double m = static_cast<double>(inst.a_ops.size());

  Mat d = Mat::Zero(n, n);
  for (std::size_t i = 0; i < inst.a_ops.size(); ++i) {
    cplx y = inst.y(static_cast<Eigen::Index>(i));
    d.noalias() += std::conj(y) * inst.a_ops[i];
    d.noalias() += y * inst.a_ops[i].adjoint();
  }
  d /= 2.0 * m;

  Rng rng(mix_seed(mix_seed(inst.seed, kWfSpectralStream), cfg.seed));
  Vec v(n);
  for (Eigen::Index j = 0; j < n; ++j) v(j) = rng.unit_normal(inst.field);
  v.normalize();
  for (int k = 0; k < cfg.power_iters; ++k) {
    Vec w = d * v;
    double norm = w.norm();
    if (!(norm > 0.0)) break;  // zero data matrix: any direction is as good
    v = w / norm;
  }

  // least-squares magnitude against the observations: y_i ~ s2 * v^H A_i v.
  // The quadratic map is sign-blind, so a negative fit only occurs when the
  // data are noise-dominated; fall back to the second-moment estimate
  // E|y|^2 ~ ||x||^4 / n + v_w there.
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < inst.a_ops.size(); ++i) {
    cplx g = v.dot(inst.a_ops[i] * v);
    num += std::real(std::conj(inst.y(static_cast<Eigen::Index>(i))) * g);
    den += std::norm(g);
  }
  double s2 = den > 0.0 ? num / den : 0.0;
  if (!(s2 > 0.0)) {
    double my2 = inst.y.squaredNorm() / m;
    s2 = std::sqrt(std::max(my2 - inst.channel.noise_var, 0.0) *
                   static_cast<double>(n));
  }
  Vec x0 = std::sqrt(s2) * v;

  // The measurements are blind to a global sign flip, and gradient descent
  // never leaves the basin it starts in. When the prior has a nonzero mean
  // the signal's coordinate sum leans that way, so orient the start to match.
  // Zero-mean priors carry no preference; their ambiguity is handled by the
  // alignment mode when reporting error.
  double mu = inst.prior.mean_value();
  if (mu != 0.0 && mu * x0.sum().real() < 0.0) x0 = -x0;
  return x0;
}

WfOutput run_wf(const GqeInstance& inst, const WfConfig& cfg, const Vec& x0) {
  return descend(inst, cfg, x0, "wf", 0.0);
}

WfOutput run_twf(const GqeInstance& inst, const WfConfig& cfg, const Vec& x0) {
  return descend(inst, cfg, x0, "twf", cfg.threshold);
}

}  // namespace qmp
