#include "qmp_lab/qmp.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "qmp_lab/denoisers.hpp"
#include "qmp_lab/metrics.hpp"
#include "qmp_lab/rng.hpp"

namespace qmp {

void QmpConfig::validate() const {
  require_config(max_iters >= 1, "qmp: max_iters must be >= 1");
  require_config(damping >= 0.0 && damping <= 1.0,
                 "qmp: damping must be in [0, 1]");
  require_config(tol >= 0.0 && std::isfinite(tol), "qmp: tol must be >= 0");
  require_config(init_jitter >= 0.0 && std::isfinite(init_jitter),
                 "qmp: init_jitter must be >= 0");
}

namespace {

// mix consecutive extrinsic messages; log-variance interpolation keeps the
// damped variance positive without clamping
void damp_diag(DiagGaussian& fresh, const DiagGaussian& old, double eta) {
  if (eta <= 0.0) return;
  fresh.mean = (1.0 - eta) * fresh.mean + eta * old.mean;
  for (Eigen::Index i = 0; i < fresh.var.size(); ++i) {
    fresh.var(i) = std::exp((1.0 - eta) * std::log(fresh.var(i)) +
                            eta * std::log(old.var(i)));
  }
}

// s^H (C + coeff u u^H) s for a factored covariance
double quad_form(const Mat& c_base, double coeff, const Vec& u, const Vec& s) {
  double q = s.dot(c_base * s).real();
  if (coeff != 0.0) q += coeff * std::norm(u.dot(s));
  return q;
}

Mat materialize(const Mat& c_base, const MeasBelief& bel) {
  if (bel.coeff == 0.0) return c_base;
  return c_base + bel.coeff * (bel.u * bel.u.adjoint());
}

// (aligned mean - truth) / sqrt(var), one real number per coordinate; in
// complex mode the real part carries half the variance, hence the sqrt(2)
std::vector<double> normalized_residuals(const DiagGaussian& belief,
                                         const Vec& truth, Field field,
                                         AlignMode mode) {
  cplx s = align_factor(belief.mean, truth, mode);
  std::vector<double> out(static_cast<std::size_t>(truth.size()));
  double scale = field == Field::complex_circular ? std::sqrt(2.0) : 1.0;
  for (Eigen::Index j = 0; j < truth.size(); ++j) {
    double sd = std::sqrt(std::max(belief.var(j), 1e-300));
    out[static_cast<std::size_t>(j)] =
        scale * (s * belief.mean(j) - truth(j)).real() / sd;
  }
  return out;
}

}  // namespace

QmpState init_state(const GqeInstance& inst, const PriorSpec& prior,
                    const QmpConfig& cfg) {
  cfg.validate();
  prior.validate();
  const int n = inst.n;
  const int m = inst.m;
  require(static_cast<int>(inst.a_ops.size()) == m && inst.signal.size() == n,
          "qmp: malformed instance");

  QmpState s;
  s.cfg = cfg;
  s.t = 0;

  double t_x = prior_second_moment(prior);
  double jitter = cfg.init_jitter * std::sqrt(t_x);
  Rng rng(mix_seed(inst.seed, 0x716d7001ULL));  // solver stream, distinct
                                                // from the instance streams
  s.xt_plus.mean = Vec(n);
  cplx mu(prior.mean_value(), 0.0);
  for (int j = 0; j < n; ++j)
    s.xt_plus.mean(j) = mu + jitter * rng.unit_normal(inst.field);
  double v0 = std::max(prior.variance(), cfg.clamp.v_floor);
  s.xt_plus.var = RealVec::Constant(n, v0);

  s.broadcast.mean = s.xt_plus.mean;
  s.broadcast.cov = v0 * Mat::Identity(n, n);
  MeasBelief flat{s.xt_plus.mean, Vec::Zero(n), 0.0};
  s.bel1.assign(static_cast<std::size_t>(m), flat);
  s.bel2.assign(static_cast<std::size_t>(m), flat);
  s.a1 = RealVec::Zero(m);
  s.a2 = RealVec::Zero(m);
  s.g1.assign(static_cast<std::size_t>(m), Vec());
  s.g2.assign(static_cast<std::size_t>(m), Vec());

  s.op_fro2 = RealVec(m);
  for (int i = 0; i < m; ++i) s.op_fro2(i) = inst.a_ops[i].squaredNorm();

  // z beliefs from one bilinear moment evaluation at the initial beliefs;
  // with scalar covariances v0 I this is exact
  s.z_plus.mean = Vec(m);
  s.z_plus.var = RealVec(m);
  for (int i = 0; i < m; ++i) {
    const Mat& a = inst.a_ops[i];
    Vec am = a * s.xt_plus.mean;
    Vec ahm = a.adjoint() * s.xt_plus.mean;
    s.z_plus.mean(i) = s.xt_plus.mean.dot(am);
    s.z_plus.var(i) =
        v0 * v0 * s.op_fro2(i) + v0 * ahm.squaredNorm() + v0 * am.squaredNorm();
  }
  return s;
}

void backward_pass(QmpState& s, const GqeInstance& inst,
                   const ChannelSpec& channel) {
  channel.validate();
  const int n = inst.n;
  const int m = inst.m;
  const bool first = (s.t == 0);

  // channel posterior and the extrinsic z message it induces
  DiagGaussian z_hat = channel_posterior_awgn(inst.y, s.z_plus,
                                              channel.noise_var);
  DiagGaussian z_minus = ext(z_hat, s.z_plus, s.cfg.clamp, &s.diag);
  if (!first) damp_diag(z_minus, s.z_minus, s.cfg.damping);
  s.z_minus = std::move(z_minus);

  // per-measurement scalars and the natural-form aggregates
  s.aggregate.shift = Vec::Zero(n);
  s.aggregate.precision = Mat::Zero(n, n);
  for (int i = 0; i < m; ++i) {
    const Mat& a = inst.a_ops[i];
    const MeasBelief& b1 = s.bel1[i];
    const MeasBelief& b2 = s.bel2[i];

    Vec g1 = a * b1.mean;            // A m1
    Vec g2 = a.adjoint() * b2.mean;  // A^H m2
    Vec s1 = a.adjoint() * g1;       // A^H A m1
    Vec s2 = a * g2;                 // A A^H m2

    // Relative variance of each bilinear row around its mean direction.
    // When the belief means collapse toward zero (the symmetric fixed point
    // of a zero-mean prior) the ratio diverges; saturating it at the
    // variance ceiling keeps the data term harmlessly switched off instead
    // of overflowing downstream.
    auto a_scalar = [&](double den, double quad) {
      if (den <= 0.0) return 0.0;
      double a = quad / (den * den);
      if (!std::isfinite(a) || a > s.cfg.clamp.v_ceil)
        return s.cfg.clamp.v_ceil;
      return std::max(a, 0.0);
    };
    double den1 = g1.squaredNorm();
    double den2 = g2.squaredNorm();
    double a1 =
        a_scalar(den1, quad_form(s.broadcast.cov, b1.coeff, b1.u, s1));
    double a2 =
        a_scalar(den2, quad_form(s.broadcast.cov, b2.coeff, b2.u, s2));
    s.a1(i) = a1;
    s.a2(i) = a2;

    cplx mz = s.z_minus.mean(i);
    double vz = s.z_minus.var(i);
    double d1 = vz + std::norm(mz) * a1;
    double d2 = vz + std::norm(mz) * a2;

    s.aggregate.shift += (mz / d2) * g2 + (std::conj(mz) / d1) * g1;
    s.aggregate.precision.selfadjointView<Eigen::Lower>().rankUpdate(
        g2, 1.0 / d2);
    s.aggregate.precision.selfadjointView<Eigen::Lower>().rankUpdate(
        g1, 1.0 / d1);

    s.g1[i] = std::move(g1);
    s.g2[i] = std::move(g2);
  }
  Mat full_precision = s.aggregate.precision.selfadjointView<Eigen::Lower>();
  s.aggregate.precision = std::move(full_precision);

  // dense solve against the incoming signal belief, then the extrinsic
  // message toward the prior
  FullGaussian xt_hat;
  try {
    xt_hat = lex(s.aggregate, s.xt_plus, &s.diag);
  } catch (const numeric_error& e) {
    throw numeric_error("backward pass, iteration " + std::to_string(s.t + 1) +
                        ": " + e.what());
  }
  DiagGaussian xt_hat_diag{std::move(xt_hat.mean),
                           xt_hat.cov.diagonal().real()};
  DiagGaussian xt_minus = ext(xt_hat_diag, s.xt_plus, s.cfg.clamp, &s.diag);
  if (!first) damp_diag(xt_minus, s.xt_minus, s.cfg.damping);
  s.xt_minus = std::move(xt_minus);
}

void forward_pass(QmpState& s, const GqeInstance& inst,
                  const PriorSpec& prior) {
  const int m = inst.m;
  const int n = inst.n;

  // prior posterior (the running estimate) and its extrinsic message back
  // into the quadratic block
  s.xt_post = prior_posterior(prior, s.xt_minus);
  s.xt_plus = ext(s.xt_post, s.xt_minus, s.cfg.clamp, &s.diag);

  // broadcast dense belief shared by all leave-one-out downdates
  FullGaussian bc;
  try {
    bc = lex(s.aggregate, s.xt_plus, &s.diag);
  } catch (const numeric_error& e) {
    throw numeric_error("forward pass, iteration " + std::to_string(s.t + 1) +
                        ": " + e.what());
  }

  double tr_c = bc.cov.real().trace();
  double conc = (tr_c / n) * (tr_c / n);  // concentration proxy for
                                          // tr(A^H C A C) / ||A||_F^2

  for (int i = 0; i < m; ++i) {
    const Mat& a = inst.a_ops[i];
    cplx mz = s.z_minus.mean(i);
    double vz = s.z_minus.var(i);

    // remove each side's own rank-one term from the broadcast
    PexResult p1 = pex_factored(bc.mean, bc.cov, mz, vz, s.a2(i), s.g2[i]);
    PexResult p2 =
        pex_factored(bc.mean, bc.cov, std::conj(mz), vz, s.a1(i), s.g1[i]);
    if (p1.degenerate) ++s.diag.pex_fallbacks;
    if (p2.degenerate) ++s.diag.pex_fallbacks;
    s.bel1[i] = MeasBelief{std::move(p1.mean), std::move(p1.u), p1.coeff};
    s.bel2[i] = MeasBelief{std::move(p2.mean), std::move(p2.u), p2.coeff};

    // fresh bilinear z moments from the new pair
    const MeasBelief& b1 = s.bel1[i];
    const MeasBelief& b2 = s.bel2[i];
    Vec g1n = a * b1.mean;            // A m1'
    Vec g2n = a.adjoint() * b2.mean;  // A^H m2'
    s.z_plus.mean(i) = g2n.dot(b1.mean);  // m2'^H A m1'

    double var;
    if (s.cfg.exact_z_variance) {
      Mat c1 = materialize(bc.cov, b1);
      Mat c2 = materialize(bc.cov, b2);
      EzResult r = ez(g2n, a.adjoint() * c2 * a, b1.mean, c1);
      var = r.var;
    } else {
      // trace term via the factored covariances; the base x base part uses
      // the concentration value, the rank-one corrections are exact
      double term_tr = conc * s.op_fro2(i);
      Vec au1;
      if (b1.coeff != 0.0) {
        au1 = a * b1.u;
        term_tr += b1.coeff * au1.dot(bc.cov * au1).real();
      }
      if (b2.coeff != 0.0) {
        Vec ahu2 = a.adjoint() * b2.u;
        term_tr += b2.coeff * ahu2.dot(bc.cov * ahu2).real();
      }
      if (b1.coeff != 0.0 && b2.coeff != 0.0) {
        term_tr += b1.coeff * b2.coeff * std::norm(b2.u.dot(au1));
      }
      double term_mh = quad_form(bc.cov, b1.coeff, b1.u, g2n);
      double term_mx = quad_form(bc.cov, b2.coeff, b2.u, g1n);
      var = term_tr + term_mh + term_mx;
    }
    s.z_plus.var(i) = std::max(var, s.cfg.clamp.v_floor);
  }
  s.broadcast = std::move(bc);
  s.t += 1;
}

QmpOutput run(const GqeInstance& inst, const PriorSpec& prior,
              const ChannelSpec& channel, const QmpConfig& cfg) {
  QmpState s = init_state(inst, prior, cfg);
  AlignMode align = align_mode_for(inst.field, prior);

  QmpOutput out;
  out.records.reserve(static_cast<std::size_t>(cfg.max_iters));
  Vec prev_mean;
  for (int t = 1; t <= cfg.max_iters; ++t) {
    backward_pass(s, inst, channel);
    forward_pass(s, inst, prior);

    IterationRecord rec;
    rec.solver = "qmp";
    rec.seed = inst.seed;
    rec.iter = t;
    rec.mse = aligned_mse(s.xt_post.mean, inst.signal, align);
    rec.mse_db = 10.0 * std::log10(std::max(rec.mse, 1e-300));
    if (cfg.record_residuals) {
      rec.residual_samples =
          normalized_residuals(s.xt_minus, inst.signal, inst.field, align);
    }
    out.records.push_back(std::move(rec));

    if (cfg.tol > 0.0 && prev_mean.size() > 0) {
      double base = prev_mean.norm();
      if (base > 0.0 &&
          (s.xt_post.mean - prev_mean).norm() / base < cfg.tol) {
        out.reason = StopReason::tol_reached;
        break;
      }
    }
    prev_mean = s.xt_post.mean;
  }

  out.mean = s.xt_post.mean;
  out.var = s.xt_post.var;
  out.iterations = s.t;
  out.diag = s.diag;
  return out;
}

}  // namespace qmp
