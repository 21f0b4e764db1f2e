#include <doctest.h>

#include <cmath>

#include "qmp_lab/denoisers.hpp"
#include "qmp_lab/metrics.hpp"
#include "qmp_lab/qmp.hpp"
#include "qmp_lab/rng.hpp"

using namespace qmp;

namespace {

Mat materialize_t(const Mat& base, const MeasBelief& b) {
  if (b.coeff == 0.0) return base;
  return base + b.coeff * (b.u * b.u.adjoint());
}

GqeInstance small_gaussian_instance(int n, int m, double noise_var,
                                    std::uint64_t seed, Field field) {
  return generate_instance(n, m, PriorSpec::make_gaussian(0.0, 1.0),
                           ChannelSpec{ChannelKind::awgn, noise_var}, field,
                           seed);
}

}  // namespace

TEST_SUITE("qmp") {

TEST_CASE("config validation") {
  QmpConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.damping = 1.5;
  CHECK_THROWS_AS(cfg.validate(), config_error);
  cfg.damping = 0.3;
  cfg.max_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), config_error);
}

TEST_CASE("initialization is deterministic and seed-sensitive") {
  GqeInstance inst =
      small_gaussian_instance(6, 10, 0.1, 42, Field::complex_circular);
  QmpConfig cfg;
  QmpState a = init_state(inst, inst.prior, cfg);
  QmpState b = init_state(inst, inst.prior, cfg);
  CHECK((a.xt_plus.mean - b.xt_plus.mean).norm() == 0.0);
  CHECK((a.z_plus.mean - b.z_plus.mean).norm() == 0.0);

  GqeInstance inst2 =
      small_gaussian_instance(6, 10, 0.1, 43, Field::complex_circular);
  QmpState c = init_state(inst2, inst2.prior, cfg);
  CHECK((a.xt_plus.mean - c.xt_plus.mean).norm() > 0.0);

  // shapes and init values
  CHECK(a.xt_plus.var.size() == 6);
  CHECK(a.xt_plus.var(0) == doctest::Approx(1.0));  // prior variance
  CHECK(a.z_plus.mean.size() == 10);
  CHECK(a.bel1.size() == 10);
  CHECK(a.bel1[3].coeff == 0.0);
  CHECK((a.bel1[3].mean - a.xt_plus.mean).norm() == 0.0);
  CHECK((a.broadcast.cov - Mat::Identity(6, 6)).cwiseAbs().maxCoeff() <
        1e-14);
}

TEST_CASE("init z beliefs match the bilinear moments of the init beliefs") {
  GqeInstance inst =
      small_gaussian_instance(5, 7, 0.0, 3, Field::complex_circular);
  QmpConfig cfg;
  QmpState s = init_state(inst, inst.prior, cfg);
  for (int i = 0; i < inst.m; ++i) {
    const Mat& a = inst.a_ops[i];
    // both sides hold (m0, v0 I); the factored path must agree with a
    // direct dense evaluation
    EzResult r = ez(a.adjoint() * s.xt_plus.mean,
                    a.adjoint() * s.broadcast.cov * a, s.xt_plus.mean,
                    s.broadcast.cov);
    CHECK(std::abs(r.mean - s.z_plus.mean(i)) < 1e-12);
    CHECK(s.z_plus.var(i) == doctest::Approx(r.var).epsilon(1e-10));
  }
}

TEST_CASE("backward pass aggregates equal an independent dense recomputation") {
  const int n = 10, m = 6;
  GqeInstance inst =
      small_gaussian_instance(n, m, 0.05, 17, Field::complex_circular);
  QmpConfig cfg;
  cfg.damping = 0.3;
  QmpState s = init_state(inst, inst.prior, cfg);

  // run one full iteration so beliefs are no longer flat, then a second
  // backward pass whose aggregates we check
  backward_pass(s, inst, inst.channel);
  forward_pass(s, inst, inst.prior);
  REQUIRE(s.diag.pex_fallbacks == 0);
  backward_pass(s, inst, inst.channel);

  Vec b_ref = Vec::Zero(n);
  Mat lam_ref = Mat::Zero(n, n);
  for (int i = 0; i < m; ++i) {
    const Mat& a = inst.a_ops[i];
    Mat c1 = materialize_t(s.broadcast.cov, s.bel1[i]);
    Mat c2 = materialize_t(s.broadcast.cov, s.bel2[i]);
    Vec g1 = a * s.bel1[i].mean;
    Vec g2 = a.adjoint() * s.bel2[i].mean;
    Vec s1 = a.adjoint() * g1;
    Vec s2 = a * g2;
    double a1 = s1.dot(c1 * s1).real() / std::pow(g1.squaredNorm(), 2);
    double a2 = s2.dot(c2 * s2).real() / std::pow(g2.squaredNorm(), 2);
    CHECK(s.a1(i) == doctest::Approx(a1).epsilon(1e-9));
    CHECK(s.a2(i) == doctest::Approx(a2).epsilon(1e-9));

    cplx mz = s.z_minus.mean(i);
    double vz = s.z_minus.var(i);
    double d1 = vz + std::norm(mz) * a1;
    double d2 = vz + std::norm(mz) * a2;
    b_ref += (mz / d2) * g2 + (std::conj(mz) / d1) * g1;
    lam_ref += (g2 * g2.adjoint()) / d2 + (g1 * g1.adjoint()) / d1;
  }
  double rel_b = (s.aggregate.shift - b_ref).norm() / b_ref.norm();
  double rel_l = (s.aggregate.precision - lam_ref).norm() / lam_ref.norm();
  CHECK(rel_b < 1e-8);
  CHECK(rel_l < 1e-8);
}

TEST_CASE("leave-one-out beliefs equal direct inversion") {
  const int n = 12, m = 8;
  GqeInstance inst =
      small_gaussian_instance(n, m, 0.05, 23, Field::complex_circular);
  QmpConfig cfg;
  QmpState s = init_state(inst, inst.prior, cfg);
  backward_pass(s, inst, inst.channel);
  forward_pass(s, inst, inst.prior);
  REQUIRE(s.diag.pex_fallbacks == 0);
  REQUIRE(s.diag.lex_jitter_rounds == 0);

  // rebuild the full normal equations behind the broadcast belief
  Mat h_full = s.aggregate.precision;
  Vec rhs_full = s.aggregate.shift;
  for (int j = 0; j < n; ++j) {
    h_full(j, j) += 1.0 / s.xt_plus.var(j);
    rhs_full(j) += s.xt_plus.mean(j) / s.xt_plus.var(j);
  }
  CHECK((s.broadcast.cov - h_full.inverse()).cwiseAbs().maxCoeff() < 1e-8);

  for (int i = 0; i < m; ++i) {
    cplx mz = s.z_minus.mean(i);
    double vz = s.z_minus.var(i);
    double d2 = vz + std::norm(mz) * s.a2(i);
    double d1 = vz + std::norm(mz) * s.a1(i);

    // type-1 belief removes the type-2 rank-one term, and vice versa
    Mat h1 = h_full - (s.g2[i] * s.g2[i].adjoint()) / d2;
    Vec r1 = rhs_full - (mz / d2) * s.g2[i];
    Mat c1_ref = h1.inverse();
    Vec m1_ref = c1_ref * r1;
    Mat c1 = materialize_t(s.broadcast.cov, s.bel1[i]);
    CHECK((c1 - c1_ref).norm() / c1_ref.norm() < 1e-6);
    CHECK((s.bel1[i].mean - m1_ref).norm() / m1_ref.norm() < 1e-6);

    Mat h2 = h_full - (s.g1[i] * s.g1[i].adjoint()) / d1;
    Vec r2 = rhs_full - (std::conj(mz) / d1) * s.g1[i];
    Mat c2_ref = h2.inverse();
    Vec m2_ref = c2_ref * r2;
    Mat c2 = materialize_t(s.broadcast.cov, s.bel2[i]);
    CHECK((c2 - c2_ref).norm() / c2_ref.norm() < 1e-6);
    CHECK((s.bel2[i].mean - m2_ref).norm() / m2_ref.norm() < 1e-6);
  }
}

TEST_CASE("z moments in exact mode match a monte carlo oracle") {
  GqeInstance inst =
      small_gaussian_instance(2, 1, 0.1, 5, Field::complex_circular);
  QmpConfig cfg;
  cfg.exact_z_variance = true;
  QmpState s = init_state(inst, inst.prior, cfg);
  backward_pass(s, inst, inst.channel);
  forward_pass(s, inst, inst.prior);

  const Mat& a = inst.a_ops[0];
  Mat c1 = materialize_t(s.broadcast.cov, s.bel1[0]);
  Mat c2 = materialize_t(s.broadcast.cov, s.bel2[0]);
  Vec m1 = s.bel1[0].mean;
  Vec m2 = s.bel2[0].mean;

  Eigen::LLT<Mat> l1(c1), l2(c2);
  REQUIRE(l1.info() == Eigen::Success);
  REQUIRE(l2.info() == Eigen::Success);

  const int trials = 400000;
  Rng mc(777);
  cplx mean_acc(0, 0);
  double m2_acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    Vec e1(2), e2(2);
    for (int j = 0; j < 2; ++j) {
      e1(j) = mc.cnormal();
      e2(j) = mc.cnormal();
    }
    Vec x1 = m1 + l1.matrixL() * e1;
    Vec x2 = m2 + l2.matrixL() * e2;
    cplx z = x2.dot(a * x1);  // x2^H A x1
    mean_acc += z;
    m2_acc += std::norm(z);
  }
  cplx mc_mean = mean_acc / static_cast<double>(trials);
  double mc_var = m2_acc / trials - std::norm(mc_mean);
  double tol = 5.0 * mc_var / std::sqrt(static_cast<double>(trials));
  CHECK(std::abs(s.z_plus.mean(0) - mc_mean) < tol);
  CHECK(std::abs(s.z_plus.var(0) - mc_var) < 3.0 * tol);
}

TEST_CASE("factored z variance tracks the exact trace at moderate size") {
  const int n = 48, m = 4 * n;
  GqeInstance inst =
      small_gaussian_instance(n, m, 0.1, 31, Field::complex_circular);
  QmpConfig base;

  QmpConfig exact = base;
  exact.exact_z_variance = true;

  QmpState sf = init_state(inst, inst.prior, base);
  QmpState se = init_state(inst, inst.prior, exact);
  backward_pass(sf, inst, inst.channel);
  backward_pass(se, inst, inst.channel);
  forward_pass(sf, inst, inst.prior);
  forward_pass(se, inst, inst.prior);

  // means carry no approximation
  CHECK((sf.z_plus.mean - se.z_plus.mean).norm() == 0.0);

  // the concentration shortcut only touches the base trace term; per
  // measurement it fluctuates at O(1/sqrt(N)), and the average is tight
  double ratio_sum = 0.0;
  for (int i = 0; i < m; ++i) {
    double r = sf.z_plus.var(i) / se.z_plus.var(i);
    CHECK(r > 0.5);
    CHECK(r < 2.0);
    ratio_sum += r;
  }
  CHECK(ratio_sum / m == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("damping off reproduces the plain extrinsic update") {
  GqeInstance inst =
      small_gaussian_instance(8, 16, 0.1, 9, Field::complex_circular);
  QmpConfig cfg;
  cfg.damping = 0.0;
  QmpState s = init_state(inst, inst.prior, cfg);
  backward_pass(s, inst, inst.channel);
  forward_pass(s, inst, inst.prior);
  DiagGaussian z_plus_snapshot = s.z_plus;
  backward_pass(s, inst, inst.channel);

  // recompute the undamped extrinsic z message directly
  DiagGaussian z_hat =
      channel_posterior_awgn(inst.y, z_plus_snapshot, inst.channel.noise_var);
  DiagGaussian z_ref = ext(z_hat, z_plus_snapshot);
  CHECK((s.z_minus.mean - z_ref.mean).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((s.z_minus.var - z_ref.var).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("damping mixes means and log variances") {
  GqeInstance inst =
      small_gaussian_instance(8, 16, 0.1, 9, Field::complex_circular);

  // reference: undamped second-iteration message
  QmpConfig plain;
  plain.damping = 0.0;
  QmpState sp = init_state(inst, inst.prior, plain);
  backward_pass(sp, inst, inst.channel);
  forward_pass(sp, inst, inst.prior);
  DiagGaussian old_minus = sp.z_minus;
  backward_pass(sp, inst, inst.channel);
  DiagGaussian fresh = sp.z_minus;

  QmpConfig damped;
  damped.damping = 0.4;
  QmpState sd = init_state(inst, inst.prior, damped);
  backward_pass(sd, inst, inst.channel);
  forward_pass(sd, inst, inst.prior);
  backward_pass(sd, inst, inst.channel);

  // first-iteration messages are identical (nothing to damp), so the mix
  // applies to the same (fresh, old) pair
  for (int i = 0; i < inst.m; ++i) {
    cplx want_m = 0.6 * fresh.mean(i) + 0.4 * old_minus.mean(i);
    double want_v = std::exp(0.6 * std::log(fresh.var(i)) +
                             0.4 * std::log(old_minus.var(i)));
    CHECK(std::abs(sd.z_minus.mean(i) - want_m) < 1e-10);
    CHECK(sd.z_minus.var(i) == doctest::Approx(want_v).epsilon(1e-9));
  }
}

TEST_CASE("real instances stay real throughout") {
  GqeInstance inst = generate_instance(
      12, 48, PriorSpec::make_bernoulli01(0.55),
      ChannelSpec{ChannelKind::awgn, 0.1}, Field::real, 13);
  QmpConfig cfg;
  QmpState s = init_state(inst, inst.prior, cfg);
  for (int t = 0; t < 3; ++t) {
    backward_pass(s, inst, inst.channel);
    forward_pass(s, inst, inst.prior);
    CHECK(s.z_plus.mean.imag().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.z_minus.mean.imag().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.xt_minus.mean.imag().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.xt_post.mean.imag().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.broadcast.cov.imag().cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("certain prior pins the estimate in a few iterations") {
  // rho = 1 puts all prior mass on the all-ones signal
  GqeInstance inst = generate_instance(
      16, 64, PriorSpec::make_bernoulli01(1.0),
      ChannelSpec{ChannelKind::awgn, 0.0}, Field::real, 2);
  QmpConfig cfg;
  cfg.max_iters = 5;
  cfg.tol = 0.0;
  QmpOutput out = run(inst, inst.prior, inst.channel, cfg);
  CHECK(out.records.back().mse < 1e-6);
}

TEST_CASE("solver recovers a planted 0-1 signal") {
  GqeInstance inst = generate_instance(
      32, 128, PriorSpec::make_bernoulli01(0.55),
      ChannelSpec{ChannelKind::awgn, 0.1}, Field::real, 1);
  QmpConfig cfg;
  QmpOutput out = run(inst, inst.prior, inst.channel, cfg);
  CHECK(out.records.size() >= 3);
  CHECK(out.reason == StopReason::tol_reached);  // converged before T
  CHECK(out.records.back().mse < 1e-2);
  // output mean/var mirror the last posterior
  CHECK(out.mean.size() == 32);
  CHECK(out.var.minCoeff() >= 0.0);
  // record bookkeeping
  CHECK(out.records.front().iter == 1);
  CHECK(out.records.front().solver == "qmp");
  CHECK(out.records.front().seed == 1);
  CHECK(out.records.front().mse_db ==
        doctest::Approx(10.0 * std::log10(out.records.front().mse)));
}

TEST_CASE("run is deterministic") {
  GqeInstance inst =
      small_gaussian_instance(16, 64, 0.1, 77, Field::complex_circular);
  QmpConfig cfg;
  cfg.max_iters = 6;
  QmpOutput a = run(inst, inst.prior, inst.channel, cfg);
  QmpOutput b = run(inst, inst.prior, inst.channel, cfg);
  CHECK((a.mean - b.mean).norm() == 0.0);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k)
    CHECK(a.records[k].mse == b.records[k].mse);
}

TEST_CASE("residual snapshots have the declared shape") {
  GqeInstance inst = generate_instance(
      24, 96, PriorSpec::make_bernoulli01(0.55),
      ChannelSpec{ChannelKind::awgn, 0.1}, Field::real, 4);
  QmpConfig cfg;
  cfg.max_iters = 4;
  cfg.record_residuals = true;
  QmpOutput out = run(inst, inst.prior, inst.channel, cfg);
  for (const IterationRecord& r : out.records) {
    CHECK(r.residual_samples.size() == 24);
  }
}

}  // TEST_SUITE
