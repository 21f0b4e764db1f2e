#include <doctest.h>

#include <cmath>

#include "qmp_lab/denoisers.hpp"
#include "test_util.hpp"

using namespace qmp;

namespace {

// quadrature oracle for a scalar prior density f on [lo, hi] observed through
// Gaussian noise of variance v around m: posterior mean and variance
void posterior_oracle(const std::function<double(double)>& density, double lo,
                      double hi, double m, double v, double& mean_out,
                      double& var_out) {
  auto joint = [&](double x) {
    return density(x) * std::exp(-0.5 * (x - m) * (x - m) / v);
  };
  // clip to the Gaussian mass so the adaptive rule never skips a narrow spike
  double sd = std::sqrt(v);
  lo = std::max(lo, std::min(hi, m - 14.0 * sd));
  hi = std::min(hi, std::max(lo, m + 14.0 * sd));
  double z = test_util::integrate(joint, lo, hi);
  double m1 =
      test_util::integrate([&](double x) { return x * joint(x); }, lo, hi) / z;
  double m2 =
      test_util::integrate([&](double x) { return x * x * joint(x); }, lo, hi) /
      z;
  mean_out = m1;
  var_out = m2 - m1 * m1;
}

DiagGaussian scalar_belief(cplx m, double v) {
  DiagGaussian g;
  g.mean = Vec::Constant(1, m);
  g.var = RealVec::Constant(1, v);
  return g;
}

}  // namespace

TEST_SUITE("denoisers") {

TEST_CASE("awgn channel posterior is the precision-weighted average") {
  Vec y = Vec::Constant(1, cplx(1.0, 0.0));
  DiagGaussian belief = scalar_belief(cplx(0.0, 0.0), 1.0);
  DiagGaussian post = channel_posterior_awgn(y, belief, 1.0);
  CHECK(post.mean(0).real() == doctest::Approx(0.5));
  CHECK(post.var(0) == doctest::Approx(0.5));

  // noiseless channel collapses onto the observation
  post = channel_posterior_awgn(y, belief, 0.0);
  CHECK(post.mean(0) == y(0));
  CHECK(post.var(0) == 0.0);
}

TEST_CASE("gaussian prior posterior") {
  DiagGaussian belief = scalar_belief(cplx(2.0, 0.0), 0.5);
  DiagGaussian post = prior_posterior_gaussian(belief, 0.0, 1.0);
  // v = 1/(2 + 1) = 1/3, m = v * (2/0.5) = 4/3
  CHECK(post.var(0) == doctest::Approx(1.0 / 3.0));
  CHECK(post.mean(0).real() == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("two-point prior frozen value") {
  // rho = 0.55, belief (0.3, 0.05); oracle from high-precision quadrature
  double mean = 0.0, var = 0.0;
  bernoulli01_posterior_scalar(0.3, 0.05, 0.55, 1e-11, mean, var);
  CHECK(mean == doctest::Approx(0.021895630087001447).epsilon(1e-12));
  CHECK(var == doctest::Approx(0.021416211470094645).epsilon(1e-12));
}

TEST_CASE("two-point prior tracks the exact discrete posterior") {
  // direct two-atom Bayes rule as an independent oracle
  for (double rho : {0.1, 0.55, 0.9}) {
    for (double m : {-0.5, 0.2, 0.8, 1.4}) {
      for (double v : {0.01, 0.2, 2.0}) {
        double p1 = rho * std::exp(-0.5 * (m - 1.0) * (m - 1.0) / v);
        double p0 = (1.0 - rho) * std::exp(-0.5 * m * m / v);
        double ref = p1 / (p0 + p1);
        double mean = 0.0, var = 0.0;
        bernoulli01_posterior_scalar(m, v, rho, 1e-11, mean, var);
        CHECK(mean == doctest::Approx(ref).epsilon(1e-10));
        CHECK(var == doctest::Approx(ref * (1.0 - ref)).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("two-point prior extreme rho pins the posterior") {
  double mean = 0.0, var = 0.0;
  bernoulli01_posterior_scalar(0.5, 0.1, 0.0, 1e-11, mean, var);
  CHECK(mean == 0.0);
  CHECK(var == doctest::Approx(1e-11));
  bernoulli01_posterior_scalar(0.5, 0.1, 1.0, 1e-11, mean, var);
  CHECK(mean == 1.0);
  CHECK(var == doctest::Approx(1e-11));
}

TEST_CASE("uniform prior frozen values") {
  DiagGaussian belief = scalar_belief(cplx(1.0, 0.0), 0.5);
  DiagGaussian post = prior_posterior_uniform(belief, 0.1, 2.1);
  CHECK(post.mean(0).real() == doctest::Approx(1.0493374473339312).epsilon(1e-10));
  CHECK(post.var(0) == doctest::Approx(0.25253189901985773).epsilon(1e-8));

  belief = scalar_belief(cplx(2.8, 0.0), 0.01);
  post = prior_posterior_uniform(belief, 0.1, 2.1);
  CHECK(post.mean(0).real() ==
        doctest::Approx(2.0862454386773499).epsilon(1e-10));
  CHECK(post.var(0) ==
        doctest::Approx(0.00018261911696448863).epsilon(1e-7));
}

TEST_CASE("uniform prior matches quadrature across a belief grid") {
  auto flat = [](double) { return 1.0; };
  for (double m : {-0.4, 0.3, 1.2, 2.6}) {
    for (double v : {0.02, 0.3, 3.0}) {
      double ref_m = 0.0, ref_v = 0.0;
      posterior_oracle(flat, 0.1, 2.1, m, v, ref_m, ref_v);
      DiagGaussian post =
          prior_posterior_uniform(scalar_belief(cplx(m, 0.0), v), 0.1, 2.1);
      CHECK(post.mean(0).real() == doctest::Approx(ref_m).epsilon(1e-8));
      CHECK(post.var(0) == doctest::Approx(ref_v).epsilon(1e-6));
    }
  }
}

TEST_CASE("dispatch routes each prior kind") {
  DiagGaussian belief = scalar_belief(cplx(0.3, 0.0), 0.05);

  DiagGaussian a = prior_posterior(PriorSpec::make_bernoulli01(0.55), belief);
  double mean = 0.0, var = 0.0;
  bernoulli01_posterior_scalar(0.3, 0.05, 0.55, 1e-11, mean, var);
  CHECK(a.mean(0).real() == doctest::Approx(mean));
  CHECK(a.var(0) == doctest::Approx(var));

  DiagGaussian b = prior_posterior(PriorSpec::make_gaussian(0.0, 1.0), belief);
  DiagGaussian b_ref = prior_posterior_gaussian(belief, 0.0, 1.0);
  CHECK(b.mean(0) == b_ref.mean(0));
  CHECK(b.var(0) == b_ref.var(0));

  DiagGaussian c = prior_posterior(PriorSpec::make_uniform(0.1, 2.1), belief);
  DiagGaussian c_ref = prior_posterior_uniform(belief, 0.1, 2.1);
  CHECK(c.mean(0) == c_ref.mean(0));
  CHECK(c.var(0) == c_ref.var(0));
}

TEST_CASE("complex gaussian prior keeps complex beliefs intact") {
  DiagGaussian belief = scalar_belief(cplx(0.4, -0.7), 0.25);
  DiagGaussian post = prior_posterior_gaussian(belief, 0.0, 1.0);
  // v = 1/(4 + 1) = 0.2, m = 0.2 * (m/0.25) = 0.8 m
  CHECK(post.var(0) == doctest::Approx(0.2));
  CHECK(std::abs(post.mean(0) - cplx(0.32, -0.56)) < 1e-14);
}

}  // TEST_SUITE
