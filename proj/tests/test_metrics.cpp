#include <doctest.h>

#include <cmath>

#include "qmp_lab/metrics.hpp"
#include "qmp_lab/rng.hpp"

using namespace qmp;

TEST_SUITE("metrics") {

TEST_CASE("alignment mode selection") {
  CHECK(align_mode_for(Field::complex_circular,
                       PriorSpec::make_gaussian(0, 1)) == AlignMode::phase);
  CHECK(align_mode_for(Field::real, PriorSpec::make_gaussian(0, 1)) ==
        AlignMode::sign);
  CHECK(align_mode_for(Field::real, PriorSpec::make_bernoulli01(0.55)) ==
        AlignMode::none);
  CHECK(align_mode_for(Field::real, PriorSpec::make_uniform(0.1, 2.1)) ==
        AlignMode::none);
  // support straddling zero keeps the sign ambiguity
  CHECK(align_mode_for(Field::real, PriorSpec::make_uniform(-1.0, 1.0)) ==
        AlignMode::sign);
}

TEST_CASE("aligned mse resolves the stated ambiguities") {
  Rng rng(11);
  const int n = 16;
  Vec truth(n);
  for (int i = 0; i < n; ++i) truth(i) = rng.cnormal();

  // exact match
  CHECK(aligned_mse(truth, truth, AlignMode::phase) ==
        doctest::Approx(0.0).epsilon(1e-14));
  // sign flip vanishes in sign mode, not in none mode
  Vec neg = -truth;
  CHECK(aligned_mse(neg, truth, AlignMode::sign) ==
        doctest::Approx(0.0).epsilon(1e-14));
  CHECK(aligned_mse(neg, truth, AlignMode::none) > 0.1);
  // arbitrary phase vanishes in phase mode
  cplx rot = std::polar(1.0, 0.25 * M_PI);
  Vec rotated = rot * truth;
  CHECK(aligned_mse(rotated, truth, AlignMode::phase) <= 1e-14);
  CHECK(aligned_mse(rotated, truth, AlignMode::sign) > 0.01);
}

TEST_CASE("aligned mse is the minimum over the ambiguity group") {
  Rng rng(12);
  const int n = 8;
  Vec truth(n), est(n);
  for (int i = 0; i < n; ++i) {
    truth(i) = rng.cnormal();
    est(i) = truth(i) + 0.3 * rng.cnormal();
  }
  double opt = aligned_mse(est, truth, AlignMode::phase);
  for (int k = 0; k < 64; ++k) {
    cplx rot = std::polar(1.0, 2.0 * M_PI * k / 64.0);
    double trial = (rot * est - truth).squaredNorm() / n;
    CHECK(opt <= trial + 1e-12);
  }
}

TEST_CASE("qq data pairs sorted samples with normal plotting positions") {
  std::vector<double> r = {0.5, -1.0, 2.0, 0.0};
  QqData q = qq_data(r);
  CHECK(q.sample.size() == 4);
  CHECK(q.sample[0] == -1.0);
  CHECK(q.sample[3] == 2.0);
  // theoretical quantiles at (k - 0.5)/4 are antisymmetric
  CHECK(q.theoretical[0] == doctest::Approx(-q.theoretical[3]).epsilon(1e-12));
  CHECK(q.theoretical[1] == doctest::Approx(-q.theoretical[2]).epsilon(1e-12));
  CHECK(q.theoretical[0] < q.theoretical[1]);
}

TEST_CASE("qq data of a large normal sample hugs the identity") {
  Rng rng(99);
  std::vector<double> r(10000);
  for (double& x : r) x = rng.normal();
  QqData q = qq_data(r);
  double worst = 0.0;
  for (std::size_t k = 0; k < q.sample.size(); ++k)
    worst = std::max(worst, std::abs(q.sample[k] - q.theoretical[k]));
  // extreme order statistics wobble most; 0.35 is a loose but safe band
  CHECK(worst < 0.35);
  double mid_worst = 0.0;
  for (std::size_t k = 1000; k < 9000; ++k)
    mid_worst = std::max(mid_worst, std::abs(q.sample[k] - q.theoretical[k]));
  CHECK(mid_worst < 0.1);
}

TEST_CASE("ks test accepts normal samples and rejects shifted ones") {
  Rng rng(7);
  int accept = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> r(500);
    for (double& x : r) x = rng.normal();
    double d = ks_statistic_normal(r);
    if (ks_pvalue(d, r.size()) > 0.01) ++accept;
  }
  CHECK(accept >= 18);  // level 0.01 test; 20 independent tries

  std::vector<double> shifted(500);
  for (double& x : shifted) x = rng.normal() + 1.0;
  double d = ks_statistic_normal(shifted);
  CHECK(ks_pvalue(d, shifted.size()) < 1e-6);
}

TEST_CASE("ks p-value matches tabulated asymptotics") {
  // Kolmogorov distribution: P(K > 1.3581) ~ 0.05 at large n; with the
  // finite-n correction the 5% critical D for n = 100 is about 0.1340
  CHECK(ks_pvalue(0.1340, 100) == doctest::Approx(0.05).epsilon(0.02));
  CHECK(ks_pvalue(0.5, 100) < 1e-15);
  CHECK(ks_pvalue(0.01, 100) == doctest::Approx(1.0).epsilon(1e-6));
}

}  // TEST_SUITE
