#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "qmp_lab/model.hpp"
#include "qmp_lab/rng.hpp"

using namespace qmp;

TEST_SUITE("model") {

TEST_CASE("prior second moments") {
  CHECK(prior_second_moment(PriorSpec::make_gaussian(0.0, 1.0)) ==
        doctest::Approx(1.0));
  CHECK(prior_second_moment(PriorSpec::make_gaussian(2.0, 0.5)) ==
        doctest::Approx(4.5));
  CHECK(prior_second_moment(PriorSpec::make_bernoulli01(0.55)) ==
        doctest::Approx(0.55));
  // uniform(a,b): (a^2 + a b + b^2)/3
  CHECK(prior_second_moment(PriorSpec::make_uniform(0.1, 2.1)) ==
        doctest::Approx(1.5433333333333332).epsilon(1e-14));
}

TEST_CASE("prior validation rejects bad parameters") {
  CHECK_THROWS_AS(PriorSpec::make_gaussian(0.0, -1.0).validate(),
                  config_error);
  CHECK_THROWS_AS(PriorSpec::make_bernoulli01(1.5).validate(), config_error);
  CHECK_THROWS_AS(PriorSpec::make_uniform(2.0, 1.0).validate(), config_error);
}

TEST_CASE("instance generation is deterministic in the seed") {
  PriorSpec prior = PriorSpec::make_gaussian(0.0, 1.0);
  ChannelSpec chan{ChannelKind::awgn, 0.1};
  GqeInstance a =
      generate_instance(8, 12, prior, chan, Field::complex_circular, 1234);
  GqeInstance b =
      generate_instance(8, 12, prior, chan, Field::complex_circular, 1234);
  GqeInstance c =
      generate_instance(8, 12, prior, chan, Field::complex_circular, 1235);
  CHECK((a.signal - b.signal).norm() == 0.0);
  CHECK((a.y - b.y).norm() == 0.0);
  CHECK((a.a_ops[3] - b.a_ops[3]).norm() == 0.0);
  CHECK((a.signal - c.signal).norm() > 1e-6);
}

TEST_CASE("recorded z matches the quadratic form") {
  PriorSpec prior = PriorSpec::make_gaussian(0.0, 1.0);
  ChannelSpec chan{ChannelKind::awgn, 0.0};
  GqeInstance inst =
      generate_instance(6, 9, prior, chan, Field::complex_circular, 7);
  Vec z2 = forward(inst.a_ops, inst.signal);
  for (int i = 0; i < inst.m; ++i) {
    cplx z = inst.signal.dot(inst.a_ops[i] * inst.signal);
    CHECK(std::abs(z - inst.z(i)) < 1e-12);
    CHECK(std::abs(z2(i) - inst.z(i)) < 1e-12);
    // noiseless awgn passes z straight through
    CHECK(std::abs(inst.y(i) - inst.z(i)) < 1e-12);
  }
}

TEST_CASE("measurement matrices have variance 1/n entries") {
  PriorSpec prior = PriorSpec::make_gaussian(0.0, 1.0);
  ChannelSpec chan{ChannelKind::awgn, 0.0};
  GqeInstance inst =
      generate_instance(32, 40, prior, chan, Field::complex_circular, 99);
  double s2 = 0.0;
  double mean_re = 0.0;
  long cnt = 0;
  for (const Mat& a : inst.a_ops) {
    s2 += a.squaredNorm();
    mean_re += a.real().sum();
    cnt += a.size();
  }
  double var = s2 / static_cast<double>(cnt);
  // E|a_ij|^2 = 1/n; with m n^2 = 40960 samples a 5% band is ~7 sigma
  CHECK(var == doctest::Approx(1.0 / 32.0).epsilon(0.05));
  CHECK(std::abs(mean_re / static_cast<double>(cnt)) <
        5.0 / std::sqrt(32.0 * static_cast<double>(cnt)));
}

TEST_CASE("real field produces real draws, complex field circular ones") {
  ChannelSpec chan{ChannelKind::awgn, 0.1};
  GqeInstance inst = generate_instance(16, 8, PriorSpec::make_bernoulli01(0.55),
                                       chan, Field::real, 5);
  CHECK(inst.signal.imag().cwiseAbs().maxCoeff() == 0.0);
  CHECK(inst.a_ops[0].imag().cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < inst.n; ++i) {
    double v = inst.signal(i).real();
    CHECK((v == 0.0 || v == 1.0));
  }

  GqeInstance instc = generate_instance(16, 8, PriorSpec::make_gaussian(0, 1),
                                        chan, Field::complex_circular, 5);
  CHECK(instc.a_ops[0].imag().cwiseAbs().maxCoeff() > 1e-6);
  // circular symmetry: Re and Im parts carry half the energy each
  double re2 = instc.a_ops[0].real().squaredNorm();
  double im2 = instc.a_ops[0].imag().squaredNorm();
  CHECK(re2 / (re2 + im2) == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("discrete priors require the real field") {
  ChannelSpec chan{ChannelKind::awgn, 0.1};
  CHECK_THROWS_AS(generate_instance(4, 4, PriorSpec::make_bernoulli01(0.5),
                                    chan, Field::complex_circular, 1),
                  config_error);
  CHECK_THROWS_AS(generate_instance(4, 4, PriorSpec::make_uniform(0.0, 1.0),
                                    chan, Field::complex_circular, 1),
                  config_error);
}

TEST_CASE("instance save/load round trip") {
  PriorSpec prior = PriorSpec::make_gaussian(0.5, 2.0);
  ChannelSpec chan{ChannelKind::awgn, 0.25};
  GqeInstance inst =
      generate_instance(5, 7, prior, chan, Field::complex_circular, 42);

  std::filesystem::path tmp =
      std::filesystem::temp_directory_path() / "qmp_lab_model_rt.bin";
  save_instance(inst, tmp.string());
  GqeInstance back = load_instance(tmp.string());
  std::filesystem::remove(tmp);

  CHECK(back.n == inst.n);
  CHECK(back.m == inst.m);
  CHECK(back.field == inst.field);
  CHECK(back.seed == inst.seed);
  CHECK(back.prior.kind == inst.prior.kind);
  CHECK(back.channel.noise_var == inst.channel.noise_var);
  CHECK((back.signal - inst.signal).norm() == 0.0);
  CHECK((back.z - inst.z).norm() == 0.0);
  CHECK((back.y - inst.y).norm() == 0.0);
  for (int i = 0; i < inst.m; ++i) {
    CHECK((back.a_ops[i] - inst.a_ops[i]).norm() == 0.0);
  }
}

TEST_CASE("rng mix_seed decorrelates trial streams") {
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
  Rng r1(mix_seed(10, 1));
  Rng r2(mix_seed(10, 2));
  CHECK(r1.normal() != r2.normal());
}

}  // TEST_SUITE
