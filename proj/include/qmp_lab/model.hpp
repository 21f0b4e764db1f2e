#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qmp_lab/rng.hpp"
#include "qmp_lab/types.hpp"

namespace qmp {

enum class PriorKind { gaussian, bernoulli01, uniform };

// Separable prior on the signal coordinates. gaussian uses (mean, var);
// bernoulli01 places mass 1-rho at 0 and rho at 1; uniform is flat on [a, b].
// bernoulli01 and uniform are real-valued priors and are rejected in complex
// mode.
struct PriorSpec {
  PriorKind kind = PriorKind::gaussian;
  double mean = 0.0;
  double var = 1.0;
  double rho = 0.5;
  double a = 0.0;
  double b = 1.0;

  static PriorSpec make_gaussian(double mean, double var);
  static PriorSpec make_bernoulli01(double rho);
  static PriorSpec make_uniform(double a, double b);

  double mean_value() const;
  double variance() const;
  void validate() const;
};

// E[x^2] under the prior
double prior_second_moment(const PriorSpec& prior);

// draw one scalar from the prior (real part only for real-valued priors)
cplx sample_prior(const PriorSpec& prior, Field field, Rng& rng);

enum class ChannelKind { awgn };

struct ChannelSpec {
  ChannelKind kind = ChannelKind::awgn;
  double noise_var = 0.0;
  void validate() const;
};

// One synthetic problem: m sensing matrices A_i with iid zero-mean entries of
// variance 1/n, a planted signal drawn from the prior, the bilinear values
// z_i = x^H A_i x, and noisy observations y.
struct GqeInstance {
  Field field = Field::real;
  int n = 0;
  int m = 0;
  PriorSpec prior;
  ChannelSpec channel;
  std::uint64_t seed = 0;
  std::vector<Mat> a_ops;
  Vec signal;
  Vec z;
  Vec y;
};

GqeInstance generate_instance(int n, int m, const PriorSpec& prior,
                              const ChannelSpec& channel, Field field,
                              std::uint64_t seed);

// z_i = x^H A_i x for every operator
Vec forward(const std::vector<Mat>& a_ops, const Vec& x);

// versioned little-endian binary container
void save_instance(const GqeInstance& inst, const std::string& path);
GqeInstance load_instance(const std::string& path);

}  // namespace qmp
