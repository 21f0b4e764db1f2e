#include "qmp_lab/se.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "qmp_lab/denoisers.hpp"
#include "qmp_lab/math_util.hpp"
#include "qmp_lab/rng.hpp"

namespace qmp {

namespace {

// rng stream tags; keep them distinct from the solver's streams
constexpr std::uint64_t kSeTrueStream = 0x5e100000ULL;
constexpr std::uint64_t kSeEnsembleStream = 0x5e200000ULL;
constexpr std::uint64_t kSeCenterStream = 0x5e300000ULL;
constexpr std::uint64_t kSeFreshOpsStream = 0x5e400000ULL;

double clamp_variance(double v, const ClampPolicy& clamp) {
  return std::min(std::max(v, clamp.v_floor), clamp.v_ceil);
}

// scalar extrinsic with the same conventions as the vector ext(): a posterior
// that is exact (zero variance) pins the extrinsic at the floor instead of
// running a degenerate division against an input that also sits at the floor
double scalar_extrinsic(double v_hat_raw, double v_in,
                        const ClampPolicy& clamp) {
  if (v_hat_raw <= 0.0) return clamp.v_floor;
  return ext_var_scalar(v_hat_raw, v_in, clamp);
}

// posterior mean of the matched scalar denoiser at observation zeta with
// noise variance v
double scalar_posterior_mean(const PriorSpec& prior, double zeta, double v,
                             double var_floor) {
  switch (prior.kind) {
    case PriorKind::gaussian:
      return (v * prior.mean + prior.var * zeta) / (prior.var + v);
    case PriorKind::bernoulli01: {
      double mean = 0.0;
      double var = 0.0;
      bernoulli01_posterior_scalar(zeta, v, prior.rho, var_floor, mean, var);
      return mean;
    }
    case PriorKind::uniform:
      return truncated_normal_moments(prior.a, prior.b, zeta, v, var_floor)
          .mean;
  }
  return 0.0;
}

// posterior variance of the matched scalar denoiser at the same observation
double scalar_posterior_var(const PriorSpec& prior, double zeta, double v,
                            double var_floor) {
  switch (prior.kind) {
    case PriorKind::gaussian:
      return prior.var * v / (prior.var + v);
    case PriorKind::bernoulli01: {
      double mean = 0.0;
      double var = 0.0;
      bernoulli01_posterior_scalar(zeta, v, prior.rho, var_floor, mean, var);
      return var;
    }
    case PriorKind::uniform:
      return truncated_normal_moments(prior.a, prior.b, zeta, v, var_floor)
          .var;
  }
  return 0.0;
}

// steep regions of the scalar posterior mean, as (center, scale) pairs; the
// integration panels are refined toward them so fixed-order quadrature stays
// accurate when the denoiser sharpens
struct Feature {
  double center;
  double scale;
};

std::vector<Feature> posterior_mean_features(const PriorSpec& prior,
                                             double v) {
  switch (prior.kind) {
    case PriorKind::gaussian:
      return {};
    case PriorKind::bernoulli01: {
      if (prior.rho <= 0.0 || prior.rho >= 1.0) return {};  // pinned denoiser
      // the logistic argument log(rho/(1-rho)) + (2 zeta - 1)/(2v) crosses
      // zero here and saturates over a width of order v
      double logit = std::log(prior.rho / (1.0 - prior.rho));
      return {{0.5 - v * logit, v}};
    }
    case PriorKind::uniform:
      // the truncated-normal mean bends near the interval ends at the scale
      // of the observation noise
      return {{prior.a, std::sqrt(v)}, {prior.b, std::sqrt(v)}};
  }
  return {};
}

// composite Gauss-Legendre over [lo, hi] with panel edges placed on a
// geometric ladder around each feature, so every panel is smooth at its own
// scale; nodes is the per-panel order
double refined_panels(const std::function<double(double)>& f, double lo,
                      double hi, const std::vector<Feature>& features,
                      int nodes) {
  std::vector<double> edges{lo, hi};
  for (const Feature& ft : features) {
    if (ft.center > lo && ft.center < hi) edges.push_back(ft.center);
    for (double off = 8.0 * ft.scale;; off *= 2.0) {
      bool inside = false;
      for (double e : {ft.center - off, ft.center + off}) {
        if (e > lo && e < hi) {
          edges.push_back(e);
          inside = true;
        }
      }
      if (!inside && off > hi - lo) break;
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  QuadratureRule unit = gauss_legendre(nodes, 0.0, 1.0);
  double acc = 0.0;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    double width = edges[p + 1] - edges[p];
    for (std::size_t k = 0; k < unit.nodes.size(); ++k)
      acc += width * unit.weights[k] * f(edges[p] + width * unit.nodes[k]);
  }
  return acc;
}

// E_eps[ m_hat(x + sqrt(v) eps)^2 ]: the Gaussian-weighted squared posterior
// mean, integrated over a 12-sigma window around x
double weighted_sq_mean(const PriorSpec& prior, double x, double v,
                        double var_floor, int nodes) {
  double sd = std::sqrt(v);
  double norm = 0.39894228040143267794 / sd;  // 1/sqrt(2 pi v)
  auto f = [&](double zeta) {
    double m = scalar_posterior_mean(prior, zeta, v, var_floor);
    double u = zeta - x;
    return norm * std::exp(-0.5 * u * u / v) * m * m;
  };
  return refined_panels(f, x - 12.0 * sd, x + 12.0 * sd,
                        posterior_mean_features(prior, v), nodes);
}

// E_eps[ Var(x | x + sqrt(v) eps) ]: the Gaussian-weighted posterior
// variance over the same refined window; the variance peaks and decays at
// the same features the mean bends at
double weighted_post_var(const PriorSpec& prior, double x, double v,
                         double var_floor, int nodes) {
  double sd = std::sqrt(v);
  double norm = 0.39894228040143267794 / sd;  // 1/sqrt(2 pi v)
  auto f = [&](double zeta) {
    double pv = scalar_posterior_var(prior, zeta, v, var_floor);
    double u = zeta - x;
    return norm * std::exp(-0.5 * u * u / v) * pv;
  };
  return refined_panels(f, x - 12.0 * sd, x + 12.0 * sd,
                        posterior_mean_features(prior, v), nodes);
}

// mean over the eigenvalues of a PSD matrix of 1/(lambda + shift); equals
// (1/n) Tr[(G + shift I)^{-1}]
double shifted_inverse_mean(const Mat& gram, double shift) {
  Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw numeric_error(
        "eigen expectation: eigensolver failed on a " +
        std::to_string(gram.rows()) + "x" + std::to_string(gram.cols()) +
        " Gram combination");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < es.eigenvalues().size(); ++j) {
    // tiny negative eigenvalues are roundoff; the matrix is PSD by construction
    double lam = std::max(es.eigenvalues()(j), 0.0);
    acc += 1.0 / (lam + shift);
  }
  return acc / static_cast<double>(es.eigenvalues().size());
}

// (1/w1) M1 M1^H + (1/w2) M2 M2^H with the designated first column removed
Mat gram_combination(const Mat& m1, const Mat& m2, double w1, double w2,
                     LeaveOut leave_out) {
  Eigen::Index n = m1.rows() > 0 ? m1.rows() : m2.rows();
  Mat g = Mat::Zero(n, n);
  auto add = [&](const Mat& m, double w, bool drop_first) {
    Eigen::Index first = drop_first ? 1 : 0;
    if (m.cols() <= first) return;
    const auto block = m.rightCols(m.cols() - first);
    g.noalias() += block * block.adjoint() / w;
  };
  add(m1, w1, leave_out == LeaveOut::type1_first);
  add(m2, w2, leave_out == LeaveOut::type2_first);
  return g;
}

// draw one trial's mean columns and images; ops may be trial-specific
void sample_trial(const Vec& central, double spread1, double spread2,
                  const std::vector<Mat>& ops, Field field, Rng& rng, Mat& x1,
                  Mat& x2, Mat& a1, Mat& a2) {
  const Eigen::Index n = central.size();
  const Eigen::Index m = static_cast<Eigen::Index>(ops.size());
  double sd1 = std::sqrt(spread1);
  double sd2 = std::sqrt(spread2);
  x1.resize(n, m);
  x2.resize(n, m);
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index j = 0; j < n; ++j)
      x1(j, k) = central(j) + sd1 * rng.unit_normal(field);
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index j = 0; j < n; ++j)
      x2(j, k) = central(j) + sd2 * rng.unit_normal(field);
  a1.resize(n, m);
  a2.resize(n, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    a1.col(k).noalias() = ops[static_cast<std::size_t>(k)] * x1.col(k);
    a2.col(k).noalias() = ops[static_cast<std::size_t>(k)].adjoint() * x2.col(k);
  }
}

std::vector<Mat> fresh_op_set(int n, int m, Field field, std::uint64_t seed) {
  Rng rng(seed);
  double scale = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<Mat> ops(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    Mat a(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) a(r, c) = scale * rng.unit_normal(field);
    ops[static_cast<std::size_t>(i)] = std::move(a);
  }
  return ops;
}

// relative-variance scalar of a mean ensemble: the spread scalar over the
// mean power per measurement. Diverges when the ensemble means vanish (the
// row directions carry no signal); saturate at the variance ceiling so the
// data terms switch off instead of overflowing.
double relative_variance(double c, double mean_power, const ClampPolicy& clamp) {
  if (mean_power <= 0.0) return clamp.v_ceil;
  double a = c / mean_power;
  if (!std::isfinite(a) || a > clamp.v_ceil) return clamp.v_ceil;
  return std::max(a, 0.0);
}

}  // namespace

void SeConfig::validate() const {
  require_config(iters >= 1, "se config: iters must be at least 1");
  require_config(trials >= 1, "se config: trials must be at least 1");
  require_config(gh_nodes >= 1, "se config: gh_nodes must be at least 1");
  require_config(clamp.v_floor > 0.0 && clamp.v_floor < clamp.v_ceil,
                 "se config: clamp bounds must satisfy 0 < floor < ceil");
}

double qz_integral(double v_z_plus, double t_z, const ChannelSpec& channel,
                   const SeConfig& cfg) {
  cfg.validate();
  channel.validate();
  require(std::isfinite(v_z_plus) && v_z_plus > 0.0,
          "qz integral: v_z_plus must be positive");
  require(std::isfinite(t_z) && t_z > 0.0, "qz integral: t_z must be positive");
  if (v_z_plus > t_z)
    throw numeric_error(
        "qz integral: v_z_plus exceeds the second-moment budget t_z; the "
        "split sqrt(t_z - v_z_plus) is undefined");

  // awgn conjugacy: given the split location mu = sqrt(t_z - v+) xi, the
  // observation is y = mu + sqrt(v+ + v_w) eta and the conditional mean is
  // E[z|y] = mu + kappa (y - mu) with kappa = v+/(v+ + v_w). The quadrature
  // below integrates |E[z|y]|^2 over (xi, eta); both fields give the same
  // value because the squared modulus splits into independent halves.
  double vw = channel.noise_var;
  double kappa = v_z_plus / (v_z_plus + vw);
  double mu_sd = std::sqrt(std::max(t_z - v_z_plus, 0.0));
  double y_sd = std::sqrt(v_z_plus + vw);
  QuadratureRule gh = gauss_hermite(cfg.gh_nodes);
  double acc = 0.0;
  for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
    for (std::size_t j = 0; j < gh.nodes.size(); ++j) {
      double cm = mu_sd * gh.nodes[i] + kappa * y_sd * gh.nodes[j];
      acc += gh.weights[i] * gh.weights[j] * cm * cm;
    }
  }
  return acc;
}

double qx_integral(double v_x_minus, const PriorSpec& prior,
                   const SeConfig& cfg) {
  cfg.validate();
  prior.validate();
  require(std::isfinite(v_x_minus) && v_x_minus > 0.0,
          "qx integral: v_x_minus must be positive");

  double sd = std::sqrt(v_x_minus);
  double floor = cfg.clamp.v_floor;
  switch (prior.kind) {
    case PriorKind::gaussian: {
      // the posterior mean is linear in the observation, so a single
      // Gauss-Hermite pass over zeta ~ N(mean, var + v) is exact
      QuadratureRule gh = gauss_hermite(cfg.gh_nodes);
      double zeta_sd = std::sqrt(prior.var + v_x_minus);
      double acc = 0.0;
      for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
        double zeta = prior.mean + zeta_sd * gh.nodes[k];
        double m = scalar_posterior_mean(prior, zeta, v_x_minus, floor);
        acc += gh.weights[k] * m * m;
      }
      return acc;
    }
    case PriorKind::bernoulli01:
      return (1.0 - prior.rho) *
                 weighted_sq_mean(prior, 0.0, v_x_minus, floor, cfg.gh_nodes) +
             prior.rho *
                 weighted_sq_mean(prior, 1.0, v_x_minus, floor, cfg.gh_nodes);
    case PriorKind::uniform: {
      // outer prior average over [a, b]; the convolved integrand bends near
      // the ends at the noise scale, so the panels are refined there too
      auto inner = [&](double x) {
        return weighted_sq_mean(prior, x, v_x_minus, floor, cfg.gh_nodes);
      };
      std::vector<Feature> ends{{prior.a, sd}, {prior.b, sd}};
      return refined_panels(inner, prior.a, prior.b, ends, cfg.gh_nodes) /
             (prior.b - prior.a);
    }
  }
  return 0.0;
}

double vhat_z_integral(double v_z_plus, double t_z, const ChannelSpec& channel,
                       const SeConfig& cfg) {
  cfg.validate();
  channel.validate();
  require(std::isfinite(v_z_plus) && v_z_plus > 0.0,
          "vhat_z integral: v_z_plus must be positive");
  require(std::isfinite(t_z) && t_z > 0.0,
          "vhat_z integral: t_z must be positive");
  // awgn conjugacy again: Var(z|y) = v+ v_w / (v+ + v_w) regardless of the
  // observation or the split location, so no quadrature is needed. t_z only
  // participates through the argument contract shared with qz_integral.
  double vw = channel.noise_var;
  return v_z_plus * vw / (v_z_plus + vw);
}

double vhat_x_integral(double v_x_minus, const PriorSpec& prior,
                       const SeConfig& cfg) {
  cfg.validate();
  prior.validate();
  require(std::isfinite(v_x_minus) && v_x_minus > 0.0,
          "vhat_x integral: v_x_minus must be positive");

  double floor = cfg.clamp.v_floor;
  switch (prior.kind) {
    case PriorKind::gaussian:
      // conjugate posterior: the variance is constant in the observation
      return prior.var * v_x_minus / (prior.var + v_x_minus);
    case PriorKind::bernoulli01:
      return (1.0 - prior.rho) * weighted_post_var(prior, 0.0, v_x_minus,
                                                   floor, cfg.gh_nodes) +
             prior.rho * weighted_post_var(prior, 1.0, v_x_minus, floor,
                                           cfg.gh_nodes);
    case PriorKind::uniform: {
      double sd = std::sqrt(v_x_minus);
      auto inner = [&](double x) {
        return weighted_post_var(prior, x, v_x_minus, floor, cfg.gh_nodes);
      };
      std::vector<Feature> ends{{prior.a, sd}, {prior.b, sd}};
      return refined_panels(inner, prior.a, prior.b, ends, cfg.gh_nodes) /
             (prior.b - prior.a);
    }
  }
  return 0.0;
}

double eigen_expectation(const std::vector<Mat>& ens_a1,
                         const std::vector<Mat>& ens_a2, double w1, double w2,
                         double shift, LeaveOut leave_out) {
  require(!ens_a1.empty() && ens_a1.size() == ens_a2.size(),
          "eigen expectation: ensembles must be non-empty and equally sized");
  require(w1 > 0.0 && w2 > 0.0 && std::isfinite(w1) && std::isfinite(w2),
          "eigen expectation: w1 and w2 must be positive finite");
  require(shift > 0.0 && std::isfinite(shift),
          "eigen expectation: shift must be positive finite");
  double acc = 0.0;
  for (std::size_t r = 0; r < ens_a1.size(); ++r) {
    require(ens_a1[r].rows() == ens_a2[r].rows() && ens_a1[r].rows() > 0,
            "eigen expectation: trial matrices must share a positive row "
            "count");
    acc += shifted_inverse_mean(
        gram_combination(ens_a1[r], ens_a2[r], w1, w2, leave_out), shift);
  }
  return acc / static_cast<double>(ens_a1.size());
}

void sample_mean_ensembles(SeState& se, const std::vector<Mat>& a_ops,
                           const SeConfig& cfg, int t) {
  cfg.validate();
  require(!a_ops.empty(), "sample_mean_ensembles: empty operator set");
  require(!se.central.empty(), "sample_mean_ensembles: state has no trials");
  const std::size_t trials = se.central.size();
  double spread1 = std::max(se.v_x_plus - se.c1, 0.0);
  double spread2 = std::max(se.v_x_plus - se.c2, 0.0);

  SeEnsembles& ens = se.ens;
  ens.x1.resize(trials);
  ens.x2.resize(trials);
  ens.a1.resize(trials);
  ens.a2.resize(trials);
  ens.fro2_x1 = ens.fro2_x2 = ens.fro2_a1 = ens.fro2_a2 = 0.0;
  double ops_fro2 = 0.0;
  for (const Mat& a : a_ops) ops_fro2 += a.squaredNorm();
  ens.fro2_ops = ops_fro2;

  std::uint64_t iter_seed =
      mix_seed(cfg.seed, kSeEnsembleStream + static_cast<std::uint64_t>(t));
  for (std::size_t r = 0; r < trials; ++r) {
    Rng rng(mix_seed(iter_seed, static_cast<std::uint64_t>(r)));
    sample_trial(se.central[r], spread1, spread2, a_ops, se.field, rng,
                 ens.x1[r], ens.x2[r], ens.a1[r], ens.a2[r]);
    ens.fro2_x1 += ens.x1[r].squaredNorm();
    ens.fro2_x2 += ens.x2[r].squaredNorm();
    ens.fro2_a1 += ens.a1[r].squaredNorm();
    ens.fro2_a2 += ens.a2[r].squaredNorm();
  }
  double inv = 1.0 / static_cast<double>(trials);
  ens.fro2_x1 *= inv;
  ens.fro2_x2 *= inv;
  ens.fro2_a1 *= inv;
  ens.fro2_a2 *= inv;
}

namespace {

// fresh-matrices counterpart: each trial gets its own operator draw, replayed
// deterministically every iteration
void sample_mean_ensembles_fresh(SeState& se, int n, int m,
                                 const SeConfig& cfg, int t) {
  const std::size_t trials = se.central.size();
  double spread1 = std::max(se.v_x_plus - se.c1, 0.0);
  double spread2 = std::max(se.v_x_plus - se.c2, 0.0);

  SeEnsembles& ens = se.ens;
  ens.x1.resize(trials);
  ens.x2.resize(trials);
  ens.a1.resize(trials);
  ens.a2.resize(trials);
  ens.fro2_x1 = ens.fro2_x2 = ens.fro2_a1 = ens.fro2_a2 = 0.0;
  ens.fro2_ops = 0.0;

  std::uint64_t iter_seed =
      mix_seed(cfg.seed, kSeEnsembleStream + static_cast<std::uint64_t>(t));
  for (std::size_t r = 0; r < trials; ++r) {
    std::vector<Mat> ops = fresh_op_set(
        n, m, se.field,
        mix_seed(cfg.seed, kSeFreshOpsStream + static_cast<std::uint64_t>(r)));
    for (const Mat& a : ops) ens.fro2_ops += a.squaredNorm();
    Rng rng(mix_seed(iter_seed, static_cast<std::uint64_t>(r)));
    sample_trial(se.central[r], spread1, spread2, ops, se.field, rng,
                 ens.x1[r], ens.x2[r], ens.a1[r], ens.a2[r]);
    ens.fro2_x1 += ens.x1[r].squaredNorm();
    ens.fro2_x2 += ens.x2[r].squaredNorm();
    ens.fro2_a1 += ens.a1[r].squaredNorm();
    ens.fro2_a2 += ens.a2[r].squaredNorm();
  }
  double inv = 1.0 / static_cast<double>(trials);
  ens.fro2_x1 *= inv;
  ens.fro2_x2 *= inv;
  ens.fro2_a1 *= inv;
  ens.fro2_a2 *= inv;
  ens.fro2_ops *= inv;
}

}  // namespace

SeTrajectory run_se(const std::vector<Mat>& a_ops, const PriorSpec& prior,
                    const ChannelSpec& channel, Field field,
                    const SeConfig& cfg) {
  cfg.validate();
  prior.validate();
  channel.validate();
  require_config(!a_ops.empty(), "se: need at least one operator");
  require_config(
      field == Field::real || prior.kind == PriorKind::gaussian,
      "se: the 0-1 and interval priors are real-valued; use the real field");
  const int n = static_cast<int>(a_ops[0].rows());
  const int m = static_cast<int>(a_ops.size());
  for (const Mat& a : a_ops)
    require_config(a.rows() == n && a.cols() == n,
                   "se: operators must be square and equally sized");

  SeState se;
  se.field = field;
  se.t_x = prior_second_moment(prior);
  se.t_a = 1.0 / static_cast<double>(n);
  // z = x^H A x is quadratic in the signal, so its second moment carries the
  // prior second moment twice: E|z|^2 -> t_a (sum_j |x_j|^2)^2 = n^2 t_a t_x^2
  // as the cross terms concentrate
  se.t_z = static_cast<double>(n) * static_cast<double>(n) * se.t_a * se.t_x *
           se.t_x;
  se.v_x_plus = std::max(prior.variance(), cfg.clamp.v_floor);
  se.c1 = se.v_x_plus;
  se.c2 = se.v_x_plus;
  se.x_true.resize(static_cast<std::size_t>(cfg.trials));
  se.central.resize(static_cast<std::size_t>(cfg.trials));
  for (int r = 0; r < cfg.trials; ++r) {
    Rng rng(mix_seed(cfg.seed, kSeTrueStream + static_cast<std::uint64_t>(r)));
    Vec x(n);
    for (int j = 0; j < n; ++j) x(j) = sample_prior(prior, field, rng);
    se.x_true[static_cast<std::size_t>(r)] = std::move(x);
    se.central[static_cast<std::size_t>(r)] =
        Vec::Constant(n, cplx(prior.mean_value(), 0.0));
  }

  SeTrajectory traj;
  traj.t_x = se.t_x;
  traj.t_a = se.t_a;
  traj.t_z = se.t_z;
  traj.iters.reserve(static_cast<std::size_t>(cfg.iters));

  const double inv_m = 1.0 / static_cast<double>(m);
  for (int t = 1; t <= cfg.iters; ++t) {
    if (cfg.fresh_matrices)
      sample_mean_ensembles_fresh(se, n, m, cfg, t);
    else
      sample_mean_ensembles(se, a_ops, cfg, t);
    SeEnsembles& ens = se.ens;

    SeIterate it;
    it.iter = t;

    // z pseudo-prior variance from the current spread scalars and ensembles;
    // sampling jitter can graze the second-moment budget, so cap at t_z
    double v_z_plus = inv_m * (se.c1 * se.c2 * ens.fro2_ops +
                               se.c1 * ens.fro2_a2 + se.c2 * ens.fro2_a1);
    v_z_plus = std::min(std::max(v_z_plus, cfg.clamp.v_floor), se.t_z);
    se.v_z_plus = v_z_plus;
    it.v_z_plus = v_z_plus;

    // q_z is recorded for inspection; the variance recursion uses the direct
    // posterior variance, which stays exact when v_z_plus sits many orders
    // below t_z and the difference t_z - q_z would be pure cancellation
    it.q_z = qz_integral(v_z_plus, se.t_z, channel, cfg);
    it.v_hat_z_minus = vhat_z_integral(v_z_plus, se.t_z, channel, cfg);
    it.v_z_minus = scalar_extrinsic(it.v_hat_z_minus, v_z_plus, cfg.clamp);
    it.w_z_minus = se.t_z + it.v_z_minus;

    // the solver's relative-variance scalar is (s^H C s)/||g||^4 with
    // s = A^H A m and g = A m; for variance-1/n operators E||A^H A m||^2 is
    // 2||m||^2 (second moment of the squared-Gram spectrum) while
    // E||A m||^2 = ||m||^2, so the spread scalar enters with a factor two
    constexpr double kGramFourthMoment = 2.0;
    it.a1 = relative_variance(kGramFourthMoment * se.c1, inv_m * ens.fro2_x1,
                              cfg.clamp);
    it.a2 = relative_variance(kGramFourthMoment * se.c2, inv_m * ens.fro2_x2,
                              cfg.clamp);
    it.w1 = it.v_z_minus + it.w_z_minus * it.a1;
    it.w2 = it.v_z_minus + it.w_z_minus * it.a2;

    // per-trial Gram combinations, reused for the three eigen expectations
    std::vector<Mat> grams(ens.a1.size());
    for (std::size_t r = 0; r < ens.a1.size(); ++r)
      grams[r] =
          gram_combination(ens.a1[r], ens.a2[r], it.w1, it.w2, LeaveOut::none);

    double sum_full = 0.0;
    for (const Mat& g : grams)
      sum_full += shifted_inverse_mean(g, 1.0 / se.v_x_plus);
    double inv_trials = 1.0 / static_cast<double>(grams.size());
    it.v_hat_x_minus = sum_full * inv_trials;
    it.v_x_minus = scalar_extrinsic(it.v_hat_x_minus, se.v_x_plus, cfg.clamp);

    it.q_x = qx_integral(it.v_x_minus, prior, cfg);
    it.v_hat_x_plus = vhat_x_integral(it.v_x_minus, prior, cfg);
    double v_x_plus_next =
        scalar_extrinsic(it.v_hat_x_plus, it.v_x_minus, cfg.clamp);
    it.v_x_plus = v_x_plus_next;

    // spread scalars for the next iteration: leave-one-out Gram combinations
    // at the updated shift
    double shift_next = 1.0 / v_x_plus_next;
    double sum_c1 = 0.0;
    double sum_c2 = 0.0;
    for (std::size_t r = 0; r < grams.size(); ++r) {
      Vec col2 = ens.a2[r].col(0);
      Vec col1 = ens.a1[r].col(0);
      Mat loo1 = grams[r] - (col2 * col2.adjoint()) / it.w2;
      Mat loo2 = grams[r] - (col1 * col1.adjoint()) / it.w1;
      sum_c1 += shifted_inverse_mean(loo1, shift_next);
      sum_c2 += shifted_inverse_mean(loo2, shift_next);
    }
    it.c1 = std::max(sum_c1 * inv_trials, 0.0);
    it.c2 = std::max(sum_c2 * inv_trials, 0.0);

    // propagate the centers: each trial observes its fixed prior draw through
    // the scalar channel at v_x_minus, denoises, and strips the input back out
    std::uint64_t center_seed =
        mix_seed(cfg.seed, kSeCenterStream + static_cast<std::uint64_t>(t));
    double post_var = clamp_variance(it.v_hat_x_plus, cfg.clamp);
    for (std::size_t r = 0; r < se.central.size(); ++r) {
      Rng rng(mix_seed(center_seed, static_cast<std::uint64_t>(r)));
      const Vec& x = se.x_true[r];
      DiagGaussian belief;
      belief.mean.resize(n);
      double sd = std::sqrt(it.v_x_minus);
      for (int j = 0; j < n; ++j)
        belief.mean(j) = x(j) + sd * rng.unit_normal(field);
      belief.var = RealVec::Constant(n, it.v_x_minus);
      DiagGaussian posterior;
      posterior.mean = prior_posterior(prior, belief).mean;
      posterior.var = RealVec::Constant(n, post_var);
      se.central[r] = ext(posterior, belief, cfg.clamp).mean;
    }

    se.v_x_plus = v_x_plus_next;
    se.c1 = it.c1;
    se.c2 = it.c2;
    traj.iters.push_back(it);

    // the sampled columns are only needed within the iteration
    for (Mat& x1 : ens.x1) x1.resize(0, 0);
    for (Mat& x2 : ens.x2) x2.resize(0, 0);
  }
  return traj;
}

}  // namespace qmp
