#include "qmp_lab/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace qmp {

PriorSpec PriorSpec::make_gaussian(double mean, double var) {
  PriorSpec p;
  p.kind = PriorKind::gaussian;
  p.mean = mean;
  p.var = var;
  p.validate();
  return p;
}

PriorSpec PriorSpec::make_bernoulli01(double rho) {
  PriorSpec p;
  p.kind = PriorKind::bernoulli01;
  p.rho = rho;
  p.validate();
  return p;
}

PriorSpec PriorSpec::make_uniform(double a, double b) {
  PriorSpec p;
  p.kind = PriorKind::uniform;
  p.a = a;
  p.b = b;
  p.validate();
  return p;
}

double PriorSpec::mean_value() const {
  switch (kind) {
    case PriorKind::gaussian:
      return mean;
    case PriorKind::bernoulli01:
      return rho;
    case PriorKind::uniform:
      return 0.5 * (a + b);
  }
  throw error("PriorSpec: unknown kind");
}

double PriorSpec::variance() const {
  switch (kind) {
    case PriorKind::gaussian:
      return var;
    case PriorKind::bernoulli01:
      return rho * (1.0 - rho);
    case PriorKind::uniform:
      return (b - a) * (b - a) / 12.0;
  }
  throw error("PriorSpec: unknown kind");
}

void PriorSpec::validate() const {
  switch (kind) {
    case PriorKind::gaussian:
      require_config(std::isfinite(mean) && std::isfinite(var) && var > 0.0,
                     "gaussian prior: var must be positive and finite");
      return;
    case PriorKind::bernoulli01:
      require_config(rho >= 0.0 && rho <= 1.0 && std::isfinite(rho),
                     "bernoulli01 prior: rho must be in [0,1]");
      return;
    case PriorKind::uniform:
      require_config(std::isfinite(a) && std::isfinite(b) && a < b,
                     "uniform prior: need a < b");
      return;
  }
  throw error("PriorSpec: unknown kind");
}

double prior_second_moment(const PriorSpec& prior) {
  prior.validate();
  switch (prior.kind) {
    case PriorKind::gaussian:
      return prior.mean * prior.mean + prior.var;
    case PriorKind::bernoulli01:
      return prior.rho;
    case PriorKind::uniform:
      return (prior.a * prior.a + prior.a * prior.b + prior.b * prior.b) / 3.0;
  }
  throw error("PriorSpec: unknown kind");
}

cplx sample_prior(const PriorSpec& prior, Field field, Rng& rng) {
  switch (prior.kind) {
    case PriorKind::gaussian:
      return cplx(prior.mean, 0.0) +
             std::sqrt(prior.var) * rng.unit_normal(field);
    case PriorKind::bernoulli01:
      require_config(field == Field::real, "bernoulli01 prior is real-valued");
      return {rng.uniform() < prior.rho ? 1.0 : 0.0, 0.0};
    case PriorKind::uniform:
      require_config(field == Field::real, "uniform prior is real-valued");
      return {prior.a + (prior.b - prior.a) * rng.uniform(), 0.0};
  }
  throw error("PriorSpec: unknown kind");
}

void ChannelSpec::validate() const {
  require_config(kind == ChannelKind::awgn, "ChannelSpec: unknown kind");
  require_config(noise_var >= 0.0 && std::isfinite(noise_var),
                 "awgn channel: noise_var must be nonnegative and finite");
}

GqeInstance generate_instance(int n, int m, const PriorSpec& prior,
                              const ChannelSpec& channel, Field field,
                              std::uint64_t seed) {
  require_config(n >= 1 && m >= 1, "generate_instance: need n >= 1 and m >= 1");
  prior.validate();
  channel.validate();

  GqeInstance inst;
  inst.field = field;
  inst.n = n;
  inst.m = m;
  inst.prior = prior;
  inst.channel = channel;
  inst.seed = seed;

  Rng root(seed);
  Rng rng_a = root.fork(1);
  Rng rng_x = root.fork(2);
  Rng rng_w = root.fork(3);

  double scale = 1.0 / std::sqrt(static_cast<double>(n));
  inst.a_ops.resize(m);
  for (int i = 0; i < m; ++i) {
    Mat a(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) a(r, c) = scale * rng_a.unit_normal(field);
    inst.a_ops[i] = std::move(a);
  }

  inst.signal.resize(n);
  for (int j = 0; j < n; ++j)
    inst.signal(j) = sample_prior(prior, field, rng_x);

  inst.z = forward(inst.a_ops, inst.signal);

  inst.y = inst.z;
  if (channel.noise_var > 0.0) {
    double sw = std::sqrt(channel.noise_var);
    for (int i = 0; i < m; ++i) inst.y(i) += sw * rng_w.unit_normal(field);
  }
  return inst;
}

Vec forward(const std::vector<Mat>& a_ops, const Vec& x) {
  Vec z(static_cast<Eigen::Index>(a_ops.size()));
  for (std::size_t i = 0; i < a_ops.size(); ++i) {
    require(a_ops[i].rows() == x.size() && a_ops[i].cols() == x.size(),
            "forward: operator/signal dimension mismatch");
    z(static_cast<Eigen::Index>(i)) = x.dot(a_ops[i] * x);
  }
  return z;
}

namespace {

constexpr char kMagic[8] = {'G', 'Q', 'E', 'B', 'I', 'N', '0', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(os, v);
}

double get_f64(std::istream& is) {
  std::uint64_t v = get_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

void put_cvec(std::ostream& os, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    put_f64(os, v(i).real());
    put_f64(os, v(i).imag());
  }
}

Vec get_cvec(std::istream& is, Eigen::Index n) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double re = get_f64(is);
    double im = get_f64(is);
    v(i) = {re, im};
  }
  return v;
}

}  // namespace

void save_instance(const GqeInstance& inst, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "save_instance: cannot open " + path);
  os.write(kMagic, 8);
  put_u64(os, inst.field == Field::real ? 0 : 1);
  put_u64(os, static_cast<std::uint64_t>(inst.n));
  put_u64(os, static_cast<std::uint64_t>(inst.m));
  put_u64(os, static_cast<std::uint64_t>(inst.prior.kind));
  put_f64(os, inst.prior.mean);
  put_f64(os, inst.prior.var);
  put_f64(os, inst.prior.rho);
  put_f64(os, inst.prior.a);
  put_f64(os, inst.prior.b);
  put_u64(os, static_cast<std::uint64_t>(inst.channel.kind));
  put_f64(os, inst.channel.noise_var);
  put_u64(os, inst.seed);
  put_cvec(os, inst.signal);
  put_cvec(os, inst.z);
  put_cvec(os, inst.y);
  for (const Mat& a : inst.a_ops)
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        put_f64(os, a(r, c).real());
        put_f64(os, a(r, c).imag());
      }
  require(os.good(), "save_instance: write failure on " + path);
}

GqeInstance load_instance(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "load_instance: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  require(is.good() && std::memcmp(magic, kMagic, 8) == 0,
          "load_instance: bad header in " + path);
  GqeInstance inst;
  inst.field = get_u64(is) == 0 ? Field::real : Field::complex_circular;
  inst.n = static_cast<int>(get_u64(is));
  inst.m = static_cast<int>(get_u64(is));
  inst.prior.kind = static_cast<PriorKind>(get_u64(is));
  inst.prior.mean = get_f64(is);
  inst.prior.var = get_f64(is);
  inst.prior.rho = get_f64(is);
  inst.prior.a = get_f64(is);
  inst.prior.b = get_f64(is);
  inst.channel.kind = static_cast<ChannelKind>(get_u64(is));
  inst.channel.noise_var = get_f64(is);
  inst.seed = get_u64(is);
  require(inst.n >= 1 && inst.m >= 1, "load_instance: corrupt dimensions");
  inst.signal = get_cvec(is, inst.n);
  inst.z = get_cvec(is, inst.m);
  inst.y = get_cvec(is, inst.m);
  inst.a_ops.resize(inst.m);
  for (int i = 0; i < inst.m; ++i) {
    Mat a(inst.n, inst.n);
    for (int r = 0; r < inst.n; ++r)
      for (int c = 0; c < inst.n; ++c) {
        double re = get_f64(is);
        double im = get_f64(is);
        a(r, c) = {re, im};
      }
    inst.a_ops[i] = std::move(a);
  }
  require(is.good(), "load_instance: truncated file " + path);
  inst.prior.validate();
  inst.channel.validate();
  return inst;
}

}  // namespace qmp
