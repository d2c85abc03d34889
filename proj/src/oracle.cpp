#include "rfedit/oracle.hpp"

#include <cmath>

namespace rfedit {

namespace {

struct WeightedMean {
  explicit WeightedMean(int dim) : sum_x0(Vec::Zero(dim)) {}

  // Streaming self-normalized accumulation with running max-shift.
  void add(double log_w, const Vec& x0) {
    if (log_w > log_max) {
      const double scale = std::exp(log_max - log_w);
      sum_w *= scale;
      sum_w2 *= scale * scale;
      sum_x0 *= scale;
      log_max = log_w;
    }
    const double w = std::exp(log_w - log_max);
    sum_w += w;
    sum_w2 += w * w;
    sum_x0 += w * x0;
    ++count;
  }

  double ess() const { return sum_w2 > 0.0 ? sum_w * sum_w / sum_w2 : 0.0; }

  double log_max = -std::numeric_limits<double>::infinity();
  double sum_w = 0.0;
  double sum_w2 = 0.0;
  Vec sum_x0;
  std::int64_t count = 0;
};

Vec finish(const GmmField& field, const Vec& x, double t, const WeightedMean& acc) {
  if (acc.ess() < std::min<double>(10.0, static_cast<double>(acc.count))) {
    throw UnreliableEstimateError("mc_velocity_oracle: effective sample size " +
                                  std::to_string(acc.ess()) + " too small at t=" + std::to_string(t));
  }
  const ScheduleCoeffs sc = field.schedule().eval(t);
  const Vec x0_mean = acc.sum_x0 / acc.sum_w;
  const Vec eps_mean = (x - sc.a * x0_mean) / sc.b;
  return sc.a_dot * x0_mean + sc.b_dot * eps_mean;
}

double log_weight(const Vec& x, const Vec& x0, double a, double b) {
  // log N(x; a x0, b^2 I) without the constant, which self-normalization drops.
  return -(x - a * x0).squaredNorm() / (2.0 * b * b);
}

}  // namespace

Vec mc_velocity_oracle(const GmmField& field, const Vec& x, double t, Prompt p,
                       std::int64_t n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("mc_velocity_oracle: n_samples must be >= 1");
  require_time_in_clamp(t);
  const ScheduleCoeffs sc = field.schedule().eval(t);
  const RngStream root(seed);
  WeightedMean acc(field.dim());

  // Hot loop: draw the mixture sample in place to keep the per-sample cost at
  // one child stream plus dim normals.
  const Mixture& mix = field.mixture(p);
  std::vector<double> weights;
  std::vector<Vec> sigmas;
  for (const auto& c : mix.components) {
    weights.push_back(c.weight);
    sigmas.push_back(c.var.cwiseSqrt());
  }
  const int dim = field.dim();
  Vec x0(dim);
  for (std::int64_t s = 0; s < n_samples; ++s) {
    RngStream stream = root.child(static_cast<std::uint64_t>(s));
    const std::size_t j = stream.pick(weights);
    const Vec& mean = mix.components[j].mean;
    const Vec& sigma = sigmas[j];
    double log_w = 0.0;
    for (int d = 0; d < dim; ++d) {
      x0[d] = mean[d] + sigma[d] * stream.normal();
      const double r = x[d] - sc.a * x0[d];
      log_w -= r * r;
    }
    acc.add(log_w / (2.0 * sc.b * sc.b), x0);
  }
  return finish(field, x, t, acc);
}

Vec mc_velocity_from_draws(const GmmField& field, const Vec& x, double t,
                           std::span<const Vec> x0_draws) {
  if (x0_draws.empty()) throw ConfigError("mc_velocity_from_draws: no draws given");
  require_time_in_clamp(t);
  const ScheduleCoeffs sc = field.schedule().eval(t);
  WeightedMean acc(field.dim());
  for (const Vec& x0 : x0_draws) {
    acc.add(log_weight(x, x0, sc.a, sc.b), x0);
  }
  return finish(field, x, t, acc);
}

CfmGapEstimate cfm_gap(const GmmField& field, Prompt p, std::int64_t n_samples,
                       const FieldOffset& offset, std::uint64_t seed) {
  if (n_samples < 100) throw ConfigError("cfm_gap: n_samples must be >= 100");
  const RngStream root(seed);
  double gap_sum = 0.0, gap_sq = 0.0;
  double cross_sum = 0.0, cross_sq = 0.0;
  double off_sq_sum = 0.0;
  for (std::int64_t s = 0; s < n_samples; ++s) {
    RngStream stream = root.child(static_cast<std::uint64_t>(s));
    const double t = stream.uniform(kTMin, kTMax);
    const ScheduleCoeffs sc = field.schedule().eval(t);
    const Vec x0 = field.sample_x0(p, stream);
    const Vec eps = stream.gaussian(field.dim());
    const Vec x_t = sc.a * x0 + sc.b * eps;
    const Vec target = sc.a_dot * x0 + sc.b_dot * eps;
    const Vec v = field.velocity(x_t, t, p);
    const Vec d = offset(x_t, t);

    const double base = (v - target).squaredNorm();
    const double perturbed = (v + d - target).squaredNorm();
    const double diff = perturbed - base;
    const double cross = 2.0 * d.dot(v - target);

    gap_sum += diff;
    gap_sq += diff * diff;
    cross_sum += cross;
    cross_sq += cross * cross;
    off_sq_sum += d.squaredNorm();
  }
  const auto n = static_cast<double>(n_samples);
  CfmGapEstimate out;
  out.n = n_samples;
  out.gap = gap_sum / n;
  out.cross_mean = cross_sum / n;
  out.offset_sq_mean = off_sq_sum / n;
  out.gap_se = std::sqrt(std::max(0.0, gap_sq / n - out.gap * out.gap) / n);
  out.cross_se = std::sqrt(std::max(0.0, cross_sq / n - out.cross_mean * out.cross_mean) / n);
  return out;
}

}  // namespace rfedit
