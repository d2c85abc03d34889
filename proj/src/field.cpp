#include "rfedit/field.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace rfedit {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

void validate_mixture(const Mixture& m, int dim, int prompt_index) {
  const std::string where = "prompt " + std::to_string(prompt_index);
  if (m.components.empty()) throw ConfigError(where + ": mixture has no components");
  double total = 0.0;
  for (const auto& c : m.components) {
    if (!(c.weight > 0.0)) throw ConfigError(where + ": component weights must be positive");
    if (c.mean.size() != dim || c.var.size() != dim) {
      throw ShapeError(where + ": component mean/var dimension mismatch");
    }
    if (!c.mean.allFinite() || !c.var.allFinite()) {
      throw ConfigError(where + ": component parameters must be finite");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError(where + ": component weights must sum to 1");
  }
}

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

GmmField::GmmField(Schedule schedule, std::vector<Mixture> prompts)
    : schedule_(std::move(schedule)), prompts_(std::move(prompts)) {
  if (prompts_.empty()) throw ConfigError("field needs at least one prompt mixture");
  dim_ = static_cast<int>(prompts_.front().components.front().mean.size());
  const auto n_prompts = static_cast<double>(prompts_.size());
  for (std::size_t p = 0; p < prompts_.size(); ++p) {
    for (auto& c : prompts_[p].components) {
      c.var = c.var.cwiseMax(kSigmaMinSq);
    }
    validate_mixture(prompts_[p], dim_, static_cast<int>(p));
    for (const auto& c : prompts_[p].components) {
      MixtureComponent shared = c;
      shared.weight = c.weight / n_prompts;
      null_.components.push_back(std::move(shared));
    }
  }
}

const Mixture& GmmField::mixture(Prompt p) const {
  if (p.is_null()) return null_;
  if (p.id() >= prompt_count()) {
    throw ConfigError("prompt id " + std::to_string(p.id()) + " not registered (have " +
                      std::to_string(prompt_count()) + ")");
  }
  return prompts_[static_cast<std::size_t>(p.id())];
}

void GmmField::check_input(const Vec& x, double t, Prompt p) const {
  require_time_in_clamp(t);
  if (x.size() != dim_) {
    throw ShapeError("latent dimension " + std::to_string(x.size()) + " does not match field dimension " +
                     std::to_string(dim_));
  }
  mixture(p);  // validates the prompt id
}

Posterior GmmField::posterior(const Vec& x, double t, Prompt p) const {
  check_input(x, t, p);
  const ScheduleCoeffs sc = schedule_.eval(t);
  const Mixture& mix = mixture(p);
  const std::size_t k = mix.components.size();

  std::vector<double> logits(k);
  std::vector<Vec> means(k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto& c = mix.components[j];
    const Vec s2 = (sc.a * sc.a) * c.var.array().matrix() + Vec::Constant(dim_, sc.b * sc.b);
    const Vec resid = x - sc.a * c.mean;
    double lp = std::log(c.weight);
    for (int d = 0; d < dim_; ++d) {
      lp += -0.5 * (kLogTwoPi + std::log(s2[d])) - 0.5 * resid[d] * resid[d] / s2[d];
    }
    logits[j] = lp;
    means[j] = c.mean + (sc.a * c.var.array() / s2.array()).matrix().cwiseProduct(resid);
  }

  const double log_z = log_sum_exp(logits);
  Posterior out;
  out.log_density = log_z;
  out.responsibilities.resize(k);
  out.x0_mean = Vec::Zero(dim_);
  for (std::size_t j = 0; j < k; ++j) {
    const double r = std::exp(logits[j] - log_z);
    out.responsibilities[j] = r;
    out.x0_mean += r * means[j];
  }
  out.eps_mean = (x - sc.a * out.x0_mean) / sc.b;
  return out;
}

Vec GmmField::posterior_x0(const Vec& x, double t, Prompt p) const {
  return posterior(x, t, p).x0_mean;
}

Vec GmmField::posterior_eps(const Vec& x, double t, Prompt p) const {
  return posterior(x, t, p).eps_mean;
}

Vec GmmField::velocity(const Vec& x, double t, Prompt p) const {
  const ScheduleCoeffs sc = schedule_.eval(t);
  const Posterior post = posterior(x, t, p);
  return sc.a_dot * post.x0_mean + sc.b_dot * post.eps_mean;
}

Vec GmmField::cfg_velocity(const Vec& x, double t, Prompt p, double w) const {
  if (!(w >= 0.0)) throw ConfigError("cfg scale must be non-negative");
  if (p.is_null()) {
    if (w != 1.0) {
      std::cerr << "rfedit: warning: cfg scale " << w << " has no effect on the null prompt\n";
    }
    return velocity(x, t, p);
  }
  if (w == 1.0) return velocity(x, t, p);
  const Vec v_cond = velocity(x, t, p);
  const Vec v_null = velocity(x, t, Prompt::unconditional());
  return w * (v_cond - v_null) + v_null;
}

Vec GmmField::eps_prediction(const Vec& x, double t, Prompt p, double cfg_w) const {
  return eps_from_velocity(schedule_.eval(t), cfg_velocity(x, t, p, cfg_w), x);
}

double GmmField::log_marginal(const Vec& x, double t, Prompt p) const {
  return posterior(x, t, p).log_density;
}

Vec GmmField::score(const Vec& x, double t, Prompt p) const {
  check_input(x, t, p);
  const ScheduleCoeffs sc = schedule_.eval(t);
  const Posterior post = posterior(x, t, p);
  const Mixture& mix = mixture(p);
  Vec g = Vec::Zero(dim_);
  for (std::size_t j = 0; j < mix.components.size(); ++j) {
    const auto& c = mix.components[j];
    const Vec s2 = (sc.a * sc.a) * c.var.array().matrix() + Vec::Constant(dim_, sc.b * sc.b);
    g -= post.responsibilities[j] * ((x - sc.a * c.mean).array() / s2.array()).matrix();
  }
  return g;
}

Mat GmmField::velocity_jacobian(const Vec& x, double t, Prompt p) const {
  check_input(x, t, p);
  const ScheduleCoeffs sc = schedule_.eval(t);
  const Posterior post = posterior(x, t, p);
  const Mixture& mix = mixture(p);
  const std::size_t k = mix.components.size();

  // dE[x0|x]/dx = sum_j r_j diag(gamma_j) + sum_j m_j (grad r_j)^T with
  // gamma_j = a var_j / s2_j and grad r_j = r_j (g_j - sum_k r_k g_k),
  // g_j the per-component Gaussian score.
  std::vector<Vec> comp_means(k), comp_scores(k), gammas(k);
  Vec mean_score = Vec::Zero(dim_);
  for (std::size_t j = 0; j < k; ++j) {
    const auto& c = mix.components[j];
    const Vec s2 = (sc.a * sc.a) * c.var.array().matrix() + Vec::Constant(dim_, sc.b * sc.b);
    const Vec resid = x - sc.a * c.mean;
    gammas[j] = (sc.a * c.var.array() / s2.array()).matrix();
    comp_means[j] = c.mean + gammas[j].cwiseProduct(resid);
    comp_scores[j] = -(resid.array() / s2.array()).matrix();
    mean_score += post.responsibilities[j] * comp_scores[j];
  }

  Mat m_prime = Mat::Zero(dim_, dim_);
  for (std::size_t j = 0; j < k; ++j) {
    const double r = post.responsibilities[j];
    m_prime += r * gammas[j].asDiagonal();
    m_prime += comp_means[j] * (r * (comp_scores[j] - mean_score)).transpose();
  }

  // v = a_dot E[x0|x] + b_dot (x - a E[x0|x]) / b
  return sc.a_dot * m_prime + (sc.b_dot / sc.b) * (Mat::Identity(dim_, dim_) - sc.a * m_prime);
}

Mat GmmField::cfg_velocity_jacobian(const Vec& x, double t, Prompt p, double w) const {
  if (!(w >= 0.0)) throw ConfigError("cfg scale must be non-negative");
  if (p.is_null() || w == 1.0) return velocity_jacobian(x, t, p);
  const Mat j_cond = velocity_jacobian(x, t, p);
  const Mat j_null = velocity_jacobian(x, t, Prompt::unconditional());
  return w * (j_cond - j_null) + j_null;
}

Vec GmmField::sample_x0(Prompt p, RngStream& rng) const {
  const Mixture& mix = mixture(p);
  std::vector<double> weights;
  weights.reserve(mix.components.size());
  for (const auto& c : mix.components) weights.push_back(c.weight);
  const auto& c = mix.components[rng.pick(weights)];
  return c.mean + c.var.cwiseSqrt().cwiseProduct(rng.gaussian(dim_));
}

Vec eps_from_velocity(const ScheduleCoeffs& c, const Vec& v, const Vec& x) {
  require_same_dim(v, x, "eps_from_velocity");
  const double det = c.b_dot * c.a - c.a_dot * c.b;
  if (c.a == 0.0 || det == 0.0) {
    throw DomainError("eps_from_velocity: singular parameterization (a or b_dot*a - a_dot*b is zero)");
  }
  return (c.a / det) * (v - (c.a_dot / c.a) * x);
}

Vec velocity_from_eps(const ScheduleCoeffs& c, const Vec& eps, const Vec& x) {
  require_same_dim(eps, x, "velocity_from_eps");
  const double det = c.b_dot * c.a - c.a_dot * c.b;
  if (c.a == 0.0 || det == 0.0) {
    throw DomainError("velocity_from_eps: singular parameterization (a or b_dot*a - a_dot*b is zero)");
  }
  return (c.a_dot / c.a) * x + (det / c.a) * eps;
}

}  // namespace rfedit
