#pragma once

#include <vector>

#include "rfedit/common.hpp"
#include "rfedit/rng.hpp"
#include "rfedit/schedule.hpp"

namespace rfedit {

/// Condition selector: either a registered prompt id or the unconditional
/// (null) prompt, whose mixture is the equal-weight union of all prompts.
class Prompt {
 public:
  static Prompt conditional(int id) {
    if (id < 0) throw ConfigError("prompt id must be non-negative");
    Prompt p;
    p.id_ = id;
    return p;
  }
  static Prompt unconditional() { return Prompt(); }

  bool is_null() const { return id_ < 0; }
  int id() const {
    if (is_null()) throw ConfigError("null prompt has no id");
    return id_;
  }

  friend bool operator==(const Prompt&, const Prompt&) = default;

 private:
  int id_ = -1;
};

struct MixtureComponent {
  double weight = 1.0;
  Vec mean;
  Vec var;  // diagonal variance, floored at kSigmaMinSq
};

struct Mixture {
  std::vector<MixtureComponent> components;
};

/// Posterior summary of x0 given x_t = x under one prompt's mixture.
struct Posterior {
  Vec x0_mean;
  Vec eps_mean;
  std::vector<double> responsibilities;
  double log_density = 0.0;  // log of the marginal p_t(x)
};

/// Closed-form marginal velocity field over prompt-conditioned diagonal
/// Gaussian mixtures. Plays the role of a pretrained model: velocity(),
/// its eps-prediction view, scores, and classifier-free guidance are all
/// exact, so numerical claims can be checked against them.
///
/// With x_t = a x0 + b eps, the posterior over x0 is again a diagonal GMM:
///   r_j(x) ∝ w_j N(x; a mu_j, a^2 var_j + b^2)          (log-sum-exp)
///   m_j(x) = mu_j + a var_j / (a^2 var_j + b^2) * (x - a mu_j)
/// and velocity(x) = a_dot E[x0|x] + b_dot E[eps|x] with
/// E[eps|x] = (x - a E[x0|x]) / b.
class GmmField {
 public:
  GmmField(Schedule schedule, std::vector<Mixture> prompts);

  int dim() const { return dim_; }
  int prompt_count() const { return static_cast<int>(prompts_.size()); }
  const Schedule& schedule() const { return schedule_; }
  const Mixture& mixture(Prompt p) const;

  Posterior posterior(const Vec& x, double t, Prompt p) const;
  Vec posterior_x0(const Vec& x, double t, Prompt p) const;
  Vec posterior_eps(const Vec& x, double t, Prompt p) const;

  Vec velocity(const Vec& x, double t, Prompt p) const;

  /// w * (v(x,t,p) - v(x,t,null)) + v(x,t,null). Requires w >= 0.
  Vec cfg_velocity(const Vec& x, double t, Prompt p, double w) const;

  /// eps-parameterized prediction of the (optionally guided) field.
  Vec eps_prediction(const Vec& x, double t, Prompt p, double cfg_w = 1.0) const;

  double log_marginal(const Vec& x, double t, Prompt p) const;
  Vec score(const Vec& x, double t, Prompt p) const;  // grad_x log p_t(x)

  /// Exact Jacobian dv/dx of the marginal velocity at (x, t, p).
  Mat velocity_jacobian(const Vec& x, double t, Prompt p) const;
  Mat cfg_velocity_jacobian(const Vec& x, double t, Prompt p, double w) const;

  /// Draw x0 from the prompt's generative mixture.
  Vec sample_x0(Prompt p, RngStream& rng) const;

 private:
  void check_input(const Vec& x, double t, Prompt p) const;

  Schedule schedule_;
  std::vector<Mixture> prompts_;
  Mixture null_;  // equal-weight union of all prompt mixtures
  int dim_ = 0;
};

/// eps(x) = a / (b_dot a - a_dot b) * (v - a_dot / a * x).
Vec eps_from_velocity(const ScheduleCoeffs& c, const Vec& v, const Vec& x);

/// Inverse of eps_from_velocity: v = a_dot / a * x + (b_dot a - a_dot b) / a * eps.
Vec velocity_from_eps(const ScheduleCoeffs& c, const Vec& eps, const Vec& x);

}  // namespace rfedit
