#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "rfedit/field.hpp"

namespace rfedit {

/// Importance-weighted Monte-Carlo estimate of velocity(x, t, p).
///
/// Draws x0 from the prompt's mixture; since x_t | x0 is N(a x0, b^2 I), the
/// exact likelihood of x at each draw serves as the importance weight (no
/// kernel bandwidth involved). Given x and x0 the noise is implied,
/// eps = (x - a x0) / b, so the estimate is
///   v_hat = a_dot E_hat[x0 | x_t = x] + b_dot E_hat[eps | x_t = x].
/// Deterministic for a fixed seed; sample s draws from its own child stream,
/// so the result does not depend on how the loop is scheduled.
///
/// Throws UnreliableEstimateError when the effective sample size
/// (sum w)^2 / sum w^2 falls below min(10, n_samples).
Vec mc_velocity_oracle(const GmmField& field, const Vec& x, double t, Prompt p,
                       std::int64_t n_samples, std::uint64_t seed);

/// Same estimator on caller-provided x0 draws (used to pin down single-atom cases).
Vec mc_velocity_from_draws(const GmmField& field, const Vec& x, double t,
                           std::span<const Vec> x0_draws);

using FieldOffset = std::function<Vec(const Vec& x, double t)>;

struct CfmGapEstimate {
  double gap = 0.0;           // mean of ||v + delta - target||^2 - ||v - target||^2
  double gap_se = 0.0;
  double cross_mean = 0.0;    // mean of 2 delta . (v - target); zero in expectation
  double cross_se = 0.0;
  double offset_sq_mean = 0.0;
  std::int64_t n = 0;
};

/// Flow-matching loss gap between the analytic field perturbed by `offset`
/// and the analytic field itself, estimated on shared draws of (t, x0, eps).
/// Because the marginal velocity is the conditional mean of a_dot x0 + b_dot eps,
/// the gap converges to E ||offset||^2 >= 0 for any perturbation.
CfmGapEstimate cfm_gap(const GmmField& field, Prompt p, std::int64_t n_samples,
                       const FieldOffset& offset, std::uint64_t seed);

}  // namespace rfedit
