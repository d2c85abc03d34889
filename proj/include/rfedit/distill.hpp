#pragma once

#include <cstdint>
#include <optional>

#include "rfedit/field.hpp"

namespace rfedit {

/// Shared setup for the distillation residuals. Guidance is applied per
/// branch: cfg_tgt on the (shifted) target branch, cfg_src on the source
/// branch; single-branch residuals (sds/rfds) use cfg_tgt.
struct DistillContext {
  const GmmField* field = nullptr;
  ShiftRule shift = ShiftRule::zero();
  double cfg_src = 6.0;
  double cfg_tgt = 16.5;
  WeightMode weight_mode = WeightMode::Unit;

  const GmmField& f() const {
    if (field == nullptr) throw ConfigError("distill context: field not set");
    return *field;
  }
};

/// Velocity-space residual w(t) (v~(x_t, p) - a_dot x0 - b_dot eps), x_t = a x0 + b eps.
Vec grad_rfds(const DistillContext& ctx, const Vec& x0, Prompt p, double t, const Vec& eps);

/// Noise-space residual eps~(x_t, p) - eps via the eps view of the velocity.
Vec grad_sds(const DistillContext& ctx, const Vec& x0, Prompt p, double t, const Vec& eps);

/// Difference of guided noise predictions at the two branches, shared eps.
Vec grad_dds(const DistillContext& ctx, const Vec& x0_tgt, const Vec& x0_src,
             Prompt p_tgt, Prompt p_src, double t, const Vec& eps);

/// Shifted delta-velocity residual (the identity-Jacobian gradient of
/// energy_delta_v):
///   x_t^src  = a x0_src + b eps
///   x_hat    = a x0_tgt + b eps + c (x0_tgt - x0_src)
///   g = w(t) [ v~(x_hat, p_tgt) - v~(x_t^src, p_src) - (a_dot + c_dot)(x0_tgt - x0_src) ].
Vec grad_delta_v(const DistillContext& ctx, const Vec& x0_tgt, const Vec& x0_src,
                 Prompt p_tgt, Prompt p_src, double t, int step, int n_total,
                 const Vec& eps);

/// Exact gradient of energy_delta_v in x0_tgt, including the field Jacobian:
///   2 [ (a + c) J_v~(x_hat)^T - (a_dot + c_dot) I ] r.
Vec grad_delta_v_full(const DistillContext& ctx, const Vec& x0_tgt, const Vec& x0_src,
                      Prompt p_tgt, Prompt p_src, double t, int step, int n_total,
                      const Vec& eps);

/// Squared norm of the full residual at a single (t, eps):
///   || v~(x_hat, p_tgt) - v~(x_t^src, p_src) - (a_dot + c_dot)(x0_tgt - x0_src) ||^2.
double energy_delta_v(const DistillContext& ctx, const Vec& x0_tgt, const Vec& x0_src,
                      Prompt p_tgt, Prompt p_src, double t, int step, int n_total,
                      const Vec& eps);

struct IrfdsOptions {
  std::optional<double> fixed_t;  // when unset, t is drawn uniformly per iteration
  double t_lo = kTMin;
  double t_hi = kTMax;
};

/// Noise inversion: gradient steps on eps against the rfds residual, with the
/// Jacobian-free convention d(residual)/d(eps) ~ -b_dot I, i.e.
/// eps <- eps + step b_dot r. Returns the optimized noise.
Vec irfds_invert(const DistillContext& ctx, const Vec& x0, Prompt p, int iters,
                 double step_size, std::uint64_t seed, const IrfdsOptions& opts = {});

}  // namespace rfedit
