#include "rfedit/distill.hpp"

#include <cmath>

namespace rfedit {

namespace {

struct BranchPoints {
  Vec x_src;
  Vec x_hat;
  Vec offset;  // x0_tgt - x0_src
};

BranchPoints branch_points(const ScheduleCoeffs& sc, const ShiftValue& sv,
                           const Vec& x0_tgt, const Vec& x0_src, const Vec& eps) {
  require_same_dim(x0_tgt, x0_src, "delta_v");
  require_same_dim(x0_tgt, eps, "delta_v");
  BranchPoints bp;
  bp.offset = x0_tgt - x0_src;
  bp.x_src = sc.a * x0_src + sc.b * eps;
  bp.x_hat = sc.a * x0_tgt + sc.b * eps + sv.c * bp.offset;
  return bp;
}

Vec delta_v_residual(const DistillContext& ctx, const Vec& x0_tgt, const Vec& x0_src,
                     Prompt p_tgt, Prompt p_src, double t, int step, int n_total,
                     const Vec& eps, BranchPoints* points_out) {
  const GmmField& f = ctx.f();
  const ScheduleCoeffs sc = f.schedule().eval(t);
  const ShiftValue sv = ctx.shift.eval(t, step, n_total);
  BranchPoints bp = branch_points(sc, sv, x0_tgt, x0_src, eps);
  const Vec v_tgt = f.cfg_velocity(bp.x_hat, t, p_tgt, ctx.cfg_tgt);
  const Vec v_src = f.cfg_velocity(bp.x_src, t, p_src, ctx.cfg_src);
  Vec r = v_tgt - v_src - (sc.a_dot + sv.c_dot) * bp.offset;
  if (points_out != nullptr) *points_out = std::move(bp);
  return r;
}

double rfds_weight(const DistillContext& ctx, double t) {
  // Formula mode applies the shift-free expression 2(a - a_dot); unit is 1.
  if (ctx.weight_mode == WeightMode::Unit) return 1.0;
  const ScheduleCoeffs sc = ctx.f().schedule().eval(t);
  return 2.0 * (sc.a - sc.a_dot);
}

}  // namespace

Vec grad_rfds(const DistillContext& ctx, const Vec& x0, Prompt p, double t, const Vec& eps) {
  const GmmField& f = ctx.f();
  require_same_dim(x0, eps, "grad_rfds");
  const ScheduleCoeffs sc = f.schedule().eval(t);
  const Vec x_t = sc.a * x0 + sc.b * eps;
  const Vec v = f.cfg_velocity(x_t, t, p, ctx.cfg_tgt);
  return rfds_weight(ctx, t) * (v - sc.a_dot * x0 - sc.b_dot * eps);
}

Vec grad_sds(const DistillContext& ctx, const Vec& x0, Prompt p, double t, const Vec& eps) {
  const GmmField& f = ctx.f();
  require_same_dim(x0, eps, "grad_sds");
  const ScheduleCoeffs sc = f.schedule().eval(t);
  const Vec x_t = sc.a * x0 + sc.b * eps;
  return f.eps_prediction(x_t, t, p, ctx.cfg_tgt) - eps;
}

Vec grad_dds(const DistillContext& ctx, const Vec& x0_tgt, const Vec& x0_src,
             Prompt p_tgt, Prompt p_src, double t, const Vec& eps) {
  const GmmField& f = ctx.f();
  require_same_dim(x0_tgt, x0_src, "grad_dds");
  require_same_dim(x0_tgt, eps, "grad_dds");
  const ScheduleCoeffs sc = f.schedule().eval(t);
  const Vec x_tgt = sc.a * x0_tgt + sc.b * eps;
  const Vec x_src = sc.a * x0_src + sc.b * eps;
  return f.eps_prediction(x_tgt, t, p_tgt, ctx.cfg_tgt) -
         f.eps_prediction(x_src, t, p_src, ctx.cfg_src);
}

Vec grad_delta_v(const DistillContext& ctx, const Vec& x0_tgt, const Vec& x0_src,
                 Prompt p_tgt, Prompt p_src, double t, int step, int n_total,
                 const Vec& eps) {
  const Vec r = delta_v_residual(ctx, x0_tgt, x0_src, p_tgt, p_src, t, step, n_total, eps, nullptr);
  const double w = delta_v_weight(ctx.f().schedule(), ctx.shift, t, step, n_total, ctx.weight_mode);
  return w * r;
}

Vec grad_delta_v_full(const DistillContext& ctx, const Vec& x0_tgt, const Vec& x0_src,
                      Prompt p_tgt, Prompt p_src, double t, int step, int n_total,
                      const Vec& eps) {
  const GmmField& f = ctx.f();
  BranchPoints bp;
  const Vec r = delta_v_residual(ctx, x0_tgt, x0_src, p_tgt, p_src, t, step, n_total, eps, &bp);
  const ScheduleCoeffs sc = f.schedule().eval(t);
  const ShiftValue sv = ctx.shift.eval(t, step, n_total);
  const Mat jac = f.cfg_velocity_jacobian(bp.x_hat, t, p_tgt, ctx.cfg_tgt);
  return 2.0 * ((sc.a + sv.c) * (jac.transpose() * r) - (sc.a_dot + sv.c_dot) * r);
}

double energy_delta_v(const DistillContext& ctx, const Vec& x0_tgt, const Vec& x0_src,
                      Prompt p_tgt, Prompt p_src, double t, int step, int n_total,
                      const Vec& eps) {
  return delta_v_residual(ctx, x0_tgt, x0_src, p_tgt, p_src, t, step, n_total, eps, nullptr)
      .squaredNorm();
}

Vec irfds_invert(const DistillContext& ctx, const Vec& x0, Prompt p, int iters,
                 double step_size, std::uint64_t seed, const IrfdsOptions& opts) {
  if (iters < 1) throw ConfigError("irfds_invert: iters must be >= 1");
  const GmmField& f = ctx.f();
  RngStream root(seed);
  Vec eps = root.child(0).gaussian(f.dim());
  for (int i = 0; i < iters; ++i) {
    RngStream stream = root.child(1, static_cast<std::uint64_t>(i));
    const double t = opts.fixed_t ? *opts.fixed_t : stream.uniform(opts.t_lo, opts.t_hi);
    const ScheduleCoeffs sc = f.schedule().eval(t);
    const Vec x_t = sc.a * x0 + sc.b * eps;
    const Vec r = f.cfg_velocity(x_t, t, p, ctx.cfg_tgt) - sc.a_dot * x0 - sc.b_dot * eps;
    eps += step_size * sc.b_dot * r;
    if (!eps.allFinite() || eps.norm() > kDivergenceNorm) {
      throw DivergenceError("irfds_invert diverged at iteration " + std::to_string(i));
    }
  }
  return eps;
}

}  // namespace rfedit
