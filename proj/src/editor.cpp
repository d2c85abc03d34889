#include "rfedit/editor.hpp"

#include <cmath>

namespace rfedit {

namespace {

// Stream purposes under the run seed.
constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kTimestepStream = 2;

void check_iterate(const Vec& x, int step) {
  if (!x.allFinite() || x.norm() > kDivergenceNorm) {
    throw DivergenceError("edit iterate diverged at step " + std::to_string(step));
  }
}

}  // namespace

std::vector<double> timestep_schedule(TimestepKind kind, int n, double t_lo, double t_hi,
                                      std::uint64_t seed) {
  if (n < 1) throw ConfigError("timestep schedule: n must be >= 1");
  if (!(t_lo < t_hi)) throw ConfigError("timestep schedule: need t_lo < t_hi");
  std::vector<double> ts(static_cast<std::size_t>(n));
  if (kind == TimestepKind::Descending) {
    if (n == 1) {
      ts[0] = t_hi;
    } else {
      for (int k = 0; k < n; ++k) {
        ts[static_cast<std::size_t>(k)] = t_hi - (t_hi - t_lo) * k / (n - 1);
      }
      ts.front() = t_hi;  // guard the endpoints against rounding drift
      ts.back() = t_lo;
    }
  } else {
    RngStream stream = RngStream(seed).child(kTimestepStream);
    for (int k = 0; k < n; ++k) ts[static_cast<std::size_t>(k)] = stream.uniform(t_lo, t_hi);
  }
  return ts;
}

LrSchedule LrSchedule::constant(double v) {
  LrSchedule s;
  s.kind = Kind::Constant;
  s.value = v;
  return s;
}

LrSchedule LrSchedule::hump_tail(double base) {
  return hump_tail(base, {{0.0, 0.3}, {0.5, 1.0}, {0.9, 1.0}, {1.0, 0.5}});
}

LrSchedule LrSchedule::hump_tail(double base, std::vector<std::pair<double, double>> knots) {
  if (knots.size() < 2) throw ConfigError("lr schedule: hump_tail needs >= 2 knots");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!(knots[i].first >= 0.0 && knots[i].first <= 1.0)) {
      throw ConfigError("lr schedule: knot positions must lie in [0,1]");
    }
    if (i > 0 && !(knots[i].first > knots[i - 1].first)) {
      throw ConfigError("lr schedule: knot positions must be strictly increasing");
    }
    if (!(knots[i].second >= 0.0)) throw ConfigError("lr schedule: knot values must be >= 0");
  }
  LrSchedule s;
  s.kind = Kind::HumpTail;
  s.value = base;
  s.knots = std::move(knots);
  return s;
}

LrSchedule LrSchedule::euler_matched() {
  LrSchedule s;
  s.kind = Kind::EulerMatched;
  return s;
}

double lr_at(const LrSchedule& lr, int step, int n_total, double t_lo, double t_hi) {
  if (step < 0 || step >= n_total) throw ConfigError("lr schedule: step out of range");
  switch (lr.kind) {
    case LrSchedule::Kind::Constant:
      return lr.value;
    case LrSchedule::Kind::EulerMatched:
      return n_total > 1 ? (t_hi - t_lo) / (n_total - 1) : t_hi - t_lo;
    case LrSchedule::Kind::HumpTail: {
      const double frac = n_total > 1 ? static_cast<double>(step) / (n_total - 1) : 0.0;
      const auto& knots = lr.knots;
      if (frac <= knots.front().first) return lr.value * knots.front().second;
      for (std::size_t i = 1; i < knots.size(); ++i) {
        if (frac <= knots[i].first) {
          const double span = knots[i].first - knots[i - 1].first;
          const double u = (frac - knots[i - 1].first) / span;
          return lr.value * (knots[i - 1].second + u * (knots[i].second - knots[i - 1].second));
        }
      }
      return lr.value * knots.back().second;
    }
  }
  throw ConfigError("lr schedule: unknown kind");
}

Vec optimizer_step(OptimizerState& state, const Vec& x, const Vec& g, double lr) {
  require_same_dim(x, g, "optimizer_step");
  if (state.kind == OptimizerKind::Sgd) return x - lr * g;

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (state.step_count == 0) {
    state.m = Vec::Zero(x.size());
    state.v = Vec::Zero(x.size());
  }
  ++state.step_count;
  state.m = beta1 * state.m + (1.0 - beta1) * g;
  state.v = beta2 * state.v + (1.0 - beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step_count));
  const Vec m_hat = state.m / c1;
  const Vec v_hat = state.v / c2;
  return x - lr * (m_hat.array() / (v_hat.array().sqrt() + eps)).matrix();
}

void EditConfig::validate() const {
  if (n_steps < 1) throw ConfigError("edit config: n_steps must be >= 1");
  if (batch < 1) throw ConfigError("edit config: batch must be >= 1");
  if (!(t_lo >= kTMin && t_hi <= kTMax && t_lo < t_hi)) {
    throw ConfigError("edit config: t range must satisfy kTMin <= t_lo < t_hi <= kTMax");
  }
  if (!(cfg_src >= 0.0 && cfg_tgt >= 0.0)) throw ConfigError("edit config: cfg scales must be >= 0");
}

DistillContext EditConfig::context(const GmmField& field) const {
  DistillContext ctx;
  ctx.field = &field;
  ctx.shift = shift;
  ctx.cfg_src = cfg_src;
  ctx.cfg_tgt = cfg_tgt;
  ctx.weight_mode = weight_mode;
  return ctx;
}

Vec edit_noise(std::uint64_t seed, int step, int sample, Eigen::Index dim) {
  return RngStream(seed)
      .child(kNoiseStream)
      .child(static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(sample))
      .gaussian(dim);
}

Vec edit_step_gradient(const DistillContext& ctx, const EditConfig& cfg, const Vec& x0_tgt,
                       const Vec& x0_src, Prompt p_tgt, Prompt p_src, double t, int step,
                       double* vdiff_sq_out) {
  const GmmField& f = ctx.f();
  const ScheduleCoeffs sc = f.schedule().eval(t);
  const ShiftValue sv = ctx.shift.eval(t, step, cfg.n_steps);
  const double w = delta_v_weight(f.schedule(), ctx.shift, t, step, cfg.n_steps, ctx.weight_mode);
  const Vec offset = x0_tgt - x0_src;

  Vec g = Vec::Zero(f.dim());
  double vdiff_sq = 0.0;
  for (int i = 0; i < cfg.batch; ++i) {
    const Vec eps = edit_noise(cfg.seed, step, i, f.dim());
    const Vec x_src = sc.a * x0_src + sc.b * eps;
    const Vec x_hat = sc.a * x0_tgt + sc.b * eps + sv.c * offset;
    const Vec v_tgt = f.cfg_velocity(x_hat, t, p_tgt, ctx.cfg_tgt);
    const Vec v_src = f.cfg_velocity(x_src, t, p_src, ctx.cfg_src);
    g += (w / cfg.batch) * (v_tgt - v_src - (sc.a_dot + sv.c_dot) * offset);
    vdiff_sq += (v_tgt - v_src).squaredNorm() / cfg.batch;
  }
  if (vdiff_sq_out != nullptr) *vdiff_sq_out = vdiff_sq;
  return g;
}

EditRecord edit_delta_v(const GmmField& field, const EditConfig& cfg, const Vec& x0_src,
                        Prompt p_src, Prompt p_tgt) {
  cfg.validate();
  if (x0_src.size() != field.dim()) throw ShapeError("edit: source latent dimension mismatch");
  const DistillContext ctx = cfg.context(field);
  const std::vector<double> ts =
      timestep_schedule(cfg.scheduler, cfg.n_steps, cfg.t_lo, cfg.t_hi, cfg.seed);

  EditRecord rec;
  rec.iterates.reserve(static_cast<std::size_t>(cfg.n_steps) + 1);
  rec.iterates.push_back(x0_src);
  OptimizerState opt = OptimizerState::make(cfg.optimizer);

  Vec x_tgt = x0_src;
  for (int k = 0; k < cfg.n_steps; ++k) {
    const double t = ts[static_cast<std::size_t>(k)];
    double vdiff_sq = 0.0;
    const Vec g = edit_step_gradient(ctx, cfg, x_tgt, x0_src, p_tgt, p_src, t, k, &vdiff_sq);
    const double lr = lr_at(cfg.lr, k, cfg.n_steps, cfg.t_lo, cfg.t_hi);
    x_tgt = optimizer_step(opt, x_tgt, g, lr);
    check_iterate(x_tgt, k);

    rec.ts.push_back(t);
    rec.lrs.push_back(lr);
    rec.grads.push_back(g);
    rec.grad_norms.push_back(g.norm());
    rec.vdiff_sqs.push_back(vdiff_sq);
    rec.iterates.push_back(x_tgt);
  }
  rec.velocity_evals = static_cast<long>(cfg.n_steps) * cfg.batch;
  return rec;
}

EditRecord flowedit_baseline(const GmmField& field, const std::vector<double>& times_desc,
                             int batch, double cfg_src, double cfg_tgt, const Vec& x0_src,
                             Prompt p_src, Prompt p_tgt, std::uint64_t seed, double lr_scale) {
  if (times_desc.size() < 2) throw ConfigError("flowedit: need at least two scheduler times");
  if (batch < 1) throw ConfigError("flowedit: batch must be >= 1");
  for (std::size_t i = 1; i < times_desc.size(); ++i) {
    if (!(times_desc[i] < times_desc[i - 1])) throw ConfigError("flowedit: times must descend");
  }
  if (x0_src.size() != field.dim()) throw ShapeError("flowedit: source latent dimension mismatch");

  const auto n = static_cast<int>(times_desc.size());
  EditRecord rec;
  rec.iterates.push_back(x0_src);
  Vec x_tgt = x0_src;
  for (int k = 0; k < n; ++k) {
    const double t = times_desc[static_cast<std::size_t>(k)];
    const ScheduleCoeffs sc = field.schedule().eval(t);
    const double dt = (k + 1 < n ? times_desc[static_cast<std::size_t>(k) + 1] - t
                                 : times_desc.back() - times_desc[times_desc.size() - 2]) *
                      lr_scale;

    Vec diff = Vec::Zero(field.dim());
    double vdiff_sq = 0.0;
    for (int i = 0; i < batch; ++i) {
      const Vec eps = edit_noise(seed, k, i, field.dim());
      const Vec x_src = sc.a * x0_src + sc.b * eps;
      // grouped so the evaluation point collapses to x_src exactly when the
      // trajectory has not moved
      const Vec v_tgt = field.cfg_velocity(x_src + (x_tgt - x0_src), t, p_tgt, cfg_tgt);
      const Vec v_src = field.cfg_velocity(x_src, t, p_src, cfg_src);
      diff += (1.0 / batch) * (v_tgt - v_src);
      vdiff_sq += (v_tgt - v_src).squaredNorm() / batch;
    }
    x_tgt += dt * diff;
    check_iterate(x_tgt, k);

    rec.ts.push_back(t);
    rec.lrs.push_back(-dt);
    rec.grads.push_back(diff);
    rec.grad_norms.push_back(diff.norm());
    rec.vdiff_sqs.push_back(vdiff_sq);
    rec.iterates.push_back(x_tgt);
  }
  rec.velocity_evals = static_cast<long>(n) * batch;
  return rec;
}

EditRecord flowedit_baseline(const GmmField& field, const EditConfig& cfg, const Vec& x0_src,
                             Prompt p_src, Prompt p_tgt) {
  cfg.validate();
  const std::vector<double> ts =
      timestep_schedule(TimestepKind::Descending, cfg.n_steps, cfg.t_lo, cfg.t_hi, cfg.seed);
  return flowedit_baseline(field, ts, cfg.batch, cfg.cfg_src, cfg.cfg_tgt, x0_src, p_src,
                           p_tgt, cfg.seed);
}

}  // namespace rfedit
