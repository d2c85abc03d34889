#include "rfedit/integrate.hpp"

#include <cmath>

namespace rfedit {

namespace {

void check_finite(const Vec& x, std::size_t step, const char* what) {
  if (!x.allFinite() || x.norm() > kDivergenceNorm) {
    throw DivergenceError(std::string(what) + " diverged at step " + std::to_string(step));
  }
}

}  // namespace

TimeGrid TimeGrid::uniform(int n_steps, double t_lo, double t_hi) {
  if (n_steps < 0) throw ConfigError("time grid: n_steps must be >= 0");
  TimeGrid g;
  if (n_steps == 0) {
    g.times = {t_lo};
  } else {
    g.times.resize(static_cast<std::size_t>(n_steps) + 1);
    for (int i = 0; i <= n_steps; ++i) {
      g.times[static_cast<std::size_t>(i)] = t_lo + (t_hi - t_lo) * i / n_steps;
    }
    g.times.front() = t_lo;  // guard the endpoints against rounding drift
    g.times.back() = t_hi;
  }
  g.validate();
  return g;
}

void TimeGrid::validate() const {
  if (times.empty()) throw ConfigError("time grid: empty");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= kTMin && times[i] <= kTMax)) {
      throw ConfigError("time grid: point " + std::to_string(times[i]) + " outside clamp range");
    }
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw ConfigError("time grid: times must be strictly increasing");
    }
  }
}

VelocityFn velocity_fn(const GmmField& field, Prompt p, double cfg_w) {
  return [&field, p, cfg_w](const Vec& x, double t) { return field.cfg_velocity(x, t, p, cfg_w); };
}

EpsFn eps_fn(const GmmField& field, Prompt p, double cfg_w) {
  return [&field, p, cfg_w](const Vec& x, double t) { return field.eps_prediction(x, t, p, cfg_w); };
}

Trajectory euler_generate(const VelocityFn& v, const Vec& x_start, const TimeGrid& grid) {
  grid.validate();
  Trajectory traj;
  traj.times.assign(grid.times.rbegin(), grid.times.rend());
  traj.states.reserve(grid.size());
  traj.states.push_back(x_start);
  for (std::size_t i = grid.size(); i-- > 1;) {
    const double t = grid.times[i];
    const double dt = grid.times[i - 1] - t;
    Vec next = traj.states.back() + dt * v(traj.states.back(), t);
    check_finite(next, grid.size() - i, "euler_generate");
    traj.states.push_back(std::move(next));
  }
  return traj;
}

Trajectory euler_generate(const GmmField& field, const Vec& x_start, Prompt p,
                          const TimeGrid& grid, double cfg_w) {
  return euler_generate(velocity_fn(field, p, cfg_w), x_start, grid);
}

Trajectory euler_invert(const VelocityFn& v, const Vec& x0, const TimeGrid& grid) {
  grid.validate();
  Trajectory traj;
  traj.times = grid.times;
  traj.states.reserve(grid.size());
  traj.states.push_back(x0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double t = grid.times[i];
    const double dt = grid.times[i + 1] - t;
    Vec next = traj.states.back() + dt * v(traj.states.back(), t);
    check_finite(next, i + 1, "euler_invert");
    traj.states.push_back(std::move(next));
  }
  return traj;
}

Trajectory euler_invert(const GmmField& field, const Vec& x0, Prompt p,
                        const TimeGrid& grid, double cfg_w) {
  return euler_invert(velocity_fn(field, p, cfg_w), x0, grid);
}

Vec ddim_step(const Schedule& schedule, const EpsFn& eps, const Vec& x,
              double t_from, double t_to) {
  if (t_from == t_to) return x;
  const ScheduleCoeffs from = schedule.eval(t_from);
  const ScheduleCoeffs to = schedule.eval(t_to);
  if (from.a == 0.0) throw DomainError("ddim_step: a(t_from) is zero");
  const Vec e = eps(x, t_from);
  return to.a * (x - from.b * e) / from.a + to.b * e;
}

Trajectory ddim_invert(const Schedule& schedule, const EpsFn& eps, const Vec& x0,
                       const TimeGrid& grid) {
  grid.validate();
  Trajectory traj;
  traj.times = grid.times;
  traj.states.push_back(x0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    Vec next = ddim_step(schedule, eps, traj.states.back(), grid.times[i], grid.times[i + 1]);
    check_finite(next, i + 1, "ddim_invert");
    traj.states.push_back(std::move(next));
  }
  return traj;
}

Trajectory ddim_generate(const Schedule& schedule, const EpsFn& eps, const Vec& x_top,
                         const TimeGrid& grid) {
  grid.validate();
  Trajectory traj;
  traj.times.assign(grid.times.rbegin(), grid.times.rend());
  traj.states.push_back(x_top);
  for (std::size_t i = grid.size(); i-- > 1;) {
    Vec next = ddim_step(schedule, eps, traj.states.back(), grid.times[i], grid.times[i - 1]);
    check_finite(next, grid.size() - i, "ddim_generate");
    traj.states.push_back(std::move(next));
  }
  return traj;
}

std::vector<std::pair<double, double>> reconstruction_error(
    const GmmField& field, const Vec& x0, Prompt p, const TimeGrid& grid,
    ReconMode mode, double cfg_w) {
  grid.validate();
  if (mode == ReconMode::Ddim && field.schedule().kind() != ScheduleKind::VpDiffusion) {
    throw ConfigError("reconstruction_error: ddim mode requires a vp_diffusion schedule");
  }

  Trajectory up, down;
  if (mode == ReconMode::RfEuler) {
    const VelocityFn v = velocity_fn(field, p, cfg_w);
    up = euler_invert(v, x0, grid);
    down = euler_generate(v, up.back(), grid);
  } else {
    const EpsFn e = eps_fn(field, p, cfg_w);
    up = ddim_invert(field.schedule(), e, x0, grid);
    down = ddim_generate(field.schedule(), e, up.back(), grid);
  }

  // down traverses high-to-low; align indices and drop the shared top anchor.
  std::vector<std::pair<double, double>> errors;
  errors.reserve(grid.size() - 1);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const Vec& reconstructed = down.states[grid.size() - 1 - i];
    errors.emplace_back(grid.times[i], (reconstructed - up.states[i]).norm());
  }
  return errors;
}

DdibResult ddib_translate_full(const GmmField& field, const Vec& x0_src, Prompt p_src,
                               Prompt p_tgt, const TimeGrid& grid, double cfg_src,
                               double cfg_tgt) {
  DdibResult out;
  out.invert_leg = euler_invert(field, x0_src, p_src, grid, cfg_src);
  out.generate_leg = euler_generate(field, out.invert_leg.back(), p_tgt, grid, cfg_tgt);
  out.output = out.generate_leg.back();
  return out;
}

Vec ddib_translate(const GmmField& field, const Vec& x0_src, Prompt p_src, Prompt p_tgt,
                   const TimeGrid& grid, double cfg_src, double cfg_tgt) {
  return ddib_translate_full(field, x0_src, p_src, p_tgt, grid, cfg_src, cfg_tgt).output;
}

}  // namespace rfedit
