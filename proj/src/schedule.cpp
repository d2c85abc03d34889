#include "rfedit/schedule.hpp"

#include <cmath>
#include <limits>

namespace rfedit {

Schedule Schedule::rectified_flow() {
  return Schedule(ScheduleKind::RectifiedFlow, {});
}

Schedule Schedule::vp_diffusion(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw ConfigError("vp_diffusion: steps must be >= 1");
  if (!(beta_min > 0.0 && beta_max >= beta_min && beta_max < 1.0)) {
    throw ConfigError("vp_diffusion: need 0 < beta_min <= beta_max < 1");
  }
  std::vector<double> table(static_cast<std::size_t>(steps) + 1);
  table[0] = 1.0;
  for (int i = 1; i <= steps; ++i) {
    const double frac = steps > 1 ? static_cast<double>(i - 1) / (steps - 1) : 0.0;
    const double beta = beta_min + (beta_max - beta_min) * frac;
    table[static_cast<std::size_t>(i)] = table[static_cast<std::size_t>(i - 1)] * (1.0 - beta);
  }
  return vp_diffusion_from_table(std::move(table));
}

Schedule Schedule::vp_diffusion_from_table(std::vector<double> alpha_bar) {
  if (alpha_bar.size() < 2) throw ConfigError("vp_diffusion: alpha_bar table needs >= 2 entries");
  if (alpha_bar.front() != 1.0) throw ConfigError("vp_diffusion: alpha_bar[0] must be 1");
  for (std::size_t i = 0; i < alpha_bar.size(); ++i) {
    const double v = alpha_bar[i];
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("vp_diffusion: alpha_bar entries must lie in [0,1]");
    if (i > 0 && v > alpha_bar[i - 1]) throw ConfigError("vp_diffusion: alpha_bar must be non-increasing");
  }
  return Schedule(ScheduleKind::VpDiffusion, std::move(alpha_bar));
}

ScheduleCoeffs Schedule::eval(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw DomainError("schedule evaluated at t=" + std::to_string(t) + " outside [0,1]");
  }
  if (kind_ == ScheduleKind::RectifiedFlow) {
    return {1.0 - t, t, -1.0, 1.0};
  }

  // Piecewise-linear alpha_bar(t); derivative is the slope of the active segment.
  const auto segments = static_cast<double>(alpha_bar_.size() - 1);
  const double pos = t * segments;
  auto lo = static_cast<std::size_t>(pos);
  if (lo >= alpha_bar_.size() - 1) lo = alpha_bar_.size() - 2;
  const double frac = pos - static_cast<double>(lo);
  const double abar = alpha_bar_[lo] + frac * (alpha_bar_[lo + 1] - alpha_bar_[lo]);
  const double slope = (alpha_bar_[lo + 1] - alpha_bar_[lo]) * segments;

  ScheduleCoeffs c;
  c.a = std::sqrt(abar);
  c.b = std::sqrt(1.0 - abar);
  c.a_dot = c.a > 0.0 ? slope / (2.0 * c.a) : -std::numeric_limits<double>::infinity();
  c.b_dot = c.b > 0.0 ? -slope / (2.0 * c.b) : std::numeric_limits<double>::infinity();
  return c;
}

ShiftRule ShiftRule::linear(double eta) {
  if (!(eta >= 0.0)) throw ConfigError("shift rule: eta must be non-negative");
  return ShiftRule(ShiftKind::LinearEta, eta);
}

ShiftValue ShiftRule::eval(double t, int step, int n_total) const {
  switch (kind_) {
    case ShiftKind::Zero:
      return {0.0, 0.0};
    case ShiftKind::LinearEta:
      return {eta_ * t, eta_};
    case ShiftKind::Progressive: {
      if (n_total < 1) throw ConfigError("progressive shift: n_total must be >= 1");
      if (step < 0 || step > n_total) throw ConfigError("progressive shift: step out of range");
      const double ratio = static_cast<double>(step) / n_total;
      return {ratio * t, ratio};
    }
  }
  throw ConfigError("shift rule: unknown kind");
}

double delta_v_weight(const Schedule& schedule, const ShiftRule& shift, double t,
                      int step, int n_total, WeightMode mode) {
  if (mode == WeightMode::Unit) {
    schedule.eval(t);  // input validation only
    return 1.0;
  }
  const ScheduleCoeffs sc = schedule.eval(t);
  const ShiftValue sv = shift.eval(t, step, n_total);
  return 2.0 * (sc.a + sv.c - sc.a_dot - sv.c_dot);
}

}  // namespace rfedit
