#pragma once

#include <vector>

#include "rfedit/common.hpp"

namespace rfedit {

struct ScheduleCoeffs {
  double a = 0.0;
  double b = 0.0;
  double a_dot = 0.0;
  double b_dot = 0.0;
};

enum class ScheduleKind { RectifiedFlow, VpDiffusion };

/// Interpolation-path coefficients for x_t = a(t) x0 + b(t) eps.
///
/// RectifiedFlow: a = 1-t, b = t (exact derivatives -1, +1).
/// VpDiffusion:  a = sqrt(alpha_bar), b = sqrt(1-alpha_bar) over a discrete
/// alpha_bar table (linear-beta construction), linearly interpolated in t.
class Schedule {
 public:
  static Schedule rectified_flow();
  static Schedule vp_diffusion(int steps = 1000, double beta_min = 1e-4,
                               double beta_max = 2e-2);
  static Schedule vp_diffusion_from_table(std::vector<double> alpha_bar);

  ScheduleKind kind() const { return kind_; }

  /// Coefficients at t in [0, 1]. Throws DomainError outside that range.
  /// For VpDiffusion at t = 0, b = 0 and b_dot is +inf (sqrt slope); field
  /// operations never evaluate there because of the [kTMin, kTMax] clamp.
  ScheduleCoeffs eval(double t) const;

  const std::vector<double>& alpha_bar_table() const { return alpha_bar_; }

 private:
  Schedule(ScheduleKind kind, std::vector<double> alpha_bar)
      : kind_(kind), alpha_bar_(std::move(alpha_bar)) {}

  ScheduleKind kind_;
  std::vector<double> alpha_bar_;  // empty for RectifiedFlow
};

enum class ShiftKind { Zero, LinearEta, Progressive };

struct ShiftValue {
  double c = 0.0;
  double c_dot = 0.0;
};

/// Shift coefficient c(t) applied to the target latent.
///
/// Zero:        c = 0.
/// LinearEta:   c = eta * t, c_dot = eta.
/// Progressive: c = (k/N) * t at optimization step k of N; the per-step ratio
///              is treated as a constant, so c_dot = k/N.
class ShiftRule {
 public:
  static ShiftRule zero() { return ShiftRule(ShiftKind::Zero, 0.0); }
  static ShiftRule linear(double eta);
  static ShiftRule progressive() { return ShiftRule(ShiftKind::Progressive, 0.0); }

  ShiftKind kind() const { return kind_; }
  double eta() const { return eta_; }

  /// c and c_dot at time t; step/n_total only matter for Progressive.
  ShiftValue eval(double t, int step = 0, int n_total = 1) const;

 private:
  ShiftRule(ShiftKind kind, double eta) : kind_(kind), eta_(eta) {}

  ShiftKind kind_;
  double eta_;
};

enum class WeightMode { Unit, Formula };

/// Residual weighting: Unit returns 1; Formula returns
/// 2 * (a + c - a_dot - c_dot) evaluated at (t, step).
double delta_v_weight(const Schedule& schedule, const ShiftRule& shift, double t,
                      int step, int n_total, WeightMode mode);

}  // namespace rfedit
