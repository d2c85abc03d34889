#pragma once

#include <cstdint>
#include <vector>

#include "rfedit/distill.hpp"
#include "rfedit/field.hpp"

namespace rfedit {

enum class TimestepKind { Descending, Random };
enum class OptimizerKind { Sgd, Adam };

/// Descending: n uniformly spaced values from t_hi down to t_lo (n = 1 gives
/// {t_hi}). Random: n i.i.d. uniform draws in [t_lo, t_hi], seeded.
std::vector<double> timestep_schedule(TimestepKind kind, int n, double t_lo,
                                      double t_hi, std::uint64_t seed = 0);

struct LrSchedule {
  enum class Kind { Constant, HumpTail, EulerMatched };

  Kind kind = Kind::Constant;
  double value = 0.02;
  // HumpTail: piecewise-linear through (fraction-of-run, multiple-of-value)
  // knots; small early, full strength past the midpoint, decayed tail.
  std::vector<std::pair<double, double>> knots;

  static LrSchedule constant(double v);
  static LrSchedule hump_tail(double base);
  static LrSchedule hump_tail(double base, std::vector<std::pair<double, double>> knots);
  // Step size of the uniform descending grid, so one optimizer step equals
  // one Euler step of the baseline ODE.
  static LrSchedule euler_matched();
};

double lr_at(const LrSchedule& lr, int step, int n_total, double t_lo, double t_hi);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Sgd;
  Vec m, v;  // adam moments
  long step_count = 0;

  static OptimizerState make(OptimizerKind kind) { return {kind, {}, {}, 0}; }
};

/// sgd: x - lr g. adam: bias-corrected moment update with
/// beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
Vec optimizer_step(OptimizerState& state, const Vec& x, const Vec& g, double lr);

struct EditConfig {
  int n_steps = 50;
  int batch = 1;
  TimestepKind scheduler = TimestepKind::Descending;
  double t_lo = kTMin;
  double t_hi = kTMax;
  ShiftRule shift = ShiftRule::progressive();
  WeightMode weight_mode = WeightMode::Unit;
  double cfg_src = 6.0;
  double cfg_tgt = 16.5;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  LrSchedule lr = LrSchedule::constant(0.02);
  std::uint64_t seed = 0;

  void validate() const;
  DistillContext context(const GmmField& field) const;
};

struct EditRecord {
  std::vector<Vec> iterates;       // n_steps + 1 entries
  std::vector<double> ts;          // per step
  std::vector<double> lrs;
  std::vector<Vec> grads;
  std::vector<double> grad_norms;
  std::vector<double> vdiff_sqs;   // batch mean of ||v~(x_hat) - v~(x_src)||^2
  long velocity_evals = 0;

  const Vec& final_latent() const { return iterates.back(); }
  int n_steps() const { return static_cast<int>(ts.size()); }
};

/// Per-(step, sample) noise used by both the editing loop and the baseline
/// ODE. Exposed so batch gradients can be reproduced sample by sample.
Vec edit_noise(std::uint64_t seed, int step, int sample, Eigen::Index dim);

/// Batch-averaged gradient of one optimization step at iterate x0_tgt.
Vec edit_step_gradient(const DistillContext& ctx, const EditConfig& cfg, const Vec& x0_tgt,
                       const Vec& x0_src, Prompt p_tgt, Prompt p_src, double t, int step,
                       double* vdiff_sq_out = nullptr);

/// Delta-velocity editing loop: descending (or random) timesteps, B shared
/// noises per step used in both branches, optimizer update per step.
EditRecord edit_delta_v(const GmmField& field, const EditConfig& cfg, const Vec& x0_src,
                        Prompt p_src, Prompt p_tgt);

/// Inversion-free baseline: Euler integration of
///   dx0_tgt = [ v~(x0_tgt + x_t^src - x0_src, t, p_tgt) - v~(x_t^src, t, p_src) ] dt
/// over the given descending evaluation times (one step per time; the final
/// step reuses the last grid spacing), averaging the bracket over `batch`
/// noises drawn exactly like edit_delta_v's.
EditRecord flowedit_baseline(const GmmField& field, const std::vector<double>& times_desc,
                             int batch, double cfg_src, double cfg_tgt, const Vec& x0_src,
                             Prompt p_src, Prompt p_tgt, std::uint64_t seed,
                             double lr_scale = 1.0);

/// Convenience wrapper building the descending schedule from cfg (uses
/// n_steps, t range, batch, cfg scales and seed; shift/optimizer/lr ignored).
EditRecord flowedit_baseline(const GmmField& field, const EditConfig& cfg, const Vec& x0_src,
                             Prompt p_src, Prompt p_tgt);

}  // namespace rfedit
