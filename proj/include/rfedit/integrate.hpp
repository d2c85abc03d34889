#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "rfedit/field.hpp"

namespace rfedit {

/// Strictly increasing times inside the clamp range. A single-point grid is
/// the degenerate zero-step case: every integrator returns its input.
struct TimeGrid {
  std::vector<double> times;

  /// Uniform grid with n_steps intervals (n_steps + 1 points); n_steps = 0
  /// collapses to the single point {t_lo}.
  static TimeGrid uniform(int n_steps, double t_lo = kTMin, double t_hi = kTMax);

  void validate() const;
  std::size_t size() const { return times.size(); }
};

struct Trajectory {
  std::vector<double> times;  // traversal order
  std::vector<Vec> states;

  const Vec& back() const { return states.back(); }
};

using VelocityFn = std::function<Vec(const Vec& x, double t)>;
using EpsFn = std::function<Vec(const Vec& x, double t)>;

VelocityFn velocity_fn(const GmmField& field, Prompt p, double cfg_w = 1.0);
EpsFn eps_fn(const GmmField& field, Prompt p, double cfg_w = 1.0);

/// Euler sampling along descending time: x_{i-1} = x_i + (t_{i-1} - t_i) v(x_i, t_i).
Trajectory euler_generate(const VelocityFn& v, const Vec& x_start, const TimeGrid& grid);
Trajectory euler_generate(const GmmField& field, const Vec& x_start, Prompt p,
                          const TimeGrid& grid, double cfg_w = 1.0);

/// Euler inversion along ascending time: x_{i+1} = x_i - (t_i - t_{i+1}) v(x_i, t_i),
/// i.e. the reconstruction recursion run with v frozen at the current state.
Trajectory euler_invert(const VelocityFn& v, const Vec& x0, const TimeGrid& grid);
Trajectory euler_invert(const GmmField& field, const Vec& x0, Prompt p,
                        const TimeGrid& grid, double cfg_w = 1.0);

/// One deterministic denoising-sampler update in either direction:
/// x_to = a_to (x - b_from eps(x, t_from)) / a_from + b_to eps(x, t_from).
Vec ddim_step(const Schedule& schedule, const EpsFn& eps, const Vec& x,
              double t_from, double t_to);
Trajectory ddim_invert(const Schedule& schedule, const EpsFn& eps, const Vec& x0,
                       const TimeGrid& grid);
Trajectory ddim_generate(const Schedule& schedule, const EpsFn& eps, const Vec& x_top,
                         const TimeGrid& grid);

enum class ReconMode { RfEuler, Ddim };

/// Invert-then-reconstruct error curve: (t_i, ||x_tilde_i - x_i||_2) for every
/// grid point below the top anchor. Ddim mode requires a VpDiffusion schedule.
std::vector<std::pair<double, double>> reconstruction_error(
    const GmmField& field, const Vec& x0, Prompt p, const TimeGrid& grid,
    ReconMode mode, double cfg_w = 1.0);

struct DdibResult {
  Vec output;
  Trajectory invert_leg;
  Trajectory generate_leg;
};

/// Two-ODE translation: invert under the source prompt, generate under the
/// target prompt on the shared grid. Per-leg guidance scales.
DdibResult ddib_translate_full(const GmmField& field, const Vec& x0_src, Prompt p_src,
                               Prompt p_tgt, const TimeGrid& grid, double cfg_src = 1.0,
                               double cfg_tgt = 1.0);
Vec ddib_translate(const GmmField& field, const Vec& x0_src, Prompt p_src, Prompt p_tgt,
                   const TimeGrid& grid, double cfg_src = 1.0, double cfg_tgt = 1.0);

}  // namespace rfedit
