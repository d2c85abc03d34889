#pragma once

#include <functional>

#include "rfedit/editor.hpp"

namespace rfedit {

struct StraightnessReport {
  double ratio = 0.0;  // path length / chord length, >= 1 up to rounding
  double path_length = 0.0;
  double chord_length = 0.0;
  std::vector<double> step_lengths;
};

/// Path-to-chord ratio of an iterate sequence. Throws DegeneratePathError
/// when the chord is shorter than 1e-12.
StraightnessReport path_to_chord(const std::vector<Vec>& points);

/// Sum over steps of the recorded ||v~(x_hat) - v~(x_src)||^2.
double update_energy(const EditRecord& record);

struct EtaSweepRow {
  double eta = 0.0;
  std::uint64_t seed = 0;
  double path_ratio = 0.0;
  double update_energy = 0.0;
};

/// Runs the editing loop once per (eta, seed) with a linear shift c = eta t,
/// all other config fields fixed. Rows come out in (eta, seed) order.
std::vector<EtaSweepRow> eta_sweep(const GmmField& field, EditConfig base, const Vec& x0_src,
                                   Prompt p_src, Prompt p_tgt, const std::vector<double>& etas,
                                   const std::vector<std::uint64_t>& seeds, int threads = 1);

/// Mean per eta, in the order etas first appear in rows.
std::vector<EtaSweepRow> eta_sweep_means(const std::vector<EtaSweepRow>& rows);

/// Central-difference gradient of a scalar function, O(h^2).
Vec finite_diff_gradient(const std::function<double(const Vec&)>& fn, const Vec& x, double h);

/// Max relative deviation between the zero-shift unit-weight delta-velocity
/// residual and the noise-space delta residual mapped through
/// (b_dot a - a_dot b)/a, over random probes. Exact up to rounding.
double dds_delta_v_max_deviation(const DistillContext& ctx, Prompt p_tgt, Prompt p_src,
                                 int n_probes, std::uint64_t seed);

/// Max per-step relative deviation between the editing loop in its matched
/// configuration (linear shift eta = 1, unit weight, sgd with the Euler step
/// size) and the baseline ODE. lr_scale != 1 perturbs the baseline step size
/// as a negative control.
double flowedit_delta_v_max_deviation(const GmmField& field, const EditConfig& base,
                                      const Vec& x0_src, Prompt p_src, Prompt p_tgt,
                                      double lr_scale = 1.0);

}  // namespace rfedit
