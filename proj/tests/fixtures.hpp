#pragma once

// Shared field builders for the test suites.

#include "rfedit/editor.hpp"
#include "rfedit/field.hpp"

namespace rfedit::testing {

inline Vec vec(std::initializer_list<double> vals) {
  Vec v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v[i++] = x;
  return v;
}

inline Mixture single_gaussian(const Vec& mean, double var = 1.0) {
  Mixture m;
  m.components.push_back({1.0, mean, Vec::Constant(mean.size(), var)});
  return m;
}

/// One standard-normal prompt in the given dimension.
inline GmmField standard_field(int dim = 1, Schedule schedule = Schedule::rectified_flow()) {
  return GmmField(std::move(schedule), {single_gaussian(Vec::Zero(dim))});
}

/// Two single-Gaussian prompts separated by `offset` along the first axis.
inline GmmField translation_field(int dim = 2, double offset = 3.0, double var = 1.0) {
  Vec mu_src = Vec::Zero(dim);
  Vec mu_tgt = Vec::Zero(dim);
  mu_tgt[0] = offset;
  return GmmField(Schedule::rectified_flow(),
                  {single_gaussian(mu_src, var), single_gaussian(mu_tgt, var)});
}

/// Asymmetric three-component mixture; genuinely nonlinear velocity field.
inline Mixture three_component(int dim, double spread = 2.0) {
  Mixture m;
  Vec m0 = Vec::Zero(dim), m1 = Vec::Zero(dim), m2 = Vec::Zero(dim);
  m0[0] = -spread;
  m1[0] = spread;
  if (dim > 1) {
    m1[1] = spread / 2.0;
    m2[1] = -spread;
  }
  m.components.push_back({0.5, m0, Vec::Constant(dim, 0.6)});
  m.components.push_back({0.3, m1, Vec::Constant(dim, 1.2)});
  m.components.push_back({0.2, m2, Vec::Constant(dim, 0.9)});
  return m;
}

inline GmmField mixture_field(int dim = 2, Schedule schedule = Schedule::rectified_flow()) {
  return GmmField(std::move(schedule), {three_component(dim)});
}

/// Canonical two-prompt translation task for trend experiments: asymmetric,
/// non-factorizable mixtures so velocity fields are genuinely curved, and an
/// under-driven optimization so stronger shifts visibly strengthen the edit.
struct TranslationTask {
  GmmField field;
  Vec x0;
  Vec ideal;  // x0 translated by the leading-component mean offset
  EditConfig base;
  Prompt p_src = Prompt::conditional(0);
  Prompt p_tgt = Prompt::conditional(1);
};

inline TranslationTask trend_task() {
  const double offset = 3.0;
  Mixture src, tgt;
  src.components.push_back({0.6, vec({0.0, 0.0}), vec({1.0, 1.0})});
  src.components.push_back({0.4, vec({0.9, 1.6}), vec({1.4, 1.4})});
  tgt.components.push_back({0.5, vec({offset, 0.3}), vec({1.0, 1.0})});
  tgt.components.push_back({0.5, vec({offset - 0.8, -1.3}), vec({0.8, 0.8})});

  EditConfig base;
  base.t_hi = 0.7;
  base.cfg_src = 1.0;
  base.cfg_tgt = 1.0;

  TranslationTask task{GmmField(Schedule::rectified_flow(), {src, tgt}),
                       vec({0.4, -0.2}), vec({0.4 + offset, -0.2}), base};
  return task;
}

/// Two prompts over d = d1 + d2 that differ only on the first block; the
/// trailing block is identical, so cross-prompt velocity differences vanish
/// there.
inline GmmField product_field(int d1 = 2, int d2 = 3, double offset = 2.5) {
  const int dim = d1 + d2;
  Vec mu_src = Vec::Zero(dim);
  Vec mu_tgt = Vec::Zero(dim);
  for (int i = 0; i < d1; ++i) mu_tgt[i] = offset;
  for (int i = d1; i < dim; ++i) {
    mu_src[i] = 0.7 * (i - d1 + 1);
    mu_tgt[i] = mu_src[i];
  }
  return GmmField(Schedule::rectified_flow(),
                  {single_gaussian(mu_src), single_gaussian(mu_tgt)});
}

}  // namespace rfedit::testing
