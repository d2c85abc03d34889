#include "rfedit/analytics.hpp"

#include <cmath>
#include <atomic>
#include <future>
#include <map>

namespace rfedit {

StraightnessReport path_to_chord(const std::vector<Vec>& points) {
  if (points.size() < 2) throw ConfigError("path_to_chord: need at least two points");
  StraightnessReport rep;
  rep.step_lengths.reserve(points.size() - 1);
  for (std::size_t i = 1; i < points.size(); ++i) {
    rep.step_lengths.push_back((points[i] - points[i - 1]).norm());
    rep.path_length += rep.step_lengths.back();
  }
  rep.chord_length = (points.back() - points.front()).norm();
  if (rep.chord_length < 1e-12) {
    throw DegeneratePathError("path_to_chord: endpoints coincide (chord < 1e-12)");
  }
  rep.ratio = rep.path_length / rep.chord_length;
  return rep;
}

double update_energy(const EditRecord& record) {
  double total = 0.0;
  for (double v : record.vdiff_sqs) total += v;
  return total;
}

std::vector<EtaSweepRow> eta_sweep(const GmmField& field, EditConfig base, const Vec& x0_src,
                                   Prompt p_src, Prompt p_tgt, const std::vector<double>& etas,
                                   const std::vector<std::uint64_t>& seeds, int threads) {
  if (etas.empty() || seeds.empty()) throw ConfigError("eta_sweep: need etas and seeds");
  if (threads < 1) threads = 1;

  struct Cell {
    double eta;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (double eta : etas) {
    for (std::uint64_t seed : seeds) cells.push_back({eta, seed});
  }

  const auto run_cell = [&](const Cell& cell) {
    EditConfig cfg = base;
    cfg.shift = ShiftRule::linear(cell.eta);
    cfg.seed = cell.seed;
    const EditRecord rec = edit_delta_v(field, cfg, x0_src, p_src, p_tgt);
    EtaSweepRow row;
    row.eta = cell.eta;
    row.seed = cell.seed;
    row.path_ratio = path_to_chord(rec.iterates).ratio;
    row.update_energy = update_energy(rec);
    return row;
  };

  std::vector<EtaSweepRow> rows(cells.size());
  if (threads == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) rows[i] = run_cell(cells[i]);
  } else {
    // Cells are independent and individually seeded, so any partition gives
    // the same rows.
    std::vector<std::future<void>> workers;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < threads; ++w) {
      workers.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
          rows[i] = run_cell(cells[i]);
        }
      }));
    }
    for (auto& f : workers) f.get();
  }
  return rows;
}

std::vector<EtaSweepRow> eta_sweep_means(const std::vector<EtaSweepRow>& rows) {
  std::vector<double> order;
  std::map<double, std::pair<EtaSweepRow, int>> acc;
  for (const auto& row : rows) {
    auto it = acc.find(row.eta);
    if (it == acc.end()) {
      order.push_back(row.eta);
      acc.emplace(row.eta, std::make_pair(EtaSweepRow{row.eta, 0, 0.0, 0.0}, 0));
      it = acc.find(row.eta);
    }
    it->second.first.path_ratio += row.path_ratio;
    it->second.first.update_energy += row.update_energy;
    it->second.second += 1;
  }
  std::vector<EtaSweepRow> means;
  for (double eta : order) {
    auto& [sum, n] = acc.at(eta);
    sum.path_ratio /= n;
    sum.update_energy /= n;
    means.push_back(sum);
  }
  return means;
}

Vec finite_diff_gradient(const std::function<double(const Vec&)>& fn, const Vec& x, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_gradient: h must be positive");
  Vec g(x.size());
  Vec probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = fn(probe);
    probe[i] = x[i] - h;
    const double fm = fn(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw DomainError("finite_diff_gradient: non-finite function value");
    }
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double dds_delta_v_max_deviation(const DistillContext& ctx, Prompt p_tgt, Prompt p_src,
                                 int n_probes, std::uint64_t seed) {
  if (n_probes < 1) throw ConfigError("equivalence: n_probes must be >= 1");
  const GmmField& f = ctx.f();
  DistillContext zero_shift = ctx;
  zero_shift.shift = ShiftRule::zero();
  zero_shift.weight_mode = WeightMode::Unit;

  RngStream root(seed);
  double worst = 0.0;
  for (int i = 0; i < n_probes; ++i) {
    RngStream stream = root.child(static_cast<std::uint64_t>(i));
    const double t = stream.uniform(kTMin, kTMax);
    const Vec x0_tgt = 2.0 * stream.gaussian(f.dim());
    const Vec x0_src = 2.0 * stream.gaussian(f.dim());
    const Vec eps = stream.gaussian(f.dim());

    const Vec lhs = grad_delta_v(zero_shift, x0_tgt, x0_src, p_tgt, p_src, t, 0, 1, eps);
    const Vec dds = grad_dds(zero_shift, x0_tgt, x0_src, p_tgt, p_src, t, eps);
    const ScheduleCoeffs sc = f.schedule().eval(t);
    const Vec rhs = ((sc.b_dot * sc.a - sc.a_dot * sc.b) / sc.a) * dds;
    const double denom = std::max(lhs.norm(), 1e-300);
    worst = std::max(worst, (lhs - rhs).norm() / denom);
  }
  return worst;
}

double flowedit_delta_v_max_deviation(const GmmField& field, const EditConfig& base,
                                      const Vec& x0_src, Prompt p_src, Prompt p_tgt,
                                      double lr_scale) {
  EditConfig matched = base;
  matched.scheduler = TimestepKind::Descending;
  matched.shift = ShiftRule::linear(1.0);
  matched.weight_mode = WeightMode::Unit;
  matched.optimizer = OptimizerKind::Sgd;
  matched.lr = LrSchedule::euler_matched();

  const EditRecord edited = edit_delta_v(field, matched, x0_src, p_src, p_tgt);
  const std::vector<double> ts =
      timestep_schedule(TimestepKind::Descending, matched.n_steps, matched.t_lo, matched.t_hi,
                        matched.seed);
  const EditRecord baseline = flowedit_baseline(field, ts, matched.batch, matched.cfg_src,
                                                matched.cfg_tgt, x0_src, p_src, p_tgt,
                                                matched.seed, lr_scale);

  double worst = 0.0;
  for (std::size_t i = 0; i < edited.iterates.size(); ++i) {
    const double denom = std::max(baseline.iterates[i].norm(), 1e-300);
    worst = std::max(worst, (edited.iterates[i] - baseline.iterates[i]).norm() / denom);
  }
  return worst;
}

}  // namespace rfedit
