#include "rfedit/runner.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "rfedit/analytics.hpp"
#include "rfedit/csv.hpp"
#include "rfedit/editor.hpp"
#include "rfedit/integrate.hpp"
#include "rfedit/svg.hpp"

namespace rfedit {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw ConfigError("config field '" + field + "': " + why);
}

const json& need(const json& obj, const std::string& key) {
  if (!obj.is_object() || !obj.contains(key)) fail(key, "missing");
  return obj.at(key);
}

double need_number(const json& obj, const std::string& key) {
  const json& v = need(obj, key);
  if (!v.is_number()) fail(key, "expected a number");
  return v.get<double>();
}

int need_int(const json& obj, const std::string& key) {
  const json& v = need(obj, key);
  if (!v.is_number_integer()) fail(key, "expected an integer");
  return v.get<int>();
}

double number_or(const json& obj, const std::string& key, double fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) fail(key, "expected a number");
  return obj.at(key).get<double>();
}

int int_or(const json& obj, const std::string& key, int fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  if (!obj.at(key).is_number_integer()) fail(key, "expected an integer");
  return obj.at(key).get<int>();
}

std::string string_or(const json& obj, const std::string& key, const std::string& fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) fail(key, "expected a string");
  return obj.at(key).get<std::string>();
}

Vec parse_vec(const json& arr, const std::string& field) {
  if (!arr.is_array() || arr.empty()) fail(field, "expected a non-empty array of numbers");
  Vec v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) fail(field, "expected numbers");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

Schedule parse_schedule(const json& spec) {
  if (spec.is_string()) {
    const auto s = spec.get<std::string>();
    if (s == "rectified_flow") return Schedule::rectified_flow();
    if (s == "vp_diffusion") return Schedule::vp_diffusion();
    fail("field.schedule", "unknown schedule '" + s + "'");
  }
  if (spec.is_object()) {
    const std::string kind = string_or(spec, "kind", "rectified_flow");
    if (kind == "rectified_flow") return Schedule::rectified_flow();
    if (kind == "vp_diffusion") return Schedule::vp_diffusion(int_or(spec, "steps", 1000));
    fail("field.schedule.kind", "unknown schedule '" + kind + "'");
  }
  fail("field.schedule", "expected a string or object");
}

GmmField parse_field(const json& cfg) {
  const json& spec = need(cfg, "field");
  const json& prompts = need(spec, "prompts");
  if (!prompts.is_array() || prompts.empty()) fail("field.prompts", "expected a non-empty array");
  std::vector<Mixture> mixtures;
  for (const auto& pj : prompts) {
    const json& comps = need(pj, "components");
    if (!comps.is_array() || comps.empty()) fail("field.prompts.components", "expected a non-empty array");
    Mixture m;
    for (const auto& cj : comps) {
      MixtureComponent c;
      c.weight = need_number(cj, "weight");
      c.mean = parse_vec(need(cj, "mean"), "field.prompts.components.mean");
      c.var = parse_vec(need(cj, "var"), "field.prompts.components.var");
      m.components.push_back(std::move(c));
    }
    mixtures.push_back(std::move(m));
  }
  return GmmField(parse_schedule(spec.contains("schedule") ? spec.at("schedule")
                                                           : json("rectified_flow")),
                  std::move(mixtures));
}

ShiftRule parse_shift(const json& spec, const std::string& field) {
  if (spec.is_string()) {
    const auto s = spec.get<std::string>();
    if (s == "zero") return ShiftRule::zero();
    if (s == "progressive") return ShiftRule::progressive();
    fail(field, "unknown shift '" + s + "' (use zero, progressive or {kind: linear_eta, eta})");
  }
  if (spec.is_object()) {
    const std::string kind = string_or(spec, "kind", "");
    if (kind == "zero") return ShiftRule::zero();
    if (kind == "progressive") return ShiftRule::progressive();
    if (kind == "linear_eta") return ShiftRule::linear(need_number(spec, "eta"));
    fail(field + ".kind", "unknown shift '" + kind + "'");
  }
  fail(field, "expected a string or object");
}

LrSchedule parse_lr(const json& spec) {
  if (!spec.is_object()) fail("edit.lr", "expected an object");
  const std::string kind = string_or(spec, "kind", "constant");
  if (kind == "constant") return LrSchedule::constant(number_or(spec, "value", 0.02));
  if (kind == "euler_matched") return LrSchedule::euler_matched();
  if (kind == "hump_tail") {
    const double base = number_or(spec, "base", 0.02);
    if (!spec.contains("knots")) return LrSchedule::hump_tail(base);
    std::vector<std::pair<double, double>> knots;
    for (const auto& kj : spec.at("knots")) {
      if (!kj.is_array() || kj.size() != 2) fail("edit.lr.knots", "expected [fraction, multiple] pairs");
      knots.emplace_back(kj[0].get<double>(), kj[1].get<double>());
    }
    return LrSchedule::hump_tail(base, std::move(knots));
  }
  fail("edit.lr.kind", "unknown kind '" + kind + "'");
}

EditConfig parse_edit(const json& cfg, std::uint64_t seed) {
  EditConfig ec;
  ec.seed = seed;
  if (!cfg.contains("edit")) return ec;
  const json& e = cfg.at("edit");
  ec.n_steps = int_or(e, "n_steps", ec.n_steps);
  ec.batch = int_or(e, "batch", ec.batch);
  const std::string sched = string_or(e, "scheduler", "descending");
  if (sched == "descending") {
    ec.scheduler = TimestepKind::Descending;
  } else if (sched == "random") {
    ec.scheduler = TimestepKind::Random;
  } else {
    fail("edit.scheduler", "unknown scheduler '" + sched + "'");
  }
  ec.t_lo = number_or(e, "t_lo", ec.t_lo);
  ec.t_hi = number_or(e, "t_hi", ec.t_hi);
  if (e.contains("shift")) ec.shift = parse_shift(e.at("shift"), "edit.shift");
  const std::string weight = string_or(e, "weight", "unit");
  if (weight == "unit") {
    ec.weight_mode = WeightMode::Unit;
  } else if (weight == "formula") {
    ec.weight_mode = WeightMode::Formula;
  } else {
    fail("edit.weight", "unknown weight mode '" + weight + "'");
  }
  ec.cfg_src = number_or(e, "cfg_src", ec.cfg_src);
  ec.cfg_tgt = number_or(e, "cfg_tgt", ec.cfg_tgt);
  const std::string opt = string_or(e, "optimizer", "sgd");
  if (opt == "sgd") {
    ec.optimizer = OptimizerKind::Sgd;
  } else if (opt == "adam") {
    ec.optimizer = OptimizerKind::Adam;
  } else {
    fail("edit.optimizer", "unknown optimizer '" + opt + "'");
  }
  if (e.contains("lr")) ec.lr = parse_lr(e.at("lr"));
  ec.validate();
  return ec;
}

struct Source {
  Vec x0;
  Prompt p_src = Prompt::conditional(0);
  Prompt p_tgt = Prompt::conditional(0);
};

Source parse_source(const json& cfg, const GmmField& field) {
  Source s;
  const json& src = need(cfg, "source");
  s.x0 = parse_vec(need(src, "x0"), "source.x0");
  if (s.x0.size() != field.dim()) fail("source.x0", "dimension does not match the field");
  s.p_src = Prompt::conditional(need_int(src, "prompt_src"));
  s.p_tgt = Prompt::conditional(need_int(src, "prompt_tgt"));
  field.mixture(s.p_src);
  field.mixture(s.p_tgt);
  return s;
}

TimeGrid parse_grid(const json& cfg) {
  if (!cfg.contains("grid")) return TimeGrid::uniform(50);
  const json& g = cfg.at("grid");
  return TimeGrid::uniform(int_or(g, "n_steps", 50), number_or(g, "t_lo", kTMin),
                           number_or(g, "t_hi", kTMax));
}

std::vector<std::uint64_t> parse_seeds(const json& cfg, std::uint64_t base_seed) {
  if (!cfg.contains("seeds")) return {base_seed};
  std::vector<std::uint64_t> seeds;
  for (const auto& s : cfg.at("seeds")) {
    if (!s.is_number_integer()) fail("seeds", "expected integers");
    seeds.push_back(s.get<std::uint64_t>());
  }
  if (seeds.empty()) fail("seeds", "expected a non-empty array");
  return seeds;
}

std::vector<std::string> coord_headers(int dim) {
  std::vector<std::string> h;
  for (int i = 0; i < dim; ++i) h.push_back("x" + std::to_string(i));
  return h;
}

void append_coords(std::vector<std::string>& row, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(cell(v[i]));
}

void write_record_csv(const EditRecord& rec, const fs::path& dir) {
  CsvTable table;
  table.header = {"step", "t", "lr", "grad_norm", "vdiff_sq"};
  const int dim = static_cast<int>(rec.final_latent().size());
  for (const auto& h : coord_headers(dim)) table.header.push_back(h);
  for (int k = 0; k < rec.n_steps(); ++k) {
    auto& row = table.add_row();
    row = {cell(k), cell(rec.ts[static_cast<std::size_t>(k)]),
           cell(rec.lrs[static_cast<std::size_t>(k)]),
           cell(rec.grad_norms[static_cast<std::size_t>(k)]),
           cell(rec.vdiff_sqs[static_cast<std::size_t>(k)])};
    append_coords(row, rec.iterates[static_cast<std::size_t>(k) + 1]);
  }
  write_csv(table, dir / "record.csv");

  CsvTable final_table;
  final_table.header = coord_headers(dim);
  append_coords(final_table.add_row(), rec.final_latent());
  write_csv(final_table, dir / "final.csv");
}

void write_trajectory_csv(const Trajectory& traj, const fs::path& path) {
  CsvTable table;
  table.header = {"step", "t"};
  const int dim = static_cast<int>(traj.states.front().size());
  for (const auto& h : coord_headers(dim)) table.header.push_back(h);
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    auto& row = table.add_row();
    row = {cell(static_cast<int>(i)), cell(traj.times[i])};
    append_coords(row, traj.states[i]);
  }
  write_csv(table, path);
}

double distance_to(const Vec& a, const Vec& b) { return (a - b).norm(); }

Vec ideal_target(const json& cfg, const GmmField& field, const Source& src) {
  if (cfg.contains("ideal_target")) return parse_vec(cfg.at("ideal_target"), "ideal_target");
  // Default: translate by the leading-component mean offset between prompts.
  const Vec mu_src = field.mixture(src.p_src).components.front().mean;
  const Vec mu_tgt = field.mixture(src.p_tgt).components.front().mean;
  return src.x0 + (mu_tgt - mu_src);
}

// ---- scenarios ------------------------------------------------------------

void scenario_edit(const json& cfg, const GmmField& field, const EditConfig& ec,
                   const fs::path& dir, bool flowedit) {
  const Source src = parse_source(cfg, field);
  const EditRecord rec = flowedit
                             ? flowedit_baseline(field, ec, src.x0, src.p_src, src.p_tgt)
                             : edit_delta_v(field, ec, src.x0, src.p_src, src.p_tgt);
  write_record_csv(rec, dir);
}

void scenario_ddib(const json& cfg, const GmmField& field, const fs::path& dir) {
  const Source src = parse_source(cfg, field);
  const TimeGrid grid = parse_grid(cfg);
  const double cfg_src = number_or(cfg, "cfg_src", 1.0);
  const double cfg_tgt = number_or(cfg, "cfg_tgt", 1.0);
  const DdibResult res =
      ddib_translate_full(field, src.x0, src.p_src, src.p_tgt, grid, cfg_src, cfg_tgt);
  write_trajectory_csv(res.invert_leg, dir / "invert.csv");
  write_trajectory_csv(res.generate_leg, dir / "generate.csv");
  CsvTable table;
  table.header = coord_headers(field.dim());
  append_coords(table.add_row(), res.output);
  write_csv(table, dir / "result.csv");
}

void scenario_recon(const json& cfg, const GmmField& field, const fs::path& dir) {
  const Source src = parse_source(cfg, field);
  std::vector<std::string> modes = {"rf_euler"};
  if (cfg.contains("modes")) {
    modes.clear();
    for (const auto& m : cfg.at("modes")) modes.push_back(m.get<std::string>());
  }
  std::vector<int> step_counts = {50};
  if (cfg.contains("grid_steps")) {
    step_counts.clear();
    for (const auto& n : cfg.at("grid_steps")) step_counts.push_back(n.get<int>());
  }
  const double t_lo = number_or(cfg, "t_lo", kTMin);
  const double t_hi = number_or(cfg, "t_hi", kTMax);

  CsvTable table;
  table.header = {"mode", "n_steps", "step", "t", "error"};
  for (const auto& mode_name : modes) {
    ReconMode mode;
    if (mode_name == "rf_euler") {
      mode = ReconMode::RfEuler;
    } else if (mode_name == "ddim") {
      mode = ReconMode::Ddim;
    } else {
      fail("modes", "unknown mode '" + mode_name + "'");
    }
    for (int n : step_counts) {
      const TimeGrid grid = TimeGrid::uniform(n, t_lo, t_hi);
      int step = 0;
      for (const auto& [t, err] : reconstruction_error(field, src.x0, src.p_src, grid, mode)) {
        table.add_row() = {mode_name, cell(n), cell(step++), cell(t), cell(err)};
      }
    }
  }
  write_csv(table, dir / "recon.csv");
}

void scenario_eta_sweep(const json& cfg, const GmmField& field, const EditConfig& ec,
                        std::uint64_t seed, int threads, const fs::path& dir) {
  const Source src = parse_source(cfg, field);
  std::vector<double> etas = {0.0, 0.5, 1.0};
  if (cfg.contains("etas")) {
    etas.clear();
    for (const auto& e : cfg.at("etas")) etas.push_back(e.get<double>());
  }
  const std::vector<std::uint64_t> seeds = parse_seeds(cfg, seed);
  const auto rows = eta_sweep(field, ec, src.x0, src.p_src, src.p_tgt, etas, seeds, threads);

  CsvTable table;
  table.header = {"eta", "seed", "S_R", "update_energy"};
  for (const auto& r : rows) {
    table.add_row() = {cell(r.eta), cell(r.seed), cell(r.path_ratio), cell(r.update_energy)};
  }
  write_csv(table, dir / "etasweep.csv");

  CsvTable summary;
  summary.header = {"eta", "mean_S_R", "mean_update_energy"};
  for (const auto& r : eta_sweep_means(rows)) {
    summary.add_row() = {cell(r.eta), cell(r.path_ratio), cell(r.update_energy)};
  }
  write_csv(summary, dir / "etasweep_summary.csv");
}

void scenario_equivalence(const json& cfg, const GmmField& field, const EditConfig& ec,
                          std::uint64_t seed, const fs::path& dir) {
  const std::string kind = string_or(cfg, "kind", "dds_delta_v");
  const int probes = int_or(cfg, "probes", 50);
  const double lr_scale = number_or(cfg, "lr_scale", 1.0);
  double deviation = 0.0;
  if (kind == "dds_delta_v") {
    const Source src = parse_source(cfg, field);
    DistillContext ctx = ec.context(field);
    deviation = dds_delta_v_max_deviation(ctx, src.p_tgt, src.p_src, probes, seed);
  } else if (kind == "flowedit_delta_v") {
    const Source src = parse_source(cfg, field);
    deviation = flowedit_delta_v_max_deviation(field, ec, src.x0, src.p_src, src.p_tgt, lr_scale);
  } else {
    fail("kind", "unknown equivalence kind '" + kind + "'");
  }
  CsvTable table;
  table.header = {"kind", "probes", "lr_scale", "max_rel_deviation"};
  table.add_row() = {kind, cell(probes), cell(lr_scale), cell(deviation)};
  write_csv(table, dir / "equivalence.csv");
}

void scenario_ablation(const json& cfg, const GmmField& field, const EditConfig& base,
                       std::uint64_t seed, const fs::path& dir, const std::string& which) {
  const Source src = parse_source(cfg, field);
  const std::vector<std::uint64_t> seeds = parse_seeds(cfg, seed);
  const Vec ideal = ideal_target(cfg, field, src);

  struct Variant {
    std::string name;
    EditConfig cfg;
  };
  std::vector<Variant> variants;
  if (which == "scheduler_ablation") {
    for (const auto& [name, kind] :
         {std::pair<std::string, TimestepKind>{"descending", TimestepKind::Descending},
          std::pair<std::string, TimestepKind>{"random", TimestepKind::Random}}) {
      EditConfig c = base;
      c.scheduler = kind;
      variants.push_back({name, c});
    }
  } else if (which == "shift_ablation") {
    std::vector<std::pair<std::string, ShiftRule>> shifts = {
        {"zero", ShiftRule::zero()},
        {"progressive", ShiftRule::progressive()},
        {"linear_eta_1", ShiftRule::linear(1.0)},
    };
    for (auto& [name, rule] : shifts) {
      EditConfig c = base;
      c.shift = rule;
      variants.push_back({name, c});
    }
  } else {
    for (const auto& [name, kind] :
         {std::pair<std::string, OptimizerKind>{"sgd", OptimizerKind::Sgd},
          std::pair<std::string, OptimizerKind>{"adam", OptimizerKind::Adam}}) {
      EditConfig c = base;
      c.optimizer = kind;
      variants.push_back({name, c});
    }
  }

  CsvTable table;
  table.header = {which == "scheduler_ablation" ? "scheduler"
                  : which == "shift_ablation"   ? "shift"
                                                : "optimizer",
                  "seed", "dist_to_source", "dist_to_target", "S_R", "update_energy"};
  for (const auto& variant : variants) {
    for (std::uint64_t s : seeds) {
      EditConfig c = variant.cfg;
      c.seed = s;
      const EditRecord rec = edit_delta_v(field, c, src.x0, src.p_src, src.p_tgt);
      double ratio = 1.0;
      try {
        ratio = path_to_chord(rec.iterates).ratio;
      } catch (const DegeneratePathError&) {
        ratio = 1.0;  // untouched iterate: treat the empty path as straight
      }
      table.add_row() = {variant.name,
                         cell(s),
                         cell(distance_to(rec.final_latent(), src.x0)),
                         cell(distance_to(rec.final_latent(), ideal)),
                         cell(ratio),
                         cell(update_energy(rec))};
    }
  }
  write_csv(table, dir / (which + ".csv"));
}

void emit_plots(const json& cfg, const fs::path& dir) {
  if (!cfg.contains("plots")) return;
  for (const auto& p : cfg.at("plots")) {
    const std::string csv = need(p, "csv").get<std::string>();
    const std::string x = need(p, "x").get<std::string>();
    const std::string y = need(p, "y").get<std::string>();
    const std::string out = string_or(p, "out", csv + ".svg");
    std::optional<std::string> group;
    if (p.contains("group") && !p.at("group").is_null()) {
      group = p.at("group").get<std::string>();
    }
    emit_svg(dir / csv, x, y, group, dir / out);
  }
}

fs::path resolve_out_dir(const RunOptions& opts) {
  if (opts.out_dir) return *opts.out_dir;
  const char* root = std::getenv(kOutRootEnv);
  return fs::path(root != nullptr ? root : "runs") / opts.config_path.stem();
}

}  // namespace

std::filesystem::path run_experiment_or_throw(const RunOptions& opts) {
  std::ifstream in(opts.config_path);
  if (!in) throw IoError("cannot open config " + opts.config_path.string());
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  if (!need(cfg, "scenario").is_string()) fail("scenario", "expected a string");
  const std::string scenario = cfg.at("scenario").get<std::string>();
  if (!cfg.contains("seed")) fail("seed", "missing (a run seed is mandatory)");
  if (!cfg.at("seed").is_number_integer()) fail("seed", "expected an integer");
  const std::uint64_t seed = opts.seed ? *opts.seed : cfg.at("seed").get<std::uint64_t>();
  cfg["seed"] = seed;

  static const std::vector<std::string> kScenarios = {
      "edit",        "flowedit",    "ddib",
      "recon_error", "eta_sweep",   "equivalence",
      "scheduler_ablation", "shift_ablation", "optimizer_ablation"};
  if (std::find(kScenarios.begin(), kScenarios.end(), scenario) == kScenarios.end()) {
    fail("scenario", "unknown scenario '" + scenario + "'");
  }

  const GmmField field = parse_field(cfg);
  const EditConfig edit_cfg = parse_edit(cfg, seed);

  const fs::path dir = resolve_out_dir(opts);
  std::error_code ec;
  if (fs::exists(dir) && !fs::is_empty(dir, ec)) {
    throw IoError("run directory " + dir.string() + " already exists and is not empty");
  }
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());

  {
    json manifest;
    manifest["tool"] = kToolName;
    manifest["version"] = kToolVersion;
    manifest["seed"] = seed;
    manifest["config"] = cfg;
    std::ofstream mf(dir / "manifest.json", std::ios::binary);
    if (!mf) throw IoError("cannot write manifest.json");
    mf << manifest.dump(2) << '\n';
  }

  if (scenario == "edit") {
    scenario_edit(cfg, field, edit_cfg, dir, /*flowedit=*/false);
  } else if (scenario == "flowedit") {
    scenario_edit(cfg, field, edit_cfg, dir, /*flowedit=*/true);
  } else if (scenario == "ddib") {
    scenario_ddib(cfg, field, dir);
  } else if (scenario == "recon_error") {
    scenario_recon(cfg, field, dir);
  } else if (scenario == "eta_sweep") {
    scenario_eta_sweep(cfg, field, edit_cfg, seed, opts.threads, dir);
  } else if (scenario == "equivalence") {
    scenario_equivalence(cfg, field, edit_cfg, seed, dir);
  } else {
    scenario_ablation(cfg, field, edit_cfg, seed, dir, scenario);
  }

  emit_plots(cfg, dir);
  return dir;
}

int run_experiment(const RunOptions& opts) {
  try {
    run_experiment_or_throw(opts);
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "rfedit: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ShapeError& e) {
    std::cerr << "rfedit: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "rfedit: numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DomainError& e) {
    std::cerr << "rfedit: numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const UnreliableEstimateError& e) {
    std::cerr << "rfedit: numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DegeneratePathError& e) {
    std::cerr << "rfedit: numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "rfedit: io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "rfedit: io error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace rfedit
