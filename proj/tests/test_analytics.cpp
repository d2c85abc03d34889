#include <doctest.h>

#include "fixtures.hpp"
#include "rfedit/analytics.hpp"

using namespace rfedit;
using namespace rfedit::testing;

TEST_CASE("path-to-chord ratio basics") {
  const std::vector<Vec> collinear = {vec({0.0, 0.0}), vec({1.0, 1.0}), vec({2.0, 2.0}),
                                      vec({3.0, 3.0})};
  CHECK(path_to_chord(collinear).ratio == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<Vec> corner = {vec({0.0, 0.0}), vec({1.0, 0.0}), vec({1.0, 1.0})};
  const StraightnessReport rep = path_to_chord(corner);
  CHECK(rep.ratio == doctest::Approx(2.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(rep.path_length == doctest::Approx(2.0));
  CHECK(rep.chord_length == doctest::Approx(std::sqrt(2.0)));
  REQUIRE(rep.step_lengths.size() == 2);

  const std::vector<Vec> segment = {vec({0.2, 0.4}), vec({1.0, -0.3})};
  CHECK(path_to_chord(segment).ratio == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<Vec> degenerate = {vec({1.0, 1.0}), vec({2.0, 0.0}), vec({1.0, 1.0})};
  CHECK_THROWS_AS(path_to_chord(degenerate), DegeneratePathError);
  CHECK_THROWS_AS(path_to_chord({vec({1.0})}), ConfigError);
}

TEST_CASE("path-to-chord ratio is at least one and rigid-motion invariant") {
  RngStream rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec> pts;
    for (int i = 0; i < 12; ++i) pts.push_back(rng.gaussian(2));
    StraightnessReport rep;
    try {
      rep = path_to_chord(pts);
    } catch (const DegeneratePathError&) {
      continue;
    }
    CHECK(rep.ratio >= 1.0 - 1e-12);

    // rotate and scale the whole path
    const double theta = rng.uniform(0, 2 * M_PI);
    const double scale = rng.uniform(0.2, 5.0);
    Mat rot(2, 2);
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    std::vector<Vec> moved;
    for (const Vec& p : pts) moved.push_back(Vec(scale * (rot * p)));
    CHECK(path_to_chord(moved).ratio == doctest::Approx(rep.ratio).epsilon(1e-10));
  }
}

TEST_CASE("update energy sums the recorded per-step terms") {
  const TranslationTask task = trend_task();
  EditConfig cfg = task.base;
  cfg.n_steps = 12;
  cfg.seed = 4;
  const EditRecord rec = edit_delta_v(task.field, cfg, task.x0, task.p_src, task.p_tgt);
  double manual = 0.0;
  for (double v : rec.vdiff_sqs) manual += v;
  CHECK(update_energy(rec) == doctest::Approx(manual).epsilon(1e-12));

  // identical prompts: zero energy (single-prompt field keeps it exact)
  const GmmField single = standard_field(2);
  EditConfig same = cfg;
  const EditRecord none =
      edit_delta_v(single, same, vec({0.1, 0.1}), Prompt::conditional(0), Prompt::conditional(0));
  CHECK(update_energy(none) == 0.0);
}

TEST_CASE("eta sweep rows match direct runs and aggregate by eta") {
  const TranslationTask task = trend_task();
  const std::vector<double> etas = {0.0, 1.0};
  const std::vector<std::uint64_t> seeds = {7, 8};
  const auto rows = eta_sweep(task.field, task.base, task.x0, task.p_src, task.p_tgt, etas, seeds);
  REQUIRE(rows.size() == 4);

  EditConfig direct = task.base;
  direct.shift = ShiftRule::linear(1.0);
  direct.seed = 8;
  const EditRecord rec = edit_delta_v(task.field, direct, task.x0, task.p_src, task.p_tgt);
  CHECK(rows[3].eta == 1.0);
  CHECK(rows[3].seed == 8);
  CHECK(rows[3].path_ratio == doctest::Approx(path_to_chord(rec.iterates).ratio).epsilon(1e-14));
  CHECK(rows[3].update_energy == doctest::Approx(update_energy(rec)).epsilon(1e-14));

  const auto means = eta_sweep_means(rows);
  REQUIRE(means.size() == 2);
  CHECK(means[0].eta == 0.0);
  CHECK(means[0].path_ratio ==
        doctest::Approx(0.5 * (rows[0].path_ratio + rows[1].path_ratio)).epsilon(1e-14));

  // single cell: one row whose values match the direct run
  const auto one = eta_sweep(task.field, task.base, task.x0, task.p_src, task.p_tgt, {1.0}, {8});
  REQUIRE(one.size() == 1);
  CHECK(one[0].path_ratio == rows[3].path_ratio);
  CHECK(one[0].update_energy == rows[3].update_energy);
}

TEST_CASE("eta sweep is independent of the worker count") {
  const TranslationTask task = trend_task();
  EditConfig base = task.base;
  base.n_steps = 15;
  const std::vector<double> etas = {0.0, 0.5, 1.0};
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  const auto serial = eta_sweep(task.field, base, task.x0, task.p_src, task.p_tgt, etas, seeds, 1);
  const auto parallel = eta_sweep(task.field, base, task.x0, task.p_src, task.p_tgt, etas, seeds, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].path_ratio == parallel[i].path_ratio);
    CHECK(serial[i].update_energy == parallel[i].update_energy);
  }
}

TEST_CASE("straighter paths and larger updates as the shift grows") {
  const TranslationTask task = trend_task();
  const std::vector<double> etas = {0.0, 0.5, 1.0};
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(100 + s);
  const auto means = eta_sweep_means(
      eta_sweep(task.field, task.base, task.x0, task.p_src, task.p_tgt, etas, seeds));
  REQUIRE(means.size() == 3);
  CHECK(means[0].path_ratio > means[1].path_ratio);
  CHECK(means[1].path_ratio > means[2].path_ratio);
  CHECK(means[0].update_energy < means[1].update_energy);
  CHECK(means[1].update_energy < means[2].update_energy);
}

TEST_CASE("finite-difference gradient oracle") {
  const auto quadratic = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  const Vec x = vec({0.3, -1.2, 0.7});
  CHECK((finite_diff_gradient(quadratic, x, 1e-5) - x).norm() < 1e-9);

  // h-refinement: central differences are second order, error ratio ~ 4
  const auto quartic = [](const Vec& v) { return std::pow(v[0], 4.0); };
  const Vec probe = vec({1.3});
  const double exact = 4.0 * std::pow(1.3, 3.0);
  const double err_h = std::abs(finite_diff_gradient(quartic, probe, 1e-3)[0] - exact);
  const double err_h2 = std::abs(finite_diff_gradient(quartic, probe, 5e-4)[0] - exact);
  CHECK(err_h / err_h2 == doctest::Approx(4.0).epsilon(0.05));

  CHECK_THROWS_AS(finite_diff_gradient(quadratic, x, 0.0), ConfigError);
  const auto bad = [](const Vec&) { return std::numeric_limits<double>::quiet_NaN(); };
  CHECK_THROWS_AS(finite_diff_gradient(bad, x, 1e-5), DomainError);
}

TEST_CASE("equivalence reports pass and their negative controls fail") {
  const TranslationTask task = trend_task();
  DistillContext ctx;
  ctx.field = &task.field;
  ctx.cfg_src = 2.0;
  ctx.cfg_tgt = 5.0;
  CHECK(dds_delta_v_max_deviation(ctx, task.p_tgt, task.p_src, 50, 7) < 1e-10);

  EditConfig cfg = task.base;
  cfg.seed = 5;
  CHECK(flowedit_delta_v_max_deviation(task.field, cfg, task.x0, task.p_src, task.p_tgt) < 1e-9);
  CHECK(flowedit_delta_v_max_deviation(task.field, cfg, task.x0, task.p_src, task.p_tgt, 1.07) >
        1e-3);
}
