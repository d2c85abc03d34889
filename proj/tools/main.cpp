#include <CLI11.hpp>
#include <iostream>

#include "rfedit/runner.hpp"
#include "rfedit/svg.hpp"

int main(int argc, char** argv) {
  CLI::App app{"rfedit: rectified-flow editing experiments on analytic mixture fields"};
  app.require_subcommand(1);

  rfedit::RunOptions opts;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "execute a scenario from a JSON config");
  run->add_option("config", config_path, "path to the experiment config")->required();
  run->add_option("--out", out_dir, "run directory (default: $RFEDIT_OUT_ROOT/<config stem>)");
  auto* seed_opt = run->add_option("--seed", seed, "override the config seed");
  run->add_option("--threads", opts.threads, "worker threads for sweep cells")
      ->check(CLI::PositiveNumber);

  std::string plot_csv, plot_x, plot_y, plot_group, plot_out;
  auto* plot = app.add_subcommand("plot", "render a CSV into a line-plot SVG");
  plot->add_option("csv", plot_csv, "input CSV")->required();
  plot->add_option("--x", plot_x, "x column")->required();
  plot->add_option("--y", plot_y, "y column")->required();
  plot->add_option("--group", plot_group, "one polyline per distinct value of this column");
  plot->add_option("--out", plot_out, "output SVG path")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    opts.config_path = config_path;
    if (!out_dir.empty()) opts.out_dir = out_dir;
    if (seed_opt->count() > 0) opts.seed = seed;
    return rfedit::run_experiment(opts);
  }

  try {
    std::optional<std::string> group;
    if (!plot_group.empty()) group = plot_group;
    rfedit::emit_svg(plot_csv, plot_x, plot_y, group, plot_out);
  } catch (const rfedit::ConfigError& e) {
    std::cerr << "rfedit: " << e.what() << '\n';
    return rfedit::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "rfedit: " << e.what() << '\n';
    return rfedit::kExitIo;
  }
  return rfedit::kExitOk;
}
