#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "trgan/errors.hpp"
#include "trgan/experiment.hpp"
#include "trgan/figures.hpp"

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<long> steps;
  bool quiet = false;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--seed", o.seed, "Master seed (overrides the config)");
  cmd->add_option("--steps", o.steps, "Total training steps (overrides the config)")->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet", o.quiet, "Suppress progress messages");
}

trgan::ExperimentConfig load(const std::string& path, const Overrides& o) {
  trgan::ExperimentConfig c = trgan::load_experiment_config(path);
  if (o.out) c.output_dir = *o.out;
  if (o.seed) c.seed = *o.seed;
  if (o.steps) c.trgan.total_steps = *o.steps;
  return c;
}

trgan::Logger logger(const Overrides& o) {
  if (o.quiet) return {};
  return [](const std::string& msg) { std::cerr << "trgan: " << msg << '\n'; };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Membership-inference workbench for transversal 3-D GANs"};
  app.require_subcommand(1);
  Overrides o;
  std::string config, checkpoint, report_path, out_dir;

  auto* run = app.add_subcommand("run", "Run the full study described by a config file");
  run->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  add_overrides(run, o);

  auto* eval = app.add_subcommand("evaluate", "Evaluate one saved checkpoint");
  eval->add_option("checkpoint", checkpoint, "Checkpoint manifest (ckpt-*.json)")->required()->check(CLI::ExistingFile);
  eval->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  add_overrides(eval, o);

  auto* plot = app.add_subcommand("plot", "Emit figures from a report, or re-render them from a figure data directory");
  plot->add_option("report", report_path, "report.json or a directory of figure CSV files")->required()->check(CLI::ExistingPath);
  add_overrides(plot, o);

  auto* phantoms = app.add_subcommand("phantoms", "Write the configured phantom dataset as volume files");
  phantoms->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  phantoms->add_option("out-dir", out_dir, "Destination directory")->required();
  add_overrides(phantoms, o);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto c = load(config, o);
      const auto report = trgan::run_experiment(c, logger(o));
      if (!o.quiet) std::cerr << "trgan: report written to " << (c.output_dir / "report.json").string() << '\n';
      std::cout << trgan::points_csv(report.points);
    } else if (*eval) {
      const auto c = load(config, o);
      const auto p = trgan::evaluate_checkpoint(checkpoint, c, logger(o));
      std::cout << trgan::points_csv({p});
    } else if (*plot) {
      const fs::path in = report_path;
      std::vector<std::string> files;
      fs::path dest;
      if (fs::is_directory(in)) {
        dest = o.out ? fs::path(*o.out) : in;
        files = trgan::render_figures(in, dest);
      } else {
        dest = o.out ? fs::path(*o.out) : in.parent_path() / "figures";
        files = trgan::emit_figures(trgan::load_report(in), dest);
      }
      for (const auto& f : files) std::cout << (dest / f).string() << '\n';
    } else if (*phantoms) {
      const auto c = load(config, o);
      for (const auto& p : trgan::write_phantoms(c, o.out ? fs::path(*o.out) : fs::path(out_dir))) {
        std::cout << p.string() << '\n';
      }
    }
  } catch (const trgan::ConfigError& e) {
    std::cerr << "trgan: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "trgan: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
