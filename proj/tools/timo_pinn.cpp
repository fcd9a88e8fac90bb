#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "timo/experiment.hpp"

namespace {

struct Overrides {
  std::string preset;
  std::string config;
  std::optional<int> epochs;
  std::optional<std::size_t> collocation;
  std::optional<std::string> out;
  std::optional<std::size_t> grid_nx;
  std::optional<std::size_t> grid_nt;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--preset", o.preset, "named preset (see `presets`)");
  cmd->add_option("--config", o.config, "JSON config; its fields override the preset");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--grid-nx", o.grid_nx, "diagnostic grid intervals in x");
  cmd->add_option("--grid-nt", o.grid_nt, "diagnostic grid intervals in t");
  cmd->add_option("--seed", o.seed, "network seed; sampling uses seed + 1");
}

// preset < config file < flags; output directory: --out, TIMO_PINN_OUT, config, runs/<preset>
timo::ExperimentConfig resolve(const Overrides& o) {
  nlohmann::json file = nlohmann::json::object();
  if (!o.config.empty()) {
    std::ifstream is(o.config);
    if (!is) throw std::invalid_argument("cannot read config " + o.config);
    try {
      file = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("config " + o.config + ": " + e.what());
    }
  }
  std::string preset = o.preset;
  if (preset.empty() && file.contains("preset")) preset = file.at("preset").get<std::string>();
  if (preset.empty()) preset = "manufactured";
  file.erase("preset");
  timo::ExperimentConfig cfg = timo::merge_json(timo::make_preset(preset), file);
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.collocation) cfg.train.collocation = {*o.collocation, *o.collocation, *o.collocation};
  if (o.grid_nx) cfg.grid_nx = *o.grid_nx;
  if (o.grid_nt) cfg.grid_nt = *o.grid_nt;
  if (o.seed) cfg.train.seed = *o.seed;
  const char* env = std::getenv("TIMO_PINN_OUT");
  if (o.out) {
    cfg.output_dir = *o.out;
  } else if (env && *env) {
    cfg.output_dir = env;
  } else if (!file.contains("output_dir")) {
    cfg.output_dir = "runs/" + preset;
  }
  cfg.validate();
  return cfg;
}

void print_presets() {
  for (const timo::PresetInfo& info : timo::preset_catalog()) {
    const timo::ExperimentConfig cfg = timo::make_preset(info.name);
    const timo::PhysicalParams& p = cfg.train.physics;
    std::cout << info.name << "\n  " << info.description << "\n  rho1=" << p.rho1 << " rho2=" << p.rho2
              << " rho3=" << p.rho3 << " b=" << p.b << " k=" << p.k << " delta=" << p.delta << " beta=" << p.beta
              << " tau=" << p.tau << " mu=" << p.mu << " damping=" << timo::to_string(p.damping) << " T=" << p.T
              << " epochs=" << cfg.train.epochs << "\n  chi=" << timo::stability_number(p) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PINN solver and energy diagnostics for the thermoelastic Timoshenko beam"};
  app.require_subcommand(1);

  Overrides run_opts;
  CLI::App* run = app.add_subcommand("run", "train a network and write all artifacts");
  add_common(run, run_opts);
  run->add_option("--epochs", run_opts.epochs, "training epochs");
  run->add_option("--collocation", run_opts.collocation, "points per term group (interior, boundary, initial)");
  bool quiet = false;
  run->add_flag("--quiet", quiet, "no per-epoch progress");

  Overrides analyze_opts;
  std::string checkpoint;
  CLI::App* analyze = app.add_subcommand("analyze", "recompute diagnostics from a checkpoint");
  analyze->add_option("checkpoint", checkpoint, "checkpoint.json")->required();
  add_common(analyze, analyze_opts);

  app.add_subcommand("presets", "list the preset catalog");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("presets")) {
      print_presets();
      return 0;
    }
    if (run->parsed()) {
      const timo::ExperimentConfig cfg = resolve(run_opts);
      const std::int64_t every = std::max<std::int64_t>(1, cfg.train.epochs / 20);
      timo::ProgressFn progress;
      if (!quiet) {
        progress = [every](std::int64_t epoch, const timo::LossBreakdown& loss) {
          if (epoch % every == 0) std::cerr << "epoch " << epoch << " loss " << loss.total << '\n';
        };
      }
      const timo::RunOutcome out = timo::run_experiment(cfg, progress);
      std::cout << "wrote " << cfg.output_dir.string() << " (chi=" << timo::stability_number(cfg.train.physics)
                << ", best decay fit " << timo::to_string(out.diagnostics.fits.best) << ")\n";
      return 0;
    }
    const timo::ExperimentConfig cfg = resolve(analyze_opts);
    const timo::DiagnosticsResult r = timo::analyze_checkpoint(checkpoint, cfg);
    std::cout << "wrote " << cfg.output_dir.string() << " (best decay fit " << timo::to_string(r.fits.best) << ")\n";
    return 0;
  } catch (const timo::TrainingAborted& e) {
    std::cerr << "training aborted at epoch " << e.epoch() << ": " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
