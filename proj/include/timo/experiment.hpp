#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "timo/diagnostics.hpp"
#include "timo/training.hpp"

namespace timo {

struct ExperimentConfig {
  std::string preset = "manufactured";
  TrainConfig train;
  std::size_t grid_nx = 100;
  std::size_t grid_nt = 1000;
  /// Decay fits use t > t_cut_fraction * T.
  double t_cut_fraction = 0.2;
  std::filesystem::path output_dir = "runs";

  /// Throws std::invalid_argument on any invalid field.
  void validate() const;
  EvalGrid grid() const { return uniform_grid(grid_nx, grid_nt, train.physics.T); }
  double t_cut() const { return t_cut_fraction * train.physics.T; }
  /// The manufactured problem has a known exact solution.
  bool has_exact_solution() const { return train.use_sources; }
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Fields present in `j` override `base`; unknown keys are rejected.
ExperimentConfig merge_json(ExperimentConfig base, const nlohmann::json& j);
/// A document with a "preset" key starts from that preset, otherwise from the default.
ExperimentConfig config_from_json(const nlohmann::json& j);

struct PresetInfo {
  std::string name;
  std::string description;
};

const std::vector<PresetInfo>& preset_catalog();
/// Throws std::invalid_argument listing the valid names for an unknown preset.
ExperimentConfig make_preset(std::string_view name);

struct DiagnosticsResult {
  EnergySeries energy;
  DecayClassification fits;
  std::vector<ErrorRow> errors;           // empty without an exact solution
  std::array<double, 4> relative_error{};  // phi, psi, theta, q
};

/// Evaluates the network on the diagnostic grid and writes energy.csv,
/// fits.json and, with an exact solution, errors.csv into cfg.output_dir.
DiagnosticsResult write_diagnostics(const NetworkParams& params, const ExperimentConfig& cfg);

struct RunOutcome {
  TrainResult train;
  DiagnosticsResult diagnostics;
};

/// Trains, then writes checkpoint.json, loss_history.csv, manifest.json and the
/// diagnostics. On a non-finite loss the last good checkpoint and the history
/// so far are written before TrainingAborted propagates.
RunOutcome run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

/// Rebuilds the diagnostics from a checkpoint. Throws std::invalid_argument if
/// the checkpoint architecture differs from cfg.train.layers.
DiagnosticsResult analyze_checkpoint(const std::filesystem::path& checkpoint, const ExperimentConfig& cfg);

nlohmann::json make_manifest(const ExperimentConfig& cfg);

}  // namespace timo
