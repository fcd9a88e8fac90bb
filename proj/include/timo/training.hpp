#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "timo/network.hpp"
#include "timo/physics.hpp"
#include "timo/sampling.hpp"

namespace timo {

/// MSE_1..MSE_4 (PDE), MSE_5/MSE_6 (boundary at x = 0 / x = 1),
/// MSE_7/MSE_8 (initial values / initial velocities). All weights are 1.
struct LossBreakdown {
  double total = 0.0;
  std::array<double, 8> mse{};

  double pde() const { return mse[0] + mse[1] + mse[2] + mse[3]; }
  double boundary() const { return mse[4] + mse[5]; }
  double initial() const { return mse[6] + mse[7]; }
};

inline constexpr std::array<std::string_view, 8> kLossColumnNames = {
    "mse_pde1", "mse_pde2", "mse_pde3", "mse_pde4", "mse_bc0", "mse_bc1", "mse_ic_val", "mse_ic_vel"};

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamState(std::size_t n, AdamConfig cfg = {});

  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  AdamConfig config;
};

/// Bias-corrected Adam update. Throws std::domain_error (parameters untouched)
/// if any gradient entry is non-finite, std::invalid_argument on a size mismatch.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

struct TrainConfig {
  int epochs = 10000;
  CollocationSizes collocation;
  /// Network init uses `seed`; collocation sampling uses `seed + 1`.
  std::uint64_t seed = 1;
  LayerSpec layers;
  PhysicalParams physics;
  BoundarySpec boundary;
  InitialData initial;
  /// Subtract the manufactured forcing from the PDE residuals.
  bool use_sources = false;
  /// Sum the deviations of each boundary/initial condition before squaring,
  /// instead of squaring each deviation separately.
  bool paper_literal_aggregation = false;
  int log_every = 1;
  AdamConfig adam;
  /// Points per tape; gradients are reduced over chunks in ascending order.
  std::size_t chunk_size = 128;

  std::uint64_t init_seed() const { return seed; }
  std::uint64_t sampling_seed() const { return seed + 1; }
  void validate() const;
};

struct LossGradient {
  LossBreakdown loss;
  std::vector<double> grad;
};

/// Loss and its parameter gradient, recorded on tapes.
LossGradient compute_loss(const NetworkParams& params, const CollocationSet& batch, const TrainConfig& cfg);

using FieldModel = std::function<FieldEval(double x, double t)>;

/// The same loss evaluated pointwise through the physics functions, for any
/// field model (a network, the exact solution, ...). No gradient.
LossBreakdown evaluate_loss(const FieldModel& model, const CollocationSet& batch, const TrainConfig& cfg);

struct HistoryRow {
  std::int64_t epoch = 0;
  LossBreakdown loss;
};

struct TrainResult {
  NetworkParams params;
  std::vector<HistoryRow> history;
  CollocationSet batch;
};

/// Raised when the loss or gradient turns non-finite. Carries the parameters
/// of the last epoch whose loss was finite.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, NetworkParams last_good, std::int64_t epoch,
                  std::vector<HistoryRow> history);

  const NetworkParams& last_good() const { return last_good_; }
  std::int64_t epoch() const { return epoch_; }
  const std::vector<HistoryRow>& history() const { return history_; }

 private:
  NetworkParams last_good_;
  std::int64_t epoch_;
  std::vector<HistoryRow> history_;
};

/// Called after every epoch with the epoch index and its loss.
using ProgressFn = std::function<void(std::int64_t epoch, const LossBreakdown& loss)>;

/// One full-batch Adam step per epoch on a fixed collocation set. History
/// rows are taken every `log_every` epochs, starting at epoch 0, and hold the
/// loss at the parameters before that epoch's update.
TrainResult train(const TrainConfig& cfg, const ProgressFn& progress = {});

/// epoch,total,mse_pde1,...,mse_ic_vel with 17 significant digits.
void write_loss_history_csv(std::ostream& os, std::span<const HistoryRow> history);

}  // namespace timo
