#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "timo/jet.hpp"
#include "timo/tape.hpp"

namespace timo {

/// Layer widths from input to output. Inputs are (x, t); outputs are
/// (phi, psi, theta, q).
struct LayerSpec {
  std::vector<int> sizes = {2, 100, 100, 100, 100, 100, 4};

  /// Throws std::invalid_argument unless sizes = [2, ..., 4] with every width positive.
  void validate() const;
  std::size_t layer_count() const { return sizes.size() - 1; }
  /// sum over layers of n_in * n_out + n_out.
  std::size_t param_count() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Weights and biases of every layer in one flat array. Layer l occupies a
/// row-major n_out x n_in weight matrix followed by n_out biases.
class NetworkParams {
 public:
  NetworkParams() = default;
  /// Throws std::invalid_argument if flat.size() != spec.param_count().
  NetworkParams(LayerSpec spec, std::vector<double> flat);

  const LayerSpec& spec() const { return spec_; }
  std::span<const double> flat() const { return flat_; }
  std::vector<double>& mutable_flat() { return flat_; }

  ParamBlock block(std::size_t layer) const;
  Eigen::Map<const RowMatrix> weights(std::size_t layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;

 private:
  LayerSpec spec_;
  std::vector<double> flat_;
};

/// Glorot-uniform weights, zero biases. Weights are drawn layer by layer in
/// storage order from std::mt19937_64(seed); each 64-bit draw r becomes
/// u = (r >> 11) * 2^-53 and then w = (2u - 1) * sqrt(6 / (fan_in + fan_out)).
NetworkParams init_params(const LayerSpec& spec, std::uint64_t seed);

/// Network outputs at one point, each with the partials the residuals use.
struct FieldEval {
  Jet2 phi;
  Jet2 psi;
  Jet2 theta;
  Jet2 q;
};

/// Pointwise evaluation with scalar jets: tanh hidden layers, linear output.
FieldEval forward(const NetworkParams& params, double x, double t);

/// Records the network on a tape over an input node from Tape::seed. The tape
/// must have been built over params.flat(). Returns the 4-row output node.
NodeId forward_on_tape(Tape& tape, const NetworkParams& params, NodeId input);

/// Batched evaluation at points (xs[j], ts[j]); returns a 4 x n batch. Points
/// are processed in fixed chunks of `chunk` columns.
JetBatch forward_batch(const NetworkParams& params, std::span<const double> xs, std::span<const double> ts,
                       PartialSet partials, std::size_t chunk = 2048);

/// Checkpoint document: {layer_sizes, flat_params, seed, epoch}.
struct Checkpoint {
  NetworkParams params;
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
/// Throws std::runtime_error on a malformed document.
Checkpoint read_checkpoint(std::istream& is);

}  // namespace timo
