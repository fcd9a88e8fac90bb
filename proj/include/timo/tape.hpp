#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "timo/jet.hpp"

namespace timo {

using Slab = Eigen::Block<Eigen::MatrixXd, Eigen::Dynamic, Eigen::Dynamic, true>;
using ConstSlab = Eigen::Block<const Eigen::MatrixXd, Eigen::Dynamic, Eigen::Dynamic, true>;

/// A block of jets: `rows` features by `cols` points, one dense rows x cols
/// slab per tracked partial. Slabs are stored side by side in one matrix so a
/// linear layer acts on every partial with a single product.
class JetBatch {
 public:
  JetBatch() = default;
  JetBatch(Eigen::Index rows, Eigen::Index cols, PartialSet partials);

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  PartialSet partials() const { return partials_; }
  bool has(Partial p) const { return partials_.has(p); }

  /// The rows x cols slab of partial `p`. `p` must be tracked.
  Slab slab(Partial p);
  ConstSlab slab(Partial p) const;

  /// First column of partial `p`'s slab inside data().
  Eigen::Index offset_of(Partial p) const;

  Eigen::MatrixXd& data() { return data_; }
  const Eigen::MatrixXd& data() const { return data_; }

  /// Jet at (row, col); untracked partials read as zero.
  Jet2 jet(Eigen::Index row, Eigen::Index col) const;

 private:
  Eigen::MatrixXd data_;
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  PartialSet partials_;
  std::array<int, kNumPartials> slot_{-1, -1, -1, -1, -1, -1};
};

struct NodeId {
  std::uint32_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

/// Location of one linear layer inside a flat parameter array: a row-major
/// rows x cols weight matrix at `offset`, followed by `rows` biases.
struct ParamBlock {
  std::size_t offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  std::size_t weight_count() const { return static_cast<std::size_t>(rows * cols); }
  std::size_t size() const { return weight_count() + static_cast<std::size_t>(rows); }
};

/// Records batched jet operations and runs the reverse sweep over them to get
/// gradients of a scalar node with respect to the flat parameter array.
///
/// The parameter span is borrowed: it must outlive the tape and stay unchanged
/// while the tape is in use.
class Tape {
 public:
  explicit Tape(std::span<const double> params);

  /// Input jets for points (xs[j], ts[j]): row 0 is x, row 1 is t.
  NodeId seed(std::span<const double> xs, std::span<const double> ts, PartialSet partials);
  NodeId affine(NodeId in, const ParamBlock& block);
  NodeId tanh(NodeId u);
  NodeId exp(NodeId u);
  NodeId reciprocal(NodeId u);
  NodeId add(NodeId u, NodeId v);
  NodeId mul(NodeId u, NodeId v);
  NodeId scale(NodeId u, double c);
  /// Multiplies every partial in column j by weights[j].
  NodeId scale_columns(NodeId u, std::vector<double> weights);
  /// Adds c to the value of every entry.
  NodeId offset(NodeId u, double c);
  /// Adds shifts[j] to the value of every entry in column j.
  NodeId offset_columns(NodeId u, std::vector<double> shifts);
  /// One partial of one row, as a value-only 1 x cols batch.
  NodeId extract(NodeId u, Eigen::Index row, Partial p);
  /// Scalar node: sum of squared values over the whole batch, divided by normalizer.
  NodeId mean_square(NodeId u, double normalizer);

  std::size_t size() const { return nodes_.size(); }
  std::span<const double> params() const { return params_; }
  const JetBatch& value(NodeId id) const;
  /// Value of a 1 x 1 node.
  double scalar(NodeId id) const;

  /// d(loss)/d(params) in parameter storage order.
  std::vector<double> param_gradient(NodeId loss) const;

  /// Adds weight * d(loss)/d(params) into grad. `visit`, when set, is called
  /// with each node as the reverse sweep reaches it.
  void accumulate_gradient(NodeId loss, std::span<double> grad, double weight = 1.0,
                           const std::function<void(NodeId)>& visit = {}) const;

  /// Recomputes every node from the recorded operations.
  std::vector<JetBatch> replay() const;

 private:
  enum class Op : std::uint8_t {
    Seed,
    Affine,
    Tanh,
    Exp,
    Reciprocal,
    Add,
    Mul,
    Scale,
    ScaleColumns,
    Offset,
    OffsetColumns,
    Extract,
    MeanSquare,
  };

  struct Node {
    Op op = Op::Seed;
    NodeId a{};
    NodeId b{};
    double coeff = 0.0;
    std::vector<double> columns;
    ParamBlock block{};
    Eigen::Index row = 0;
    Partial partial = Partial::Val;
    PartialSet partials;
    bool needs_grad = false;
  };

  NodeId record(Node node);
  const Node& node(NodeId id) const;
  JetBatch evaluate(const Node& n, std::span<const JetBatch> values) const;
  void backprop_unary(const Node& n, const JetBatch& out, const Eigen::MatrixXd& out_bar,
                      const JetBatch& in, Eigen::MatrixXd& in_bar) const;
  void backprop_mul(const Eigen::MatrixXd& out_bar, const JetBatch& other, Eigen::MatrixXd& in_bar) const;

  std::span<const double> params_;
  std::vector<Node> nodes_;
  std::vector<JetBatch> values_;
};

}  // namespace timo
