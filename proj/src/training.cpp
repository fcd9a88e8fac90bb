#include "timo/training.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <utility>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace timo {

AdamState::AdamState(std::size_t n, AdamConfig cfg) : m(n, 0.0), v(n, 0.0), config(cfg) {}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment sizes differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw std::domain_error("adam_step: non-finite gradient entry at index " + std::to_string(i));
    }
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grads[i];
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (log_every < 1) throw std::invalid_argument("log_every must be at least 1");
  if (chunk_size == 0) throw std::invalid_argument("chunk_size must be positive");
  if (collocation.interior == 0 || collocation.boundary == 0 || collocation.initial == 0) {
    throw std::invalid_argument("collocation sizes must be at least 1");
  }
  if (!(adam.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  layers.validate();
  physics.validate();
}

namespace {

// Keep tape-sized blocks on the heap between chunks.
void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)done;
#endif
}

using P = Partial;

struct Term {
  NodeId node;
  double coeff;
};

NodeId combine(Tape& tape, std::initializer_list<Term> terms) {
  std::optional<NodeId> acc;
  for (const Term& t : terms) {
    const NodeId scaled = t.coeff == 1.0 ? t.node : tape.scale(t.node, t.coeff);
    acc = acc ? tape.add(*acc, scaled) : scaled;
  }
  return *acc;
}

// damping(psi_t) on the tape, mirroring damping_value.
std::optional<NodeId> damping_on_tape(Tape& tape, NodeId psi_t, const PhysicalParams& p) {
  switch (p.damping) {
    case DampingKind::None:
      return std::nullopt;
    case DampingKind::Linear:
      return tape.scale(psi_t, p.mu);
    case DampingKind::Quadratic:
      return tape.scale(tape.mul(psi_t, psi_t), p.mu);
    case DampingKind::SingularExp: {
      const auto s = tape.value(psi_t).slab(P::Val);
      std::vector<double> keep(static_cast<std::size_t>(s.cols()));
      std::vector<double> fill(keep.size());
      for (std::size_t j = 0; j < keep.size(); ++j) {
        const bool active = std::abs(s(0, static_cast<Eigen::Index>(j))) >= kSingularDampingCutoff;
        keep[j] = active ? 1.0 : 0.0;
        fill[j] = active ? 0.0 : 1.0;
      }
      // Masked entries are evaluated at 1 and zeroed afterwards.
      const NodeId safe = tape.offset_columns(tape.scale_columns(psi_t, keep), std::move(fill));
      const NodeId r = tape.reciprocal(safe);
      const NodeId e = tape.exp(tape.scale(tape.mul(r, r), -1.0));
      return tape.scale_columns(tape.scale(tape.mul(r, e), p.mu), std::move(keep));
    }
  }
  return std::nullopt;
}

// Squared deviations summed per term, or the summed deviation squared.
NodeId condition_mse(Tape& tape, const std::vector<NodeId>& deviations, double normalizer, bool literal) {
  if (literal) {
    NodeId sum = deviations.front();
    for (std::size_t i = 1; i < deviations.size(); ++i) sum = tape.add(sum, deviations[i]);
    return tape.mean_square(sum, normalizer);
  }
  NodeId acc = tape.mean_square(deviations.front(), normalizer);
  for (std::size_t i = 1; i < deviations.size(); ++i) acc = tape.add(acc, tape.mean_square(deviations[i], normalizer));
  return acc;
}

double condition_square(std::span<const double> deviations, bool literal) {
  if (literal) {
    double s = 0.0;
    for (double d : deviations) s += d;
    return s * s;
  }
  double s = 0.0;
  for (double d : deviations) s += d * d;
  return s;
}

struct ChunkLoss {
  std::vector<std::pair<std::size_t, NodeId>> parts;  // (mse index, node)
};

void accumulate_chunk(Tape& tape, const ChunkLoss& chunk, LossBreakdown& loss, std::vector<double>& grad) {
  NodeId total = chunk.parts.front().second;
  for (std::size_t i = 0; i < chunk.parts.size(); ++i) {
    loss.mse[chunk.parts[i].first] += tape.scalar(chunk.parts[i].second);
    if (i > 0) total = tape.add(total, chunk.parts[i].second);
  }
  tape.accumulate_gradient(total, grad);
}

template <class Fn>
void for_each_chunk(std::size_t n, std::size_t chunk, Fn&& fn) {
  for (std::size_t begin = 0; begin < n; begin += chunk) fn(begin, std::min(chunk, n - begin));
}

}  // namespace

LossGradient compute_loss(const NetworkParams& params, const CollocationSet& batch, const TrainConfig& cfg) {
  keep_large_blocks_on_heap();
  const PhysicalParams& p = cfg.physics;
  const bool literal = cfg.paper_literal_aggregation;
  LossGradient out;
  out.grad.assign(params.flat().size(), 0.0);

  const double n_int = static_cast<double>(batch.interior.size());
  for_each_chunk(batch.interior.size(), cfg.chunk_size, [&](std::size_t begin, std::size_t len) {
    std::vector<double> xs(len), ts(len);
    for (std::size_t j = 0; j < len; ++j) {
      xs[j] = batch.interior[begin + j].x;
      ts[j] = batch.interior[begin + j].t;
    }
    Tape tape(params.flat());
    const NodeId net = forward_on_tape(tape, params, tape.seed(xs, ts, PartialSet::full()));
    auto d = [&](int row, P partial) { return tape.extract(net, row, partial); };
    constexpr int phi = 0, psi = 1, theta = 2, q = 3;

    NodeId r1 = combine(tape, {{d(phi, P::Dtt), p.rho1}, {d(phi, P::Dxx), -p.k}, {d(psi, P::Dx), -p.k}});
    NodeId r2 = combine(tape, {{d(psi, P::Dtt), p.rho2},
                               {d(psi, P::Dxx), -p.b},
                               {d(phi, P::Dx), p.k},
                               {d(psi, P::Val), p.k},
                               {d(theta, P::Dx), p.delta}});
    if (auto damp = damping_on_tape(tape, d(psi, P::Dt), p)) r2 = tape.add(r2, *damp);
    NodeId r3 = combine(tape, {{d(theta, P::Dt), p.rho3}, {d(q, P::Dx), 1.0}, {d(psi, P::Dxt), p.delta}});
    NodeId r4 = combine(tape, {{d(q, P::Dt), p.tau}, {d(q, P::Val), p.beta}, {d(theta, P::Dx), 1.0}});
    std::array<NodeId, 4> r = {r1, r2, r3, r4};

    if (cfg.use_sources) {
      std::array<std::vector<double>, 4> shift;
      for (auto& s : shift) s.resize(len);
      for (std::size_t j = 0; j < len; ++j) {
        const SourceValues f = source_terms(xs[j], ts[j]);
        for (std::size_t i = 0; i < 4; ++i) shift[i][j] = -f[i];
      }
      for (std::size_t i = 0; i < 4; ++i) r[i] = tape.offset_columns(r[i], std::move(shift[i]));
    }

    ChunkLoss chunk;
    for (std::size_t i = 0; i < 4; ++i) chunk.parts.emplace_back(i, tape.mean_square(r[i], n_int));
    accumulate_chunk(tape, chunk, out.loss, out.grad);
  });

  const double n_bc = static_cast<double>(batch.boundary_times.size());
  const PartialSet bc_partials =
      cfg.boundary.kind == BoundaryKind::MixedPaper ? PartialSet::first_x() : PartialSet::value_only();
  for_each_chunk(batch.boundary_times.size(), cfg.chunk_size, [&](std::size_t begin, std::size_t len) {
    const std::span<const double> ts(batch.boundary_times.data() + begin, len);
    Tape tape(params.flat());
    ChunkLoss chunk;
    for (std::size_t side = 0; side < 2; ++side) {
      const std::vector<double> xs(len, side == 0 ? 0.0 : 1.0);
      const auto& g = side == 0 ? cfg.boundary.left : cfg.boundary.right;
      const NodeId net = forward_on_tape(tape, params, tape.seed(xs, ts, bc_partials));
      const NodeId first = tape.extract(net, 0, cfg.boundary.kind == BoundaryKind::MixedPaper ? P::Dx : P::Val);
      const std::vector<NodeId> dev = {tape.offset(first, -g[0]), tape.offset(tape.extract(net, 1, P::Val), -g[1]),
                                       tape.offset(tape.extract(net, 3, P::Val), -g[2])};
      chunk.parts.emplace_back(4 + side, condition_mse(tape, dev, n_bc, literal));
    }
    accumulate_chunk(tape, chunk, out.loss, out.grad);
  });

  const double n_ic = static_cast<double>(batch.initial_xs.size());
  for_each_chunk(batch.initial_xs.size(), cfg.chunk_size, [&](std::size_t begin, std::size_t len) {
    const std::span<const double> xs(batch.initial_xs.data() + begin, len);
    const std::vector<double> ts(len, 0.0);
    Tape tape(params.flat());
    const NodeId net = forward_on_tape(tape, params, tape.seed(xs, ts, PartialSet::first_t()));
    auto deviation = [&](int row, P partial, const Profile& data) {
      std::vector<double> shift(len);
      for (std::size_t j = 0; j < len; ++j) shift[j] = -data(xs[j]);
      return tape.offset_columns(tape.extract(net, row, partial), std::move(shift));
    };
    const InitialData& ic = cfg.initial;
    const std::vector<NodeId> values = {deviation(0, P::Val, ic.phi0), deviation(1, P::Val, ic.psi0),
                                        deviation(2, P::Val, ic.theta0), deviation(3, P::Val, ic.q0)};
    const std::vector<NodeId> velocities = {deviation(0, P::Dt, ic.phi1), deviation(1, P::Dt, ic.psi1)};
    ChunkLoss chunk;
    chunk.parts.emplace_back(6, condition_mse(tape, values, n_ic, literal));
    chunk.parts.emplace_back(7, condition_mse(tape, velocities, n_ic, literal));
    accumulate_chunk(tape, chunk, out.loss, out.grad);
  });

  out.loss.total = 0.0;
  for (double m : out.loss.mse) out.loss.total += m;
  return out;
}

LossBreakdown evaluate_loss(const FieldModel& model, const CollocationSet& batch, const TrainConfig& cfg) {
  const bool literal = cfg.paper_literal_aggregation;
  LossBreakdown loss;

  const double n_int = static_cast<double>(batch.interior.size());
  for (const SpaceTimePoint& pt : batch.interior) {
    std::optional<SourceValues> src;
    if (cfg.use_sources) src = source_terms(pt.x, pt.t);
    const Residuals r = pde_residuals(model(pt.x, pt.t), cfg.physics, src);
    for (std::size_t i = 0; i < 4; ++i) loss.mse[i] += r[i] * r[i] / n_int;
  }

  const double n_bc = static_cast<double>(batch.boundary_times.size());
  for (double t : batch.boundary_times) {
    const BoundaryResiduals r = boundary_residuals(model(0.0, t), model(1.0, t), cfg.boundary, t);
    loss.mse[4] += condition_square(r.left, literal) / n_bc;
    loss.mse[5] += condition_square(r.right, literal) / n_bc;
  }

  const double n_ic = static_cast<double>(batch.initial_xs.size());
  for (double x : batch.initial_xs) {
    const InitialResiduals r = initial_residuals(model(x, 0.0), cfg.initial, x);
    loss.mse[6] += condition_square(r.value, literal) / n_ic;
    loss.mse[7] += condition_square(r.velocity, literal) / n_ic;
  }

  for (double m : loss.mse) loss.total += m;
  return loss;
}

TrainingAborted::TrainingAborted(const std::string& what, NetworkParams last_good, std::int64_t epoch,
                                 std::vector<HistoryRow> history)
    : std::runtime_error(what), last_good_(std::move(last_good)), epoch_(epoch), history_(std::move(history)) {}

TrainResult train(const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  TrainResult result;
  result.params = init_params(cfg.layers, cfg.init_seed());
  result.batch = sample_collocation(cfg.collocation, cfg.physics.T, cfg.sampling_seed());
  AdamState adam(result.params.flat().size(), cfg.adam);
  NetworkParams last_good = result.params;

  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    LossGradient lg = compute_loss(result.params, result.batch, cfg);
    if (!std::isfinite(lg.loss.total)) {
      throw TrainingAborted("non-finite loss at epoch " + std::to_string(epoch), std::move(last_good), epoch,
                            std::move(result.history));
    }
    last_good = result.params;
    if (epoch % cfg.log_every == 0) result.history.push_back({epoch, lg.loss});
    try {
      adam_step(adam, result.params.mutable_flat(), lg.grad);
    } catch (const std::domain_error& e) {
      throw TrainingAborted(std::string(e.what()) + " at epoch " + std::to_string(epoch), std::move(last_good),
                            epoch, std::move(result.history));
    }
    if (progress) progress(epoch, lg.loss);
  }
  return result;
}

void write_loss_history_csv(std::ostream& os, std::span<const HistoryRow> history) {
  const auto precision = os.precision(17);
  os << "epoch,total";
  for (std::string_view name : kLossColumnNames) os << ',' << name;
  os << '\n';
  for (const HistoryRow& row : history) {
    os << row.epoch << ',' << row.loss.total;
    for (double m : row.loss.mse) os << ',' << m;
    os << '\n';
  }
  os.precision(precision);
}

}  // namespace timo
