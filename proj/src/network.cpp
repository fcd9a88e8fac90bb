#include "timo/network.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace timo {

void LayerSpec::validate() const {
  if (sizes.size() < 2) throw std::invalid_argument("layer spec needs at least an input and an output layer");
  if (sizes.front() != 2) throw std::invalid_argument("layer spec must start with 2 inputs (x, t)");
  if (sizes.back() != 4) throw std::invalid_argument("layer spec must end with 4 outputs (phi, psi, theta, q)");
  for (int s : sizes) {
    if (s <= 0) throw std::invalid_argument("layer widths must be positive");
  }
}

std::size_t LayerSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto in = static_cast<std::size_t>(sizes[l]);
    const auto out = static_cast<std::size_t>(sizes[l + 1]);
    n += in * out + out;
  }
  return n;
}

NetworkParams::NetworkParams(LayerSpec spec, std::vector<double> flat) : spec_(std::move(spec)), flat_(std::move(flat)) {
  spec_.validate();
  if (flat_.size() != spec_.param_count()) {
    throw std::invalid_argument("parameter array has " + std::to_string(flat_.size()) + " entries, layer spec needs " +
                                std::to_string(spec_.param_count()));
  }
}

ParamBlock NetworkParams::block(std::size_t layer) const {
  if (layer >= spec_.layer_count()) throw std::out_of_range("layer index out of range");
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer; ++l) {
    offset += static_cast<std::size_t>(spec_.sizes[l]) * static_cast<std::size_t>(spec_.sizes[l + 1]) +
              static_cast<std::size_t>(spec_.sizes[l + 1]);
  }
  return ParamBlock{offset, spec_.sizes[layer + 1], spec_.sizes[layer]};
}

Eigen::Map<const RowMatrix> NetworkParams::weights(std::size_t layer) const {
  const ParamBlock b = block(layer);
  return Eigen::Map<const RowMatrix>(flat_.data() + b.offset, b.rows, b.cols);
}

Eigen::Map<const Eigen::VectorXd> NetworkParams::bias(std::size_t layer) const {
  const ParamBlock b = block(layer);
  return Eigen::Map<const Eigen::VectorXd>(flat_.data() + b.offset + b.weight_count(), b.rows);
}

NetworkParams init_params(const LayerSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 gen(seed);
  std::vector<double> flat;
  flat.reserve(spec.param_count());
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const int fan_in = spec.sizes[l];
    const int fan_out = spec.sizes[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (int i = 0; i < fan_in * fan_out; ++i) {
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      flat.push_back((2.0 * u - 1.0) * bound);
    }
    flat.insert(flat.end(), static_cast<std::size_t>(fan_out), 0.0);
  }
  return NetworkParams(spec, std::move(flat));
}

FieldEval forward(const NetworkParams& params, double x, double t) {
  const auto [xj, tj] = seed_inputs(x, t);
  std::vector<Jet2> h = {xj, tj};
  const std::size_t layers = params.spec().layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    h = jet_affine(params.weights(l), params.bias(l), h);
    if (l + 1 < layers) {
      for (Jet2& v : h) v = jet_tanh(v);
    }
  }
  return FieldEval{h[0], h[1], h[2], h[3]};
}

NodeId forward_on_tape(Tape& tape, const NetworkParams& params, NodeId input) {
  if (tape.params().data() != params.flat().data()) {
    throw std::invalid_argument("forward_on_tape: tape was not built over these parameters");
  }
  NodeId h = input;
  const std::size_t layers = params.spec().layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    h = tape.affine(h, params.block(l));
    if (l + 1 < layers) h = tape.tanh(h);
  }
  return h;
}

JetBatch forward_batch(const NetworkParams& params, std::span<const double> xs, std::span<const double> ts,
                       PartialSet partials, std::size_t chunk) {
  if (xs.size() != ts.size()) throw std::invalid_argument("forward_batch: xs and ts differ in length");
  if (chunk == 0) throw std::invalid_argument("forward_batch: chunk must be positive");
  const auto n = static_cast<Eigen::Index>(xs.size());
  JetBatch out(4, n, partials);
  for (std::size_t begin = 0; begin < xs.size(); begin += chunk) {
    const std::size_t len = std::min(chunk, xs.size() - begin);
    Tape tape(params.flat());
    const NodeId in = tape.seed(xs.subspan(begin, len), ts.subspan(begin, len), partials);
    const JetBatch& part = tape.value(forward_on_tape(tape, params, in));
    for (Partial p : kAllPartials) {
      if (partials.has(p)) {
        out.slab(p).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(len)) = part.slab(p);
      }
    }
  }
  return out;
}

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  // Written by hand so every parameter carries exactly 17 significant digits.
  const auto precision = os.precision(17);
  os << "{\"layer_sizes\":" << nlohmann::json(ckpt.params.spec().sizes).dump() << ",\"flat_params\":[";
  const auto flat = ckpt.params.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (i > 0) os << ',';
    os << flat[i];
  }
  os << "],\"seed\":" << ckpt.seed << ",\"epoch\":" << ckpt.epoch << "}\n";
  os.precision(precision);
}

Checkpoint read_checkpoint(std::istream& is) {
  try {
    const nlohmann::json j = nlohmann::json::parse(is);
    LayerSpec spec{j.at("layer_sizes").get<std::vector<int>>()};
    Checkpoint ckpt;
    ckpt.params = NetworkParams(std::move(spec), j.at("flat_params").get<std::vector<double>>());
    ckpt.seed = j.at("seed").get<std::uint64_t>();
    ckpt.epoch = j.at("epoch").get<std::int64_t>();
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace timo
