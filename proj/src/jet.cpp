#include "timo/jet.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace timo {

namespace {

constexpr std::uint8_t bit(Partial p) { return static_cast<std::uint8_t>(1u << static_cast<int>(p)); }

}  // namespace

PartialSet PartialSet::from_bits(std::uint8_t bits) {
  auto has = [bits](Partial p) { return (bits & bit(p)) != 0; };
  const bool closed = has(Partial::Val) && (bits >> kNumPartials) == 0 &&
                      (!has(Partial::Dx) || has(Partial::Val)) &&
                      (!has(Partial::Dt) || has(Partial::Val)) &&
                      (!has(Partial::Dxx) || has(Partial::Dx)) &&
                      (!has(Partial::Dtt) || has(Partial::Dt)) &&
                      (!has(Partial::Dxt) || (has(Partial::Dx) && has(Partial::Dt)));
  if (!closed) {
    throw std::invalid_argument("partial set is not dependency-closed: bits=" + std::to_string(bits));
  }
  return PartialSet(bits);
}

int PartialSet::count() const { return std::popcount(bits_); }

double Jet2::operator[](Partial p) const {
  switch (p) {
    case Partial::Val: return val;
    case Partial::Dx: return dx;
    case Partial::Dt: return dt;
    case Partial::Dxx: return dxx;
    case Partial::Dtt: return dtt;
    case Partial::Dxt: return dxt;
  }
  return val;
}

double& Jet2::operator[](Partial p) {
  switch (p) {
    case Partial::Val: return val;
    case Partial::Dx: return dx;
    case Partial::Dt: return dt;
    case Partial::Dxx: return dxx;
    case Partial::Dtt: return dtt;
    case Partial::Dxt: return dxt;
  }
  return val;
}

std::pair<Jet2, Jet2> seed_inputs(double x, double t) {
  return {Jet2{x, 1.0, 0.0, 0.0, 0.0, 0.0}, Jet2{t, 0.0, 1.0, 0.0, 0.0, 0.0}};
}

Jet2 operator+(const Jet2& u, const Jet2& v) {
  return {u.val + v.val, u.dx + v.dx, u.dt + v.dt, u.dxx + v.dxx, u.dtt + v.dtt, u.dxt + v.dxt};
}

Jet2 operator-(const Jet2& u, const Jet2& v) {
  return {u.val - v.val, u.dx - v.dx, u.dt - v.dt, u.dxx - v.dxx, u.dtt - v.dtt, u.dxt - v.dxt};
}

Jet2 operator*(double c, const Jet2& u) {
  return {c * u.val, c * u.dx, c * u.dt, c * u.dxx, c * u.dtt, c * u.dxt};
}

Jet2 jet_mul(const Jet2& u, const Jet2& v) {
  Jet2 r;
  r.val = u.val * v.val;
  r.dx = u.dx * v.val + u.val * v.dx;
  r.dt = u.dt * v.val + u.val * v.dt;
  r.dxx = u.dxx * v.val + 2.0 * u.dx * v.dx + u.val * v.dxx;
  r.dtt = u.dtt * v.val + 2.0 * u.dt * v.dt + u.val * v.dtt;
  r.dxt = u.dxt * v.val + u.dx * v.dt + u.dt * v.dx + u.val * v.dxt;
  return r;
}

Jet2 jet_chain(const Jet2& u, double g0, double g1, double g2) {
  Jet2 r;
  r.val = g0;
  r.dx = g1 * u.dx;
  r.dt = g1 * u.dt;
  r.dxx = g1 * u.dxx + g2 * u.dx * u.dx;
  r.dtt = g1 * u.dtt + g2 * u.dt * u.dt;
  r.dxt = g1 * u.dxt + g2 * u.dx * u.dt;
  return r;
}

Jet2 jet_tanh(const Jet2& u) {
  const double y = std::tanh(u.val);
  const double s = 1.0 - y * y;
  return jet_chain(u, y, s, -2.0 * y * s);
}

Jet2 jet_exp(const Jet2& u) {
  const double e = std::exp(u.val);
  return jet_chain(u, e, e, e);
}

Jet2 jet_reciprocal(const Jet2& u) {
  const double r = 1.0 / u.val;
  return jet_chain(u, r, -r * r, 2.0 * r * r * r);
}

std::vector<Jet2> jet_affine(const Eigen::Ref<const RowMatrix>& W,
                             const Eigen::Ref<const Eigen::VectorXd>& b,
                             std::span<const Jet2> u) {
  if (W.cols() != static_cast<Eigen::Index>(u.size()) || W.rows() != b.size()) {
    throw std::invalid_argument("jet_affine: W is " + std::to_string(W.rows()) + "x" +
                                std::to_string(W.cols()) + ", b has " + std::to_string(b.size()) +
                                " entries, input has " + std::to_string(u.size()));
  }
  std::vector<Jet2> out(static_cast<std::size_t>(W.rows()));
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    Jet2 acc = Jet2::constant(b(i));
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      const double w = W(i, j);
      const Jet2& in = u[static_cast<std::size_t>(j)];
      acc.val += w * in.val;
      acc.dx += w * in.dx;
      acc.dt += w * in.dt;
      acc.dxx += w * in.dxx;
      acc.dtt += w * in.dtt;
      acc.dxt += w * in.dxt;
    }
    out[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

}  // namespace timo
