#include "timo/physics.hpp"

#include <cmath>
#include <stdexcept>

namespace timo {

std::string_view to_string(DampingKind kind) {
  switch (kind) {
    case DampingKind::None: return "none";
    case DampingKind::Linear: return "linear";
    case DampingKind::Quadratic: return "quadratic";
    case DampingKind::SingularExp: return "singular_exp";
  }
  return "none";
}

DampingKind parse_damping(std::string_view name) {
  if (name == "none") return DampingKind::None;
  if (name == "linear") return DampingKind::Linear;
  if (name == "quadratic") return DampingKind::Quadratic;
  if (name == "singular_exp") return DampingKind::SingularExp;
  throw std::invalid_argument("unknown damping kind '" + std::string(name) +
                              "' (expected none, linear, quadratic, singular_exp)");
}

std::string_view to_string(BoundaryKind kind) {
  return kind == BoundaryKind::MixedPaper ? "mixed_paper" : "dirichlet_all";
}

BoundaryKind parse_boundary(std::string_view name) {
  if (name == "mixed_paper") return BoundaryKind::MixedPaper;
  if (name == "dirichlet_all") return BoundaryKind::DirichletAll;
  throw std::invalid_argument("unknown boundary kind '" + std::string(name) + "' (expected mixed_paper, dirichlet_all)");
}

void PhysicalParams::validate() const {
  const std::pair<const char*, double> positive[] = {{"rho1", rho1}, {"rho2", rho2}, {"rho3", rho3},
                                                     {"b", b},       {"k", k},       {"delta", delta},
                                                     {"beta", beta}, {"tau", tau},   {"T", T}};
  for (const auto& [name, v] : positive) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("physical parameter ") + name + " must be positive and finite, got " +
                                  std::to_string(v));
    }
  }
  if (!(mu >= 0.0) || !std::isfinite(mu)) {
    throw std::invalid_argument("damping coefficient mu must be nonnegative and finite, got " + std::to_string(mu));
  }
}

double damping_value(double psi_t, DampingKind kind, double mu) {
  switch (kind) {
    case DampingKind::None: return 0.0;
    case DampingKind::Linear: return mu * psi_t;
    case DampingKind::Quadratic: return mu * psi_t * psi_t;
    case DampingKind::SingularExp: {
      if (std::abs(psi_t) < kSingularDampingCutoff) return 0.0;
      const double r = 1.0 / psi_t;
      return mu * r * std::exp(-r * r);
    }
  }
  return 0.0;
}

Residuals pde_residuals(const FieldEval& f, const PhysicalParams& p, const std::optional<SourceValues>& src) {
  const Jet2& phi = f.phi;
  const Jet2& psi = f.psi;
  const Jet2& theta = f.theta;
  const Jet2& q = f.q;
  Residuals r;
  r[0] = p.rho1 * phi.dtt - p.k * (phi.dxx + psi.dx);
  r[1] = p.rho2 * psi.dtt - p.b * psi.dxx + p.k * (phi.dx + psi.val) + p.delta * theta.dx +
         damping_value(psi.dt, p.damping, p.mu);
  r[2] = p.rho3 * theta.dt + q.dx + p.delta * psi.dxt;
  r[3] = p.tau * q.dt + p.beta * q.val + theta.dx;
  if (src) {
    for (std::size_t i = 0; i < 4; ++i) r[i] -= (*src)[i];
  }
  return r;
}

SourceValues source_terms(double x, double t) {
  const double e = 4.0 * std::exp(t);
  const double x2 = x * x;
  return {e * (-x2 + 3.0 * x + 1.0), e * (-3.0 * x2 - x + 4.0), e * (-x2 - 3.0 * x + 2.0), e * (-2.0 * x2 + 1.0)};
}

FieldEval exact_solution(double x, double t) {
  const double e = 4.0 * std::exp(t);
  Jet2 u;
  u.val = e * x * (1.0 - x);
  u.dx = e * (1.0 - 2.0 * x);
  u.dt = u.val;
  u.dxx = -2.0 * e;
  u.dtt = u.val;
  u.dxt = u.dx;
  return FieldEval{u, u, u, u};
}

InitialData InitialData::zero() {
  const Profile z{0.0, 0.0};
  return InitialData{z, z, z, z, z, z};
}

BoundaryResiduals boundary_residuals(const FieldEval& at_left, const FieldEval& at_right, const BoundarySpec& spec,
                                     [[maybe_unused]] double t) {
  auto terms = [&](const FieldEval& f, const std::array<double, 3>& g) {
    const double first = spec.kind == BoundaryKind::MixedPaper ? f.phi.dx : f.phi.val;
    return std::array<double, 3>{first - g[0], f.psi.val - g[1], f.q.val - g[2]};
  };
  return BoundaryResiduals{terms(at_left, spec.left), terms(at_right, spec.right)};
}

InitialResiduals initial_residuals(const FieldEval& f, const InitialData& data, double x) {
  InitialResiduals r;
  r.value = {f.phi.val - data.phi0(x), f.psi.val - data.psi0(x), f.theta.val - data.theta0(x), f.q.val - data.q0(x)};
  r.velocity = {f.phi.dt - data.phi1(x), f.psi.dt - data.psi1(x)};
  return r;
}

double stability_number(const PhysicalParams& p) {
  const double delta_sq = p.delta * p.delta;
  return (p.tau - p.rho1 / (p.k * p.rho3)) * (p.rho2 / p.b - p.rho1 * p.b / p.k) -
         p.tau * delta_sq * p.rho1 / (p.b * p.k * p.rho3);
}

}  // namespace timo
