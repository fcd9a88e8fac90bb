#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "timo/network.hpp"

namespace timo {

enum class DampingKind { None, Linear, Quadratic, SingularExp };

std::string_view to_string(DampingKind kind);
/// Accepts "none", "linear", "quadratic", "singular_exp".
DampingKind parse_damping(std::string_view name);

/// Coefficients of the thermoelastic Timoshenko system on (0, 1) x (0, T):
///
///   rho1 phi_tt - k (phi_x + psi)_x                          = 0
///   rho2 psi_tt - b psi_xx + k (phi_x + psi) + delta theta_x
///        + damping(psi_t)                                    = 0
///   rho3 theta_t + q_x + delta psi_xt                        = 0
///   tau q_t + beta q + theta_x                               = 0
struct PhysicalParams {
  double rho1 = 1.0;
  double rho2 = 1.0;
  double rho3 = 1.0;
  double b = 1.0;
  double k = 1.0;
  double delta = 1.0;
  double beta = 1.0;
  double tau = 1.0;
  double mu = 0.0;
  DampingKind damping = DampingKind::None;
  double T = 1.0;

  /// Throws std::invalid_argument for nonpositive constants, negative mu or a
  /// non-finite horizon.
  void validate() const;
};

/// Below this |psi_t| the singular damping returns its limit 0.
inline constexpr double kSingularDampingCutoff = 1e-6;

double damping_value(double psi_t, DampingKind kind, double mu);

using Residuals = std::array<double, 4>;
using SourceValues = std::array<double, 4>;

/// Residuals r1..r4 of the four equations; when `src` is given, src[i] is
/// subtracted from r_i.
Residuals pde_residuals(const FieldEval& f, const PhysicalParams& p, const std::optional<SourceValues>& src = {});

/// Forcing for the manufactured problem (all coefficients 1, linear damping mu = 1).
SourceValues source_terms(double x, double t);

/// phi = psi = theta = q = 4 e^t x (1 - x), with analytic partials.
FieldEval exact_solution(double x, double t);

/// a * 4x(1 - x) + c. The default is the bump 4x(1 - x).
struct Profile {
  double amplitude = 1.0;
  double offset = 0.0;

  double operator()(double x) const { return amplitude * 4.0 * x * (1.0 - x) + offset; }
  friend bool operator==(const Profile&, const Profile&) = default;
};

struct InitialData {
  Profile phi0;
  Profile phi1;
  Profile psi0;
  Profile psi1;
  Profile theta0;
  Profile q0;

  static InitialData zero();
  friend bool operator==(const InitialData&, const InitialData&) = default;
};

enum class BoundaryKind {
  /// phi_x, psi and q prescribed at both ends.
  MixedPaper,
  /// phi, psi and q prescribed at both ends.
  DirichletAll,
};

std::string_view to_string(BoundaryKind kind);
/// Accepts "mixed_paper", "dirichlet_all".
BoundaryKind parse_boundary(std::string_view name);

/// Boundary data are constant in time. theta never gets a boundary condition.
struct BoundarySpec {
  BoundaryKind kind = BoundaryKind::DirichletAll;
  std::array<double, 3> left{};   // g1, g2, g3 at x = 0
  std::array<double, 3> right{};  // the hatted data at x = 1

  friend bool operator==(const BoundarySpec&, const BoundarySpec&) = default;
};

struct BoundaryResiduals {
  std::array<double, 3> left{};
  std::array<double, 3> right{};
};

BoundaryResiduals boundary_residuals(const FieldEval& at_left, const FieldEval& at_right, const BoundarySpec& spec,
                                     double t);

struct InitialResiduals {
  std::array<double, 4> value{};     // phi, psi, theta, q minus their data
  std::array<double, 2> velocity{};  // phi_t, psi_t minus their data
};

InitialResiduals initial_residuals(const FieldEval& f, const InitialData& data, double x);

/// chi = (tau - rho1/(k rho3)) (rho2/b - rho1 b/k) - tau delta^2 rho1 / (b k rho3).
double stability_number(const PhysicalParams& p);

}  // namespace timo
