#pragma once

#include <array>
#include <iosfwd>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "timo/network.hpp"
#include "timo/physics.hpp"
#include "timo/sampling.hpp"
#include "timo/training.hpp"

namespace timo {

/// Field values on an EvalGrid: entry (i, j) is the field at (ts[i], xs[j]).
struct FieldGrid {
  Eigen::MatrixXd phi;
  Eigen::MatrixXd psi;
  Eigen::MatrixXd theta;
  Eigen::MatrixXd q;

  const Eigen::MatrixXd& field(std::size_t i) const;
};

FieldGrid sample_fields(const FieldModel& model, const EvalGrid& grid);
FieldGrid sample_network(const NetworkParams& params, const EvalGrid& grid);

struct EnergySeries {
  std::vector<double> ts;
  std::vector<double> Es;
};

/// For i = 0 .. nt - 1:
///   E_i = 1/(2 nx) sum_{j=0}^{nx-1} [ rho1 |D_t phi|^2 + rho2 |D_t psi|^2 + b |D_x psi|^2
///          + k |D_x phi + psi(x_{j+1}, t_i)|^2 + rho3 theta(x_{j+1}, t_i)^2 + tau q(x_{j+1}, t_i)^2 ]
/// with D_t f = (f(x_{j+1}, t_{i+1}) - f(x_{j+1}, t_i)) / (t_{i+1} - t_i) and
/// D_x f = (f(x_{j+1}, t_i) - f(x_j, t_i)) / (x_{j+1} - x_j).
/// Throws std::invalid_argument when the field shapes do not match the grid.
EnergySeries discrete_energy(const EvalGrid& grid, const FieldGrid& fields, const PhysicalParams& p);

enum class DecayModel { Exponential, Polynomial, Logarithmic };

inline constexpr std::array<DecayModel, 3> kDecayModels = {DecayModel::Exponential, DecayModel::Polynomial,
                                                          DecayModel::Logarithmic};

std::string_view to_string(DecayModel model);

/// Least-squares line ln E = slope * X + intercept with X = t, ln t or ln ln t.
struct DecayFit {
  DecayModel model = DecayModel::Exponential;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double E_inf = 0.0;
  std::size_t used = 0;
  /// Tail points dropped because E <= 0.
  std::size_t nonpositive_dropped = 0;
};

/// Fits the points with t > t_cut, E > 0 and a defined abscissa. E_inf is the
/// mean of the last 10% of the whole series. Throws std::invalid_argument with
/// fewer than 3 usable points.
DecayFit fit_decay(const EnergySeries& series, DecayModel model, double t_cut);

struct DecayClassification {
  DecayModel best = DecayModel::Exponential;
  std::array<DecayFit, 3> fits;  // indexed like kDecayModels
};

/// Best model = highest R^2; ties go to Exponential, then Polynomial.
DecayClassification classify_decay(const EnergySeries& series, double t_cut);

/// ||pred - exact||_2 / ||exact||_2 over all entries. Throws
/// std::invalid_argument on a shape mismatch or an all-zero exact field.
double relative_error(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& exact);

struct ErrorRow {
  double t = 0.0;
  std::array<double, 4> l2{};  // phi, psi, theta, q
};

/// Per time node, the discrete 2-norm over x of pred - exact for each field.
std::vector<ErrorRow> l2_error_series(const FieldGrid& pred, const FieldGrid& exact, const EvalGrid& grid);

/// t,E
void write_energy_csv(std::ostream& os, const EnergySeries& series);
/// {"best": ..., "E_inf": ..., "t_cut": ..., "fits": {"exponential": {...}, ...}}
void write_fits_json(std::ostream& os, const DecayClassification& c, double t_cut);
/// t,l2_phi,l2_psi,l2_theta,l2_q rows, then a "relative" summary row.
void write_errors_csv(std::ostream& os, const std::vector<ErrorRow>& rows, const std::array<double, 4>& relative);

}  // namespace timo
