#include "timo/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace timo {

const Eigen::MatrixXd& FieldGrid::field(std::size_t i) const {
  switch (i) {
    case 0: return phi;
    case 1: return psi;
    case 2: return theta;
    case 3: return q;
  }
  throw std::out_of_range("field index must be 0..3");
}

FieldGrid sample_fields(const FieldModel& model, const EvalGrid& grid) {
  const auto nt = static_cast<Eigen::Index>(grid.ts.size());
  const auto nx = static_cast<Eigen::Index>(grid.xs.size());
  FieldGrid g{Eigen::MatrixXd(nt, nx), Eigen::MatrixXd(nt, nx), Eigen::MatrixXd(nt, nx), Eigen::MatrixXd(nt, nx)};
  for (Eigen::Index i = 0; i < nt; ++i) {
    for (Eigen::Index j = 0; j < nx; ++j) {
      const FieldEval f = model(grid.xs[static_cast<std::size_t>(j)], grid.ts[static_cast<std::size_t>(i)]);
      g.phi(i, j) = f.phi.val;
      g.psi(i, j) = f.psi.val;
      g.theta(i, j) = f.theta.val;
      g.q(i, j) = f.q.val;
    }
  }
  return g;
}

FieldGrid sample_network(const NetworkParams& params, const EvalGrid& grid) {
  const auto nt = static_cast<Eigen::Index>(grid.ts.size());
  const auto nx = static_cast<Eigen::Index>(grid.xs.size());
  std::vector<double> xs, ts;
  xs.reserve(static_cast<std::size_t>(nt * nx));
  ts.reserve(xs.capacity());
  for (double t : grid.ts) {
    for (double x : grid.xs) {
      xs.push_back(x);
      ts.push_back(t);
    }
  }
  const JetBatch out = forward_batch(params, xs, ts, PartialSet::value_only());
  const auto val = out.slab(Partial::Val);
  FieldGrid g;
  // Column c of the batch is node (c / nx, c % nx); a row-major view gives the grid.
  auto reshape = [&](Eigen::Index row) {
    const Eigen::RowVectorXd r = val.row(row);
    return Eigen::MatrixXd(Eigen::Map<const RowMatrix>(r.data(), nt, nx));
  };
  g.phi = reshape(0);
  g.psi = reshape(1);
  g.theta = reshape(2);
  g.q = reshape(3);
  return g;
}

EnergySeries discrete_energy(const EvalGrid& grid, const FieldGrid& f, const PhysicalParams& p) {
  const auto nt1 = static_cast<Eigen::Index>(grid.ts.size());
  const auto nx1 = static_cast<Eigen::Index>(grid.xs.size());
  if (nt1 < 2 || nx1 < 2) throw std::invalid_argument("discrete_energy: grid needs at least 2 nodes per axis");
  for (std::size_t k = 0; k < 4; ++k) {
    if (f.field(k).rows() != nt1 || f.field(k).cols() != nx1) {
      throw std::invalid_argument("discrete_energy: field grid shape does not match the evaluation grid");
    }
  }
  const Eigen::Index nx = nx1 - 1;
  EnergySeries s;
  s.ts.assign(grid.ts.begin(), grid.ts.end() - 1);
  s.Es.resize(static_cast<std::size_t>(nt1 - 1));
  for (Eigen::Index i = 0; i + 1 < nt1; ++i) {
    const double ht = grid.ts[static_cast<std::size_t>(i + 1)] - grid.ts[static_cast<std::size_t>(i)];
    double sum = 0.0;
    for (Eigen::Index j = 0; j < nx; ++j) {
      const Eigen::Index jr = j + 1;
      const double hx = grid.xs[static_cast<std::size_t>(jr)] - grid.xs[static_cast<std::size_t>(j)];
      const double phi_t = (f.phi(i + 1, jr) - f.phi(i, jr)) / ht;
      const double psi_t = (f.psi(i + 1, jr) - f.psi(i, jr)) / ht;
      const double psi_x = (f.psi(i, jr) - f.psi(i, j)) / hx;
      const double shear = (f.phi(i, jr) - f.phi(i, j)) / hx + f.psi(i, jr);
      const double th = f.theta(i, jr);
      const double qq = f.q(i, jr);
      sum += p.rho1 * phi_t * phi_t + p.rho2 * psi_t * psi_t + p.b * psi_x * psi_x + p.k * shear * shear +
             p.rho3 * th * th + p.tau * qq * qq;
    }
    s.Es[static_cast<std::size_t>(i)] = sum / (2.0 * static_cast<double>(nx));
  }
  return s;
}

std::string_view to_string(DecayModel model) {
  switch (model) {
    case DecayModel::Exponential: return "exponential";
    case DecayModel::Polynomial: return "polynomial";
    case DecayModel::Logarithmic: return "logarithmic";
  }
  return "exponential";
}

namespace {

double tail_mean(const std::vector<double>& Es) {
  if (Es.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = std::max<std::size_t>(1, (Es.size() + 9) / 10);
  double sum = 0.0;
  for (std::size_t i = Es.size() - n; i < Es.size(); ++i) sum += Es[i];
  return sum / static_cast<double>(n);
}

bool abscissa(DecayModel model, double t, double& X) {
  switch (model) {
    case DecayModel::Exponential:
      X = t;
      return true;
    case DecayModel::Polynomial:
      if (!(t > 0.0)) return false;
      X = std::log(t);
      return true;
    case DecayModel::Logarithmic:
      if (!(t > 1.0)) return false;
      X = std::log(std::log(t));
      return true;
  }
  return false;
}

}  // namespace

DecayFit fit_decay(const EnergySeries& series, DecayModel model, double t_cut) {
  if (series.ts.size() != series.Es.size()) throw std::invalid_argument("fit_decay: ts and Es differ in length");
  DecayFit fit;
  fit.model = model;
  std::vector<double> X, Y;
  for (std::size_t i = 0; i < series.ts.size(); ++i) {
    const double t = series.ts[i];
    if (!(t > t_cut)) continue;
    if (!(series.Es[i] > 0.0)) {
      ++fit.nonpositive_dropped;
      continue;
    }
    double x = 0.0;
    if (!abscissa(model, t, x)) continue;
    X.push_back(x);
    Y.push_back(std::log(series.Es[i]));
  }
  if (X.size() < 3) {
    throw std::invalid_argument("fit_decay: " + std::string(to_string(model)) + " fit has " +
                                std::to_string(X.size()) + " usable points, needs at least 3");
  }
  const double n = static_cast<double>(X.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    mx += X[i];
    my += Y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double dx = X[i] - mx;
    const double dy = Y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_decay: abscissae are all equal");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double r = Y[i] - (fit.intercept + fit.slope * X[i]);
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  fit.used = X.size();
  fit.E_inf = tail_mean(series.Es);
  return fit;
}

DecayClassification classify_decay(const EnergySeries& series, double t_cut) {
  DecayClassification c;
  bool any = false;
  std::string reasons;
  double best_r2 = -1.0;
  for (std::size_t m = 0; m < kDecayModels.size(); ++m) {
    try {
      c.fits[m] = fit_decay(series, kDecayModels[m], t_cut);
    } catch (const std::invalid_argument& e) {
      // A model whose abscissa is undefined on the tail (ln ln t needs t > 1)
      // is left out of the comparison.
      c.fits[m] = DecayFit{};
      c.fits[m].model = kDecayModels[m];
      c.fits[m].r_squared = std::numeric_limits<double>::quiet_NaN();
      c.fits[m].E_inf = tail_mean(series.Es);
      reasons += std::string(e.what()) + "; ";
      continue;
    }
    if (c.fits[m].r_squared > best_r2) {
      best_r2 = c.fits[m].r_squared;
      c.best = kDecayModels[m];
    }
    any = true;
  }
  if (!any) throw std::invalid_argument("classify_decay: no model could be fitted: " + reasons);
  return c;
}

double relative_error(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& exact) {
  if (pred.rows() != exact.rows() || pred.cols() != exact.cols()) {
    throw std::invalid_argument("relative_error: shapes differ");
  }
  const double denom = exact.norm();
  if (!(denom > 0.0)) throw std::invalid_argument("relative_error: exact field has zero norm");
  return (pred - exact).norm() / denom;
}

std::vector<ErrorRow> l2_error_series(const FieldGrid& pred, const FieldGrid& exact, const EvalGrid& grid) {
  const auto nt = static_cast<Eigen::Index>(grid.ts.size());
  const auto nx = static_cast<Eigen::Index>(grid.xs.size());
  for (std::size_t k = 0; k < 4; ++k) {
    if (pred.field(k).rows() != nt || pred.field(k).cols() != nx || exact.field(k).rows() != nt ||
        exact.field(k).cols() != nx) {
      throw std::invalid_argument("l2_error_series: field grid shape does not match the evaluation grid");
    }
  }
  std::vector<ErrorRow> rows(static_cast<std::size_t>(nt));
  for (Eigen::Index i = 0; i < nt; ++i) {
    ErrorRow& r = rows[static_cast<std::size_t>(i)];
    r.t = grid.ts[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < 4; ++k) r.l2[k] = (pred.field(k).row(i) - exact.field(k).row(i)).norm();
  }
  return rows;
}

void write_energy_csv(std::ostream& os, const EnergySeries& series) {
  const auto precision = os.precision(17);
  os << "t,E\n";
  for (std::size_t i = 0; i < series.ts.size(); ++i) os << series.ts[i] << ',' << series.Es[i] << '\n';
  os.precision(precision);
}

void write_fits_json(std::ostream& os, const DecayClassification& c, double t_cut) {
  nlohmann::json j;
  j["best"] = std::string(to_string(c.best));
  j["t_cut"] = t_cut;
  nlohmann::json fits = nlohmann::json::object();
  for (const DecayFit& f : c.fits) {
    nlohmann::json entry;
    if (std::isnan(f.r_squared)) {
      entry["available"] = false;
    } else {
      entry["available"] = true;
      entry["slope"] = f.slope;
      entry["intercept"] = f.intercept;
      entry["r_squared"] = f.r_squared;
      entry["points"] = f.used;
      entry["nonpositive_dropped"] = f.nonpositive_dropped;
    }
    fits[std::string(to_string(f.model))] = entry;
  }
  j["fits"] = fits;
  j["E_inf"] = c.fits[0].E_inf;
  os << j.dump(2) << '\n';
}

void write_errors_csv(std::ostream& os, const std::vector<ErrorRow>& rows, const std::array<double, 4>& relative) {
  const auto precision = os.precision(17);
  os << "t,l2_phi,l2_psi,l2_theta,l2_q\n";
  for (const ErrorRow& r : rows) os << r.t << ',' << r.l2[0] << ',' << r.l2[1] << ',' << r.l2[2] << ',' << r.l2[3] << '\n';
  os << "relative," << relative[0] << ',' << relative[1] << ',' << relative[2] << ',' << relative[3] << '\n';
  os.precision(precision);
}

}  // namespace timo
