#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "timo/jet.hpp"

namespace timo::test {

// Central differences with one Richardson step, so the truncation error is
// O(h^4) while h stays large enough to keep roundoff small.
inline double richardson(const std::function<double(double)>& d_of_h, double h) {
  return (4.0 * d_of_h(h / 2.0) - d_of_h(h)) / 3.0;
}

/// Every partial of a scalar map g(x, t) by finite differences of its values.
/// Second differences divide roundoff by h^2, so they take the wider step h2.
inline Jet2 fd_jet(const std::function<double(double, double)>& g, double x, double t, double h = 1e-3,
                   double h2 = 3e-2) {
  Jet2 j;
  j.val = g(x, t);
  j.dx = richardson([&](double s) { return (g(x + s, t) - g(x - s, t)) / (2 * s); }, h);
  j.dt = richardson([&](double s) { return (g(x, t + s) - g(x, t - s)) / (2 * s); }, h);
  j.dxx = richardson([&](double s) { return (g(x + s, t) - 2 * j.val + g(x - s, t)) / (s * s); }, h2);
  j.dtt = richardson([&](double s) { return (g(x, t + s) - 2 * j.val + g(x, t - s)) / (s * s); }, h2);
  j.dxt = richardson(
      [&](double s) {
        return (g(x + s, t + s) - g(x + s, t - s) - g(x - s, t + s) + g(x - s, t - s)) / (4 * s * s);
      },
      h2);
  return j;
}

/// Relative error with an absolute floor: |a - b| / max(|b|, floor).
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max(std::abs(b), floor);
}

/// Finite-difference gradient of f over every entry of `p` (restored afterwards).
inline std::vector<double> fd_gradient(const std::function<double()>& f, std::vector<double>& p, double h = 1e-4) {
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    g[i] = richardson(
        [&](double s) {
          p[i] = keep + s;
          const double up = f();
          p[i] = keep - s;
          const double down = f();
          p[i] = keep;
          return (up - down) / (2 * s);
        },
        h);
  }
  return g;
}

inline std::vector<double> uniform_vector(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(gen);
  return v;
}

}  // namespace timo::test
