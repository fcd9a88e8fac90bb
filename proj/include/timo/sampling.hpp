#pragma once

#include <cstdint>
#include <vector>

namespace timo {

struct SpaceTimePoint {
  double x = 0.0;
  double t = 0.0;
  friend bool operator==(const SpaceTimePoint&, const SpaceTimePoint&) = default;
};

struct CollocationSizes {
  std::size_t interior = 3000;
  std::size_t boundary = 3000;
  std::size_t initial = 3000;
  friend bool operator==(const CollocationSizes&, const CollocationSizes&) = default;
};

/// Training points, drawn once and held fixed.
struct CollocationSet {
  std::vector<SpaceTimePoint> interior;  // in (0, 1) x (0, T)
  std::vector<double> boundary_times;    // in (0, T), used at both ends
  std::vector<double> initial_xs;        // in (0, 1)
  std::uint64_t seed = 0;

  friend bool operator==(const CollocationSet&, const CollocationSet&) = default;
};

/// Uniform draws from std::mt19937_64(seed). Each 64-bit output r maps to
/// u = (r >> 11) * 2^-53 in [0, 1); a draw whose scaled value is not strictly
/// inside the open interval is discarded and redrawn. Draw order: interior
/// points (x then t), boundary times, initial xs.
CollocationSet sample_collocation(const CollocationSizes& sizes, double T, std::uint64_t seed);
CollocationSet sample_collocation(std::size_t n, double T, std::uint64_t seed);

/// Inclusive uniform nodes: xs[j] = j / nx, ts[i] = i T / nt.
struct EvalGrid {
  std::vector<double> xs;
  std::vector<double> ts;

  std::size_t nx() const { return xs.size() - 1; }
  std::size_t nt() const { return ts.size() - 1; }
};

/// Throws std::invalid_argument unless nx, nt >= 2 and T > 0.
EvalGrid uniform_grid(std::size_t nx, std::size_t nt, double T);

}  // namespace timo
