#include "timo/sampling.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace timo {

namespace {

class OpenIntervalSampler {
 public:
  explicit OpenIntervalSampler(std::uint64_t seed) : gen_(seed) {}

  // Uniform on (0, upper).
  double draw(double upper) {
    for (;;) {
      const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
      const double v = u * upper;
      if (v > 0.0 && v < upper) return v;
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace

CollocationSet sample_collocation(const CollocationSizes& sizes, double T, std::uint64_t seed) {
  if (sizes.interior == 0 || sizes.boundary == 0 || sizes.initial == 0) {
    throw std::invalid_argument("collocation sizes must be at least 1");
  }
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("time horizon T must be positive and finite");

  OpenIntervalSampler sampler(seed);
  CollocationSet set;
  set.seed = seed;
  set.interior.reserve(sizes.interior);
  for (std::size_t i = 0; i < sizes.interior; ++i) {
    const double x = sampler.draw(1.0);
    const double t = sampler.draw(T);
    set.interior.push_back({x, t});
  }
  set.boundary_times.reserve(sizes.boundary);
  for (std::size_t i = 0; i < sizes.boundary; ++i) set.boundary_times.push_back(sampler.draw(T));
  set.initial_xs.reserve(sizes.initial);
  for (std::size_t i = 0; i < sizes.initial; ++i) set.initial_xs.push_back(sampler.draw(1.0));
  return set;
}

CollocationSet sample_collocation(std::size_t n, double T, std::uint64_t seed) {
  return sample_collocation(CollocationSizes{n, n, n}, T, seed);
}

EvalGrid uniform_grid(std::size_t nx, std::size_t nt, double T) {
  if (nx < 2 || nt < 2) throw std::invalid_argument("grid needs at least 2 intervals in x and t");
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("time horizon T must be positive and finite");
  EvalGrid g;
  g.xs.resize(nx + 1);
  g.ts.resize(nt + 1);
  for (std::size_t j = 0; j <= nx; ++j) g.xs[j] = static_cast<double>(j) / static_cast<double>(nx);
  for (std::size_t i = 0; i <= nt; ++i) g.ts[i] = static_cast<double>(i) * T / static_cast<double>(nt);
  g.ts[nt] = T;
  return g;
}

}  // namespace timo
