#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace timo {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Partial derivatives carried by a jet over the inputs (x, t).
enum class Partial : std::uint8_t { Val = 0, Dx, Dt, Dxx, Dtt, Dxt };

inline constexpr std::size_t kNumPartials = 6;
inline constexpr std::array<Partial, kNumPartials> kAllPartials = {
    Partial::Val, Partial::Dx, Partial::Dt, Partial::Dxx, Partial::Dtt, Partial::Dxt};

/// Set of tracked partials. Always closed under dependency: a partial is only
/// present if every lower-order partial it is built from is present too.
class PartialSet {
 public:
  constexpr PartialSet() = default;

  static constexpr PartialSet full() { return PartialSet(0b111111); }
  static constexpr PartialSet value_only() { return PartialSet(0b000001); }
  static constexpr PartialSet first_x() { return PartialSet(0b000011); }
  static constexpr PartialSet first_t() { return PartialSet(0b000101); }

  /// Builds a set from arbitrary bits; throws std::invalid_argument if the set
  /// is not dependency-closed.
  static PartialSet from_bits(std::uint8_t bits);

  constexpr bool has(Partial p) const { return (bits_ >> static_cast<int>(p)) & 1u; }
  constexpr std::uint8_t bits() const { return bits_; }
  int count() const;

  friend constexpr bool operator==(PartialSet, PartialSet) = default;

 private:
  constexpr explicit PartialSet(std::uint8_t bits) : bits_(bits) {}
  std::uint8_t bits_ = 0b000001;
};

/// A scalar together with its first and second partials in (x, t).
struct Jet2 {
  double val = 0.0;
  double dx = 0.0;
  double dt = 0.0;
  double dxx = 0.0;
  double dtt = 0.0;
  double dxt = 0.0;

  double operator[](Partial p) const;
  double& operator[](Partial p);

  static constexpr Jet2 constant(double c) { return Jet2{c, 0, 0, 0, 0, 0}; }

  friend bool operator==(const Jet2&, const Jet2&) = default;
};

/// Returns the x-jet (x, 1, 0, ...) and the t-jet (t, 0, 1, 0, ...).
std::pair<Jet2, Jet2> seed_inputs(double x, double t);

Jet2 operator+(const Jet2& u, const Jet2& v);
Jet2 operator-(const Jet2& u, const Jet2& v);
Jet2 operator*(double c, const Jet2& u);

/// Second-order product rule.
Jet2 jet_mul(const Jet2& u, const Jet2& v);

/// Chain rule for g(u) given g(u.val), g'(u.val), g''(u.val).
Jet2 jet_chain(const Jet2& u, double g0, double g1, double g2);

Jet2 jet_tanh(const Jet2& u);
Jet2 jet_exp(const Jet2& u);
Jet2 jet_reciprocal(const Jet2& u);

/// out_i = sum_j W(i, j) u_j + b_i, applied to every partial; b enters the
/// value only. Throws std::invalid_argument on a dimension mismatch.
std::vector<Jet2> jet_affine(const Eigen::Ref<const RowMatrix>& W,
                             const Eigen::Ref<const Eigen::VectorXd>& b,
                             std::span<const Jet2> u);

}  // namespace timo
