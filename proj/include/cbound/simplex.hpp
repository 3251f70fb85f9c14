#pragma once

#include <span>
#include <vector>

namespace cbound {

using Vector = std::vector<double>;

/// Regular simplex with d1 unit-norm vertices centred at the origin of R^d,
/// d = d1 - 1. Immutable after construction.
class SimplexFrame {
 public:
  /// Deterministic frame: centred standard basis of R^{d1} expressed in an
  /// orthonormal basis of the sum-zero hyperplane (Gram-Schmidt on
  /// e_k - e_{k+1}). Throws InvalidArgument for d1 < 2.
  static SimplexFrame build(int d1);

  /// Frame over caller-supplied vertices. Only the shape is validated; the
  /// derived constants are the closed forms for a regular simplex, so a
  /// malformed vertex set shows up in check_frame().
  explicit SimplexFrame(std::vector<Vector> vertices);

  int d1() const noexcept { return static_cast<int>(vertices_.size()); }
  int d() const noexcept { return d1() - 1; }
  const Vector& vertex(int i) const { return vertices_.at(static_cast<std::size_t>(i)); }
  const std::vector<Vector>& vertices() const noexcept { return vertices_; }

  // Common distance between distinct vertices, sqrt(2 d1 / d).
  double diameter() const noexcept { return diameter_; }
  // 2 * (d1/d). Stored separately so that rho computed through the
  // coefficient identity reproduces it bit for bit on distinct vertices.
  double diameter_sq() const noexcept { return diameter_sq_; }
  // Distance from a vertex to the opposite facet, (d+1)/d.
  double dproj() const noexcept { return dproj_; }
  // d1/d, the factor in ||sum (g_i - g'_i) v_i||^2 = (d1/d) sum (g_i - g'_i)^2.
  double coefficient_scale() const noexcept { return scale_; }

  /// Unique affine coefficients of z: g_j = (d/d1)(<z, v_j> + 1/d).
  Vector barycentric(std::span<const double> z) const;

  /// sum_i g_i v_i for a probability vector g (tolerance 1e-9).
  Vector embed(std::span<const double> g) const;

  // Unchecked embed into a caller buffer of size d.
  void embed_into(std::span<const double> g, std::span<double> out) const noexcept;

 private:
  std::vector<Vector> vertices_;
  double diameter_ = 0.0;
  double diameter_sq_ = 0.0;
  double dproj_ = 0.0;
  double scale_ = 0.0;
};

// Largest deviations from the regular-simplex identities.
struct FrameCheck {
  double sum_error = 0.0;       // max |sum_i v_i| component
  double norm_error = 0.0;      // max | ||v_i|| - 1 |
  double inner_error = 0.0;     // max |<v_i, v_j> + 1/d|, i != j
  double distance_error = 0.0;  // max | ||v_i - v_j|| - diameter |
  bool dproj_consistent = false;

  bool ok(double tol = 1e-12) const noexcept {
    return sum_error <= tol && norm_error <= tol && inner_error <= tol &&
           distance_error <= tol && dproj_consistent;
  }
};

FrameCheck check_frame(const SimplexFrame& frame);

// Squared Euclidean distance between two points of R^d.
double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace cbound
