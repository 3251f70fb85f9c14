#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cbound/rng.hpp"
#include "json.hpp"

namespace cbound {

// Largest supported ambient dimension d0.
inline constexpr int kMaxDim = 64;

enum class BoundaryKind { constant, affine, sinusoid, polynomial };

std::string to_string(BoundaryKind kind);
BoundaryKind boundary_kind_from_string(const std::string& name);

/// Threshold surface x_axis = h(x without axis) from a closed-form family.
/// With u = x restricted to the other d0-1 coordinates:
///   constant    [a]                  h = a
///   affine      [a, b_1..b_{d0-1}]   h = a + sum_k b_k u_k
///   sinusoid    [a, b, w, phi]       h = a + b sum_k sin(2 pi w u_k + phi)
///   polynomial  [c_0, c_1, .., c_m]  h = c_0 + sum_k sum_{m>=1} c_m u_k^m
struct HolderBoundary {
  BoundaryKind kind = BoundaryKind::constant;
  std::vector<double> params;
  double alpha = 1.0;  // nominal smoothness, informational
  int axis = 0;        // 0-based coordinate being thresholded

  // h evaluated at the full point x (coordinate `axis` is skipped).
  double evaluate(std::span<const double> x) const;

  // Upper bound on sup_u |d^m phi(u)/du^m| over [0,1] for the separable
  // summand phi (m >= 1), or on sup |h| for m = 0.
  double derivative_bound(int m, int d0) const;

  // Bound R on the C^alpha norm over [0,1]^{d0-1}: sum of sup norms of the
  // derivatives up to order ceil(alpha)-1 plus the Holder seminorm of the
  // last one.
  double holder_bound(int d0) const;

  double lipschitz_bound(int d0) const;

  void validate(int d0) const;
};

struct PatternEntry {
  std::vector<int> pattern;  // entries +1 / -1, one per boundary
  int part = 0;              // 0-based
};

/// Disjoint cover of [0,1]^{d0} by sign patterns of boundary functions.
/// The sign of boundary k at x is +1 iff x_{axis_k} >= h_k(x) (ties go to +1).
class SmoothPartition {
 public:
  SmoothPartition(int d0, int d1, std::vector<HolderBoundary> boundaries,
                  std::vector<PatternEntry> pattern_map);

  int d0() const noexcept { return d0_; }
  int d1() const noexcept { return d1_; }
  const std::vector<HolderBoundary>& boundaries() const noexcept { return boundaries_; }
  const std::vector<PatternEntry>& pattern_map() const noexcept { return pattern_map_; }

  // Part of x (0-based).
  int classify(std::span<const double> x) const;
  // 1 iff classify(x) == part. Throws InvalidArgument on a bad index.
  int indicator(int part, std::span<const double> x) const;

  nlohmann::json to_json() const;
  static SmoothPartition from_json(const nlohmann::json& doc);

 private:
  int d0_;
  int d1_;
  std::vector<HolderBoundary> boundaries_;
  std::vector<PatternEntry> pattern_map_;
  std::vector<int> lookup_;  // bit k set <=> sign_k = +1
};

/// Base density on the cube; only the uniform density is implemented.
class BaseDensity {
 public:
  enum class Kind { uniform };

  static BaseDensity uniform() { return BaseDensity(Kind::uniform); }

  Kind kind() const noexcept { return kind_; }
  double sup_norm() const noexcept { return 1.0; }
  double density(std::span<const double> x) const noexcept;
  void sample(CounterRng& rng, std::span<double> out) const noexcept;

 private:
  explicit BaseDensity(Kind kind) : kind_(kind) {}
  Kind kind_;
};

struct PartProbabilities {
  std::vector<double> probs;
  std::vector<double> std_errors;
  std::size_t samples = 0;
};

/// Monte Carlo part masses under the base density. Throws
/// DegeneratePartition if some part gets no hits, InvalidArgument for
/// n_mc < 1000.
PartProbabilities part_probabilities(const SmoothPartition& partition, const BaseDensity& density,
                                     std::size_t n_mc, std::uint64_t seed);

// Fraction of n density draws lying within distance delta of some boundary
// surface (conservatively: vertical gap <= delta * sqrt(1 + Lip^2)).
double boundary_proximity_fraction(const SmoothPartition& partition, const BaseDensity& density,
                                   double delta, std::size_t n, std::uint64_t seed);

}  // namespace cbound
