#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cbound/pairgen.hpp"
#include "cbound/partition.hpp"
#include "cbound/simplex.hpp"
#include "cbound/simplex_map.hpp"

namespace cbound {

/// Ground truth: f*(x) = v_{classify(x)}.
struct ContrastiveTarget {
  SmoothPartition partition;
  SimplexFrame frame;

  ContrastiveTarget(SmoothPartition p, SimplexFrame f);

  int part(std::span<const double> x) const { return partition.classify(x); }
  Vector value(std::span<const double> x) const { return frame.vertex(part(x)); }
};

SimplexMap target_map(const ContrastiveTarget& target);

// f* followed by the cyclic vertex relabelling v_j -> v_{j+1}, v_{d1} -> v_1.
SimplexMap permuted_target_map(const ContrastiveTarget& target);

// ||f(x) - f(x')||^2 through the coefficient identity (d1/d) sum (g_i - g'_i)^2.
double rho_from_coefficients(const SimplexFrame& frame, std::span<const double> g,
                             std::span<const double> gp) noexcept;
double rho(const SimplexMap& f, const SimplexFrame& frame, std::span<const double> x,
           std::span<const double> xp);
// Same quantity computed from the embedded points.
double rho_embedded(const SimplexMap& f, const SimplexFrame& frame, std::span<const double> x,
                    std::span<const double> xp);

// psi(s) = 1 - 2 s / D^2.
double psi(const SimplexFrame& frame, double s) noexcept;

// max(0, 1 - y psi(rho)).
double hinge_from_rho(const SimplexFrame& frame, double rho_value, int y) noexcept;

double hinge_loss(const SimplexMap& f, const PairwiseSample& sample, const SimplexFrame& frame);

double empirical_risk(const SimplexMap& f, const PairwiseDataset& ds, const SimplexFrame& frame);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// E[l_f] - E[l_{f*}] over n_mc pairs from the generator, paired on common
/// draws so that f = f* gives exactly zero. Requires n_mc >= 10^4.
McEstimate excess_risk_mc(const SimplexMap& f, const ContrastiveTarget& target,
                          const GeneratorConfig& cfg, std::size_t n_mc, std::uint64_t seed);

struct BayesSignRecord {
  int part_x = 0;
  int part_xp = 0;
  double psi_rho = 0.0;
  double eta = 0.0;
};

struct BayesSignReport {
  std::size_t pairs = 0;
  std::size_t same_part = 0;
  std::size_t violations = 0;
  std::optional<PairwiseSample> counterexample;
  std::vector<BayesSignRecord> records;  // filled when requested

  bool pass() const noexcept { return violations == 0; }
};

/// Checks psi(rho_{f*}) in {+1, -1}, +1 iff same part, and agreement with
/// sign(2 eta - 1) on n_pairs generated pairs.
BayesSignReport bayes_sign_check(const ContrastiveTarget& target, const GeneratorConfig& cfg,
                                 std::size_t n_pairs, std::uint64_t seed, bool keep_records = false);

}  // namespace cbound
