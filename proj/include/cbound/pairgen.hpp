#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cbound/partition.hpp"
#include "cbound/simplex.hpp"

namespace cbound {

/// Parameters of the explicit pairwise distribution: Gamma ~ Bernoulli(c),
/// B, B' ~ categorical(part_probs), V_i, V'_i ~ P_X(. | K_i).
struct GeneratorConfig {
  SmoothPartition partition;
  BaseDensity density = BaseDensity::uniform();
  double c = 0.9;
  std::vector<double> part_probs;
  std::uint64_t seed = 0;

  // Requires c in (0, 1], c > max_i p_i / (1 + p_i), and p a probability
  // vector with positive entries.
  void validate() const;

  // Config whose part_probs come from part_probabilities().
  static GeneratorConfig estimated(SmoothPartition partition, double c, std::uint64_t seed,
                                   std::size_t n_mc = 200000,
                                   BaseDensity density = BaseDensity::uniform());

  nlohmann::json to_json() const;  // without the seed
  std::string fingerprint() const;  // FNV-1a of to_json(), hex
};

struct PairwiseSample {
  Vector x;
  Vector xp;
  int y = 1;
};

struct PairwiseDataset {
  std::vector<PairwiseSample> samples;
  std::string fingerprint;
  std::uint64_t seed = 0;
  int d0 = 0;

  std::size_t size() const noexcept { return samples.size(); }
};

struct ConditionalDraw {
  Vector x;
  std::uint64_t attempts = 0;
};

inline constexpr std::uint64_t kMaxRejections = 1000000;

/// Rejection draw from P_X restricted to part `part`. Throws DegeneratePart
/// after kMaxRejections consecutive misses.
ConditionalDraw sample_conditional(const SmoothPartition& partition, int part,
                                   const BaseDensity& density, CounterRng& rng);

PairwiseSample sample_pair(const GeneratorConfig& cfg, CounterRng& rng);

/// n samples; sample i uses the stream (cfg.seed, i), so the result does not
/// depend on the worker count.
PairwiseDataset generate_dataset(const GeneratorConfig& cfg, std::size_t n);

// c / ((1 - p_i) c + p_i), the conditional probability of y = +1 on K_i x K_i.
double analytic_eta(const GeneratorConfig& cfg, int part);
// eta(x, x') given the parts of x and x' (zero off the diagonal blocks).
double eta_for_parts(const GeneratorConfig& cfg, int part_x, int part_xp);
// min_i |2 eta_i - 1|.
double massart_margin(const GeneratorConfig& cfg);

struct EtaEstimate {
  std::size_t positives = 0;
  std::size_t trials = 0;
  std::optional<double> estimate;  // empty when no same-part pair was seen
  double std_error = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
};

struct EtaReport {
  std::vector<EtaEstimate> diagonal;  // per part
  std::size_t off_diagonal_positives = 0;
  std::size_t off_diagonal_trials = 0;
};

EtaReport empirical_eta(const PairwiseDataset& ds, const SmoothPartition& partition);

// CSV with header x_1..x_d0,xp_1..xp_d0,y plus a <path>.json sidecar holding
// the fingerprint and seed.
void write_dataset(const PairwiseDataset& ds, const std::filesystem::path& csv_path);
PairwiseDataset read_dataset(const std::filesystem::path& csv_path);

}  // namespace cbound
