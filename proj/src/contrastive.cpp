#include "cbound/contrastive.hpp"

#include <algorithm>
#include <cmath>

#include "cbound/error.hpp"
#include "cbound/parallel.hpp"

namespace cbound {

ContrastiveTarget::ContrastiveTarget(SmoothPartition p, SimplexFrame f)
    : partition(std::move(p)), frame(std::move(f)) {
  if (partition.d1() != frame.d1()) throw InvalidArgument("target: partition and frame disagree on d1");
}

SimplexMap target_map(const ContrastiveTarget& target) {
  const SmoothPartition partition = target.partition;
  return SimplexMap(
      partition.d1(),
      [partition](std::span<const double> x, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        out[static_cast<std::size_t>(partition.classify(x))] = 1.0;
      },
      "f*");
}

SimplexMap permuted_target_map(const ContrastiveTarget& target) {
  const SmoothPartition partition = target.partition;
  const int d1 = partition.d1();
  return SimplexMap(
      d1,
      [partition, d1](std::span<const double> x, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        out[static_cast<std::size_t>((partition.classify(x) + 1) % d1)] = 1.0;
      },
      "permuted f*");
}

double rho_from_coefficients(const SimplexFrame& frame, std::span<const double> g,
                             std::span<const double> gp) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double t = g[i] - gp[i];
    s += t * t;
  }
  return frame.coefficient_scale() * s;
}

double rho(const SimplexMap& f, const SimplexFrame& frame, std::span<const double> x,
           std::span<const double> xp) {
  return rho_from_coefficients(frame, f.coefficients(x), f.coefficients(xp));
}

double rho_embedded(const SimplexMap& f, const SimplexFrame& frame, std::span<const double> x,
                    std::span<const double> xp) {
  return squared_distance(frame.embed(f.coefficients(x)), frame.embed(f.coefficients(xp)));
}

double psi(const SimplexFrame& frame, double s) noexcept {
  return 1.0 - 2.0 * s / frame.diameter_sq();
}

double hinge_from_rho(const SimplexFrame& frame, double rho_value, int y) noexcept {
  return std::max(0.0, 1.0 - static_cast<double>(y) * psi(frame, rho_value));
}

double hinge_loss(const SimplexMap& f, const PairwiseSample& sample, const SimplexFrame& frame) {
  return hinge_from_rho(frame, rho(f, frame, sample.x, sample.xp), sample.y);
}

double empirical_risk(const SimplexMap& f, const PairwiseDataset& ds, const SimplexFrame& frame) {
  if (ds.samples.empty()) throw InvalidArgument("empirical_risk: empty dataset");
  const double total =
      chunked_sum(ds.size(), [&](std::size_t i) { return hinge_loss(f, ds.samples[i], frame); });
  return total / static_cast<double>(ds.size());
}

McEstimate excess_risk_mc(const SimplexMap& f, const ContrastiveTarget& target,
                          const GeneratorConfig& cfg, std::size_t n_mc, std::uint64_t seed) {
  if (n_mc < 10000) throw InvalidArgument("excess_risk_mc needs n_mc >= 10^4");
  cfg.validate();
  const auto fstar = target_map(target);
  const auto& frame = target.frame;
  const auto sums = chunked_sums(n_mc, 2, [&](std::size_t i, double* out) {
    CounterRng rng(seed, i);
    const auto s = sample_pair(cfg, rng);
    const double diff = hinge_loss(f, s, frame) - hinge_loss(fstar, s, frame);
    out[0] = diff;
    out[1] = diff * diff;
  });
  const double n = static_cast<double>(n_mc);
  const double mean = sums[0] / n;
  const double var = std::max(0.0, (sums[1] / n - mean * mean) * n / (n - 1.0));
  return {mean, std::sqrt(var / n), n_mc};
}

BayesSignReport bayes_sign_check(const ContrastiveTarget& target, const GeneratorConfig& cfg,
                                 std::size_t n_pairs, std::uint64_t seed, bool keep_records) {
  cfg.validate();
  const auto fstar = target_map(target);
  BayesSignReport report;
  report.pairs = n_pairs;
  if (keep_records) report.records.resize(n_pairs);
  std::vector<char> bad(n_pairs, 0);
  std::vector<char> same(n_pairs, 0);
  const std::size_t chunks = (n_pairs + kReduceChunk - 1) / kReduceChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(n_pairs, (c + 1) * kReduceChunk);
    for (std::size_t i = c * kReduceChunk; i < end; ++i) {
      CounterRng rng(seed, i);
      const auto s = sample_pair(cfg, rng);
      const int a = target.part(s.x);
      const int b = target.part(s.xp);
      const double value = psi(target.frame, rho(fstar, target.frame, s.x, s.xp));
      const double eta = eta_for_parts(cfg, a, b);
      const bool is_same = a == b;
      const double bayes = 2.0 * eta - 1.0 > 0.0 ? 1.0 : -1.0;
      const bool ok = (value == 1.0 || value == -1.0) && ((value == 1.0) == is_same) && value == bayes;
      bad[i] = ok ? 0 : 1;
      same[i] = is_same ? 1 : 0;
      if (keep_records) report.records[i] = {a, b, value, eta};
    }
  });
  for (std::size_t i = 0; i < n_pairs; ++i) {
    report.same_part += static_cast<std::size_t>(same[i]);
    if (bad[i]) {
      ++report.violations;
      if (!report.counterexample) {
        CounterRng rng(seed, i);
        report.counterexample = sample_pair(cfg, rng);
      }
    }
  }
  return report;
}

}  // namespace cbound
