#include "cbound/pairgen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cbound/error.hpp"
#include "cbound/io.hpp"
#include "cbound/parallel.hpp"

namespace cbound {

void GeneratorConfig::validate() const {
  const auto d1 = static_cast<std::size_t>(partition.d1());
  if (part_probs.size() != d1) throw InvalidArgument("part_probs must have d1 entries");
  double total = 0.0;
  double worst = 0.0;
  for (double p : part_probs) {
    if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("part_probs entries must lie in (0, 1]");
    total += p;
    worst = std::max(worst, p / (1.0 + p));
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("part_probs must sum to 1");
  if (!(c > 0.0 && c <= 1.0)) throw InvalidArgument("Bernoulli parameter c must lie in (0, 1]");
  if (!(c > worst)) {
    throw InvalidArgument("c must exceed max_i p_i/(1+p_i) = " + format_number(worst));
  }
}

GeneratorConfig GeneratorConfig::estimated(SmoothPartition partition, double c, std::uint64_t seed,
                                           std::size_t n_mc, BaseDensity density) {
  auto probs = part_probabilities(partition, density, n_mc, derive_key(seed, 0x70617274ULL)).probs;
  GeneratorConfig cfg{std::move(partition), density, c, std::move(probs), seed};
  cfg.validate();
  return cfg;
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"partition", partition.to_json()},
          {"density", "uniform"},
          {"c", c},
          {"part_probs", part_probs}};
}

std::string GeneratorConfig::fingerprint() const { return hex64(fnv1a(to_json().dump())); }

ConditionalDraw sample_conditional(const SmoothPartition& partition, int part,
                                   const BaseDensity& density, CounterRng& rng) {
  if (part < 0 || part >= partition.d1()) throw InvalidArgument("sample_conditional: bad part");
  ConditionalDraw draw;
  draw.x.resize(static_cast<std::size_t>(partition.d0()));
  for (std::uint64_t attempt = 1; attempt <= kMaxRejections; ++attempt) {
    density.sample(rng, draw.x);
    if (partition.classify(draw.x) == part) {
      draw.attempts = attempt;
      return draw;
    }
  }
  throw DegeneratePart("part " + std::to_string(part + 1) + ": " + std::to_string(kMaxRejections) +
                       " consecutive rejections");
}

PairwiseSample sample_pair(const GeneratorConfig& cfg, CounterRng& rng) {
  const bool positive = rng.bernoulli(cfg.c);
  const int b = static_cast<int>(rng.categorical(cfg.part_probs));
  const int b_prime = static_cast<int>(rng.categorical(cfg.part_probs));
  PairwiseSample s;
  s.y = positive ? 1 : -1;
  s.x = sample_conditional(cfg.partition, b, cfg.density, rng).x;
  s.xp = sample_conditional(cfg.partition, positive ? b : b_prime, cfg.density, rng).x;
  return s;
}

PairwiseDataset generate_dataset(const GeneratorConfig& cfg, std::size_t n) {
  cfg.validate();
  PairwiseDataset ds;
  ds.samples.resize(n);
  ds.seed = cfg.seed;
  ds.fingerprint = cfg.fingerprint();
  ds.d0 = cfg.partition.d0();
  const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(n, (c + 1) * kReduceChunk);
    for (std::size_t i = c * kReduceChunk; i < end; ++i) {
      CounterRng rng(cfg.seed, i);
      ds.samples[i] = sample_pair(cfg, rng);
    }
  });
  return ds;
}

double analytic_eta(const GeneratorConfig& cfg, int part) {
  const double p = cfg.part_probs.at(static_cast<std::size_t>(part));
  return cfg.c / ((1.0 - p) * cfg.c + p);
}

double eta_for_parts(const GeneratorConfig& cfg, int part_x, int part_xp) {
  return part_x == part_xp ? analytic_eta(cfg, part_x) : 0.0;
}

double massart_margin(const GeneratorConfig& cfg) {
  double margin = 1.0;
  for (int i = 0; i < cfg.partition.d1(); ++i) {
    margin = std::min(margin, std::abs(2.0 * analytic_eta(cfg, i) - 1.0));
  }
  return margin;
}

EtaReport empirical_eta(const PairwiseDataset& ds, const SmoothPartition& partition) {
  if (ds.samples.empty()) throw InvalidArgument("empirical_eta: empty dataset");
  EtaReport report;
  report.diagonal.resize(static_cast<std::size_t>(partition.d1()));
  for (const auto& s : ds.samples) {
    const int a = partition.classify(s.x);
    const int b = partition.classify(s.xp);
    if (a == b) {
      auto& e = report.diagonal[static_cast<std::size_t>(a)];
      ++e.trials;
      if (s.y == 1) ++e.positives;
    } else {
      ++report.off_diagonal_trials;
      if (s.y == 1) ++report.off_diagonal_positives;
    }
  }
  constexpr double z = 1.96;
  for (auto& e : report.diagonal) {
    if (e.trials == 0) continue;
    const double n = static_cast<double>(e.trials);
    const double p = static_cast<double>(e.positives) / n;
    e.estimate = p;
    e.std_error = std::sqrt(p * (1.0 - p) / n);
    const double denom = 1.0 + z * z / n;
    const double centre = (p + z * z / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
    e.wilson_lo = centre - half;
    e.wilson_hi = centre + half;
  }
  return report;
}

void write_dataset(const PairwiseDataset& ds, const std::filesystem::path& csv_path) {
  std::string out;
  for (int k = 1; k <= ds.d0; ++k) out += "x_" + std::to_string(k) + ",";
  for (int k = 1; k <= ds.d0; ++k) out += "xp_" + std::to_string(k) + ",";
  out += "y\n";
  for (const auto& s : ds.samples) {
    for (double v : s.x) out += format_number(v) + ",";
    for (double v : s.xp) out += format_number(v) + ",";
    out += s.y == 1 ? "1\n" : "-1\n";
  }
  write_text(csv_path, out);
  auto sidecar = csv_path;
  sidecar += ".json";
  write_json(sidecar, {{"fingerprint", ds.fingerprint},
                       {"seed", ds.seed},
                       {"n", ds.samples.size()},
                       {"d0", ds.d0}});
}

PairwiseDataset read_dataset(const std::filesystem::path& csv_path) {
  std::istringstream in(read_text(csv_path));
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("empty dataset file " + csv_path.string());
  const auto header = split_csv_line(line);
  if (header.size() < 3 || (header.size() - 1) % 2 != 0 || header.back() != "y") {
    throw InvalidArgument("dataset header must be x_1..x_d0,xp_1..xp_d0,y");
  }
  PairwiseDataset ds;
  ds.d0 = static_cast<int>((header.size() - 1) / 2);
  const auto d0 = static_cast<std::size_t>(ds.d0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw InvalidArgument("dataset row has wrong field count");
    PairwiseSample s;
    for (std::size_t k = 0; k < d0; ++k) s.x.push_back(parse_number(f[k]));
    for (std::size_t k = 0; k < d0; ++k) s.xp.push_back(parse_number(f[d0 + k]));
    const double y = parse_number(f.back());
    if (y != 1.0 && y != -1.0) throw InvalidArgument("dataset label must be +1 or -1");
    s.y = static_cast<int>(y);
    ds.samples.push_back(std::move(s));
  }
  auto sidecar = csv_path;
  sidecar += ".json";
  if (std::filesystem::exists(sidecar)) {
    const auto meta = read_json(sidecar);
    ds.fingerprint = meta.value("fingerprint", "");
    ds.seed = meta.value("seed", std::uint64_t{0});
  }
  return ds;
}

}  // namespace cbound
