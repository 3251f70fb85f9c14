#include "cbound/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cbound/error.hpp"
#include "cbound/parallel.hpp"

namespace cbound {

namespace {

constexpr int kMaxBoundaries = 8;

double falling_factorial(int m, int r) {
  double f = 1.0;
  for (int k = 0; k < r; ++k) f *= static_cast<double>(m - k);
  return f;
}

}  // namespace

std::string to_string(BoundaryKind kind) {
  switch (kind) {
    case BoundaryKind::constant: return "constant";
    case BoundaryKind::affine: return "affine";
    case BoundaryKind::sinusoid: return "sinusoid";
    case BoundaryKind::polynomial: return "polynomial";
  }
  return "unknown";
}

BoundaryKind boundary_kind_from_string(const std::string& name) {
  if (name == "constant") return BoundaryKind::constant;
  if (name == "affine") return BoundaryKind::affine;
  if (name == "sinusoid") return BoundaryKind::sinusoid;
  if (name == "polynomial") return BoundaryKind::polynomial;
  throw InvalidArgument("unknown boundary kind '" + name + "'");
}

void HolderBoundary::validate(int d0) const {
  if (axis < 0 || axis >= d0) throw InvalidArgument("boundary axis out of range");
  if (!(alpha > 0.0)) throw InvalidArgument("boundary alpha must be positive");
  std::size_t want = 0;
  switch (kind) {
    case BoundaryKind::constant: want = 1; break;
    case BoundaryKind::affine: want = static_cast<std::size_t>(d0); break;
    case BoundaryKind::sinusoid: want = 4; break;
    case BoundaryKind::polynomial:
      if (params.empty()) throw InvalidArgument("polynomial boundary needs coefficients");
      want = params.size();
      break;
  }
  if (params.size() != want) {
    throw InvalidArgument(to_string(kind) + " boundary expects " + std::to_string(want) + " params");
  }
  for (double p : params) {
    if (!std::isfinite(p)) throw InvalidArgument("boundary params must be finite");
  }
}

double HolderBoundary::evaluate(std::span<const double> x) const {
  double h = params[0];
  int k = 0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (static_cast<int>(j) == axis) continue;
    const double u = x[j];
    switch (kind) {
      case BoundaryKind::constant: break;
      case BoundaryKind::affine: h += params[static_cast<std::size_t>(k) + 1] * u; break;
      case BoundaryKind::sinusoid:
        h += params[1] * std::sin(2.0 * std::numbers::pi * params[2] * u + params[3]);
        break;
      case BoundaryKind::polynomial: {
        double power = u;
        for (std::size_t m = 1; m < params.size(); ++m, power *= u) h += params[m] * power;
        break;
      }
    }
    ++k;
  }
  return h;
}

double HolderBoundary::derivative_bound(int m, int d0) const {
  const double free_dims = static_cast<double>(d0 - 1);
  switch (kind) {
    case BoundaryKind::constant: return m == 0 ? std::abs(params[0]) : 0.0;
    case BoundaryKind::affine: {
      if (m >= 2) return 0.0;
      double total = 0.0;
      double largest = 0.0;
      for (std::size_t k = 1; k < params.size(); ++k) {
        total += std::abs(params[k]);
        largest = std::max(largest, std::abs(params[k]));
      }
      return m == 0 ? std::abs(params[0]) + total : largest;
    }
    case BoundaryKind::sinusoid: {
      const double b = std::abs(params[1]);
      if (m == 0) return std::abs(params[0]) + free_dims * b;
      return b * std::pow(2.0 * std::numbers::pi * std::abs(params[2]), m);
    }
    case BoundaryKind::polynomial: {
      double total = 0.0;
      for (std::size_t k = 1; k < params.size(); ++k) {
        if (static_cast<int>(k) >= std::max(m, 1)) {
          total += std::abs(params[k]) * falling_factorial(static_cast<int>(k), m);
        }
      }
      return m == 0 ? std::abs(params[0]) + free_dims * total : total;
    }
  }
  return 0.0;
}

double HolderBoundary::holder_bound(int d0) const {
  const int full = std::max(0, static_cast<int>(std::ceil(alpha)) - 1);
  const double gamma = alpha - static_cast<double>(full);
  const double diam = std::sqrt(static_cast<double>(std::max(1, d0 - 1)));
  double r = 0.0;
  for (int m = 0; m <= full; ++m) r += derivative_bound(m, d0);
  r += derivative_bound(full + 1, d0) * std::pow(diam, 1.0 - gamma);
  return r;
}

double HolderBoundary::lipschitz_bound(int d0) const {
  return std::sqrt(static_cast<double>(d0 - 1)) * derivative_bound(1, d0);
}

SmoothPartition::SmoothPartition(int d0, int d1, std::vector<HolderBoundary> boundaries,
                                 std::vector<PatternEntry> pattern_map)
    : d0_(d0), d1_(d1), boundaries_(std::move(boundaries)), pattern_map_(std::move(pattern_map)) {
  if (d0_ < 1 || d0_ > kMaxDim) throw InvalidArgument("partition needs 1 <= d0 <= 64");
  if (d1_ < 2) throw InvalidArgument("partition needs d1 >= 2");
  const int n_bound = static_cast<int>(boundaries_.size());
  if (n_bound < 1 || n_bound > kMaxBoundaries) {
    throw InvalidArgument("partition supports 1..8 boundaries");
  }
  if (d1_ > (1 << n_bound)) throw InvalidArgument("d1 exceeds the number of sign patterns");
  for (const auto& b : boundaries_) b.validate(d0_);

  lookup_.assign(static_cast<std::size_t>(1) << n_bound, -1);
  std::vector<bool> hit(static_cast<std::size_t>(d1_), false);
  for (const auto& entry : pattern_map_) {
    if (static_cast<int>(entry.pattern.size()) != n_bound) {
      throw InvalidArgument("pattern length must equal the number of boundaries");
    }
    if (entry.part < 0 || entry.part >= d1_) throw InvalidArgument("pattern_map part out of range");
    std::size_t bits = 0;
    for (int k = 0; k < n_bound; ++k) {
      const int s = entry.pattern[static_cast<std::size_t>(k)];
      if (s != 1 && s != -1) throw InvalidArgument("pattern entries must be +1 or -1");
      if (s == 1) bits |= std::size_t{1} << k;
    }
    if (lookup_[bits] != -1) throw InvalidArgument("pattern listed twice in pattern_map");
    lookup_[bits] = entry.part;
    hit[static_cast<std::size_t>(entry.part)] = true;
  }
  if (std::find(lookup_.begin(), lookup_.end(), -1) != lookup_.end()) {
    throw InvalidArgument("pattern_map is not total over all sign patterns");
  }
  if (std::find(hit.begin(), hit.end(), false) != hit.end()) {
    throw InvalidArgument("pattern_map is not surjective onto the parts");
  }
}

int SmoothPartition::classify(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(d0_)) throw InvalidArgument("classify: dimension mismatch");
  std::size_t bits = 0;
  for (std::size_t k = 0; k < boundaries_.size(); ++k) {
    const auto& b = boundaries_[k];
    if (x[static_cast<std::size_t>(b.axis)] >= b.evaluate(x)) bits |= std::size_t{1} << k;
  }
  return lookup_[bits];
}

int SmoothPartition::indicator(int part, std::span<const double> x) const {
  if (part < 0 || part >= d1_) throw InvalidArgument("indicator: part index out of range");
  return classify(x) == part ? 1 : 0;
}

nlohmann::json SmoothPartition::to_json() const {
  nlohmann::json doc;
  doc["d0"] = d0_;
  doc["d1"] = d1_;
  doc["boundaries"] = nlohmann::json::array();
  for (const auto& b : boundaries_) {
    doc["boundaries"].push_back({{"kind", to_string(b.kind)},
                                 {"params", b.params},
                                 {"axis", b.axis + 1},
                                 {"alpha", b.alpha}});
  }
  doc["pattern_map"] = nlohmann::json::array();
  for (const auto& e : pattern_map_) {
    doc["pattern_map"].push_back({{"pattern", e.pattern}, {"part", e.part + 1}});
  }
  return doc;
}

SmoothPartition SmoothPartition::from_json(const nlohmann::json& doc) {
  try {
    std::vector<HolderBoundary> boundaries;
    for (const auto& b : doc.at("boundaries")) {
      HolderBoundary hb;
      hb.kind = boundary_kind_from_string(b.at("kind").get<std::string>());
      hb.params = b.at("params").get<std::vector<double>>();
      hb.axis = b.at("axis").get<int>() - 1;
      hb.alpha = b.value("alpha", 1.0);
      boundaries.push_back(std::move(hb));
    }
    std::vector<PatternEntry> entries;
    for (const auto& e : doc.at("pattern_map")) {
      entries.push_back({e.at("pattern").get<std::vector<int>>(), e.at("part").get<int>() - 1});
    }
    return SmoothPartition(doc.at("d0").get<int>(), doc.at("d1").get<int>(), std::move(boundaries),
                           std::move(entries));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed partition document: ") + e.what());
  }
}

double BaseDensity::density(std::span<const double> x) const noexcept {
  for (double v : x) {
    if (v < 0.0 || v > 1.0) return 0.0;
  }
  return 1.0;
}

void BaseDensity::sample(CounterRng& rng, std::span<double> out) const noexcept {
  for (auto& v : out) v = rng.uniform();
}

PartProbabilities part_probabilities(const SmoothPartition& partition, const BaseDensity& density,
                                     std::size_t n_mc, std::uint64_t seed) {
  if (n_mc < 1000) throw InvalidArgument("part_probabilities needs n_mc >= 1000");
  const auto d1 = static_cast<std::size_t>(partition.d1());
  const auto d0 = static_cast<std::size_t>(partition.d0());
  const auto counts = chunked_sums(n_mc, d1, [&](std::size_t i, double* out) {
    CounterRng rng(seed, i);
    double x[kMaxDim];
    density.sample(rng, std::span<double>(x, d0));
    out[partition.classify(std::span<const double>(x, d0))] = 1.0;
  });
  PartProbabilities result;
  result.samples = n_mc;
  const double n = static_cast<double>(n_mc);
  double assigned = 0.0;
  for (std::size_t i = 0; i < d1; ++i) {
    if (counts[i] == 0.0) {
      throw DegeneratePartition("part " + std::to_string(i + 1) + " received no Monte Carlo hits");
    }
    const double p = i + 1 < d1 ? counts[i] / n : 1.0 - assigned;
    assigned += p;
    result.probs.push_back(p);
    result.std_errors.push_back(std::sqrt(p * (1.0 - p) / n));
  }
  return result;
}

double boundary_proximity_fraction(const SmoothPartition& partition, const BaseDensity& density,
                                   double delta, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("boundary_proximity_fraction needs samples");
  const auto d0 = static_cast<std::size_t>(partition.d0());
  std::vector<double> slack;
  for (const auto& b : partition.boundaries()) {
    const double lip = b.lipschitz_bound(partition.d0());
    slack.push_back(delta * std::sqrt(1.0 + lip * lip));
  }
  const double near = chunked_sum(n, [&](std::size_t i) {
    CounterRng rng(seed, i);
    double x[kMaxDim];
    density.sample(rng, std::span<double>(x, d0));
    const std::span<const double> pt(x, d0);
    for (std::size_t k = 0; k < slack.size(); ++k) {
      const auto& b = partition.boundaries()[k];
      if (std::abs(pt[static_cast<std::size_t>(b.axis)] - b.evaluate(pt)) <= slack[k]) return 1.0;
    }
    return 0.0;
  });
  return near / static_cast<double>(n);
}

}  // namespace cbound
