#include "cbound/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "cbound/error.hpp"
#include "cbound/io.hpp"
#include "cbound/parallel.hpp"
#include "cbound/rng.hpp"

namespace cbound {

namespace {

constexpr int kMaxGridSide = 256;
constexpr int kMaxGridDim = 3;
constexpr double kCrossCheckTol = 1e-8;

// Weighted node sums shared by the L2 and misclassification functionals.
struct NodeSums {
  Vector per_part;
  double total = 0.0, total_sq = 0.0;
  double vec = 0.0;
  double wrong = 0.0, wrong_sq = 0.0;
  double bound = 0.0, bound_sq = 0.0;
  double gap_sq = 0.0;
  double weight = 0.0;
};

void node_point(const QuadratureRule& rule, const BaseDensity& density, int d0, std::size_t i, Vector& x,
                double& weight) {
  if (rule.kind == Quadrature::grid) {
    std::size_t rest = i;
    const auto side = static_cast<std::size_t>(rule.side);
    for (int k = 0; k < d0; ++k) {
      x[static_cast<std::size_t>(k)] = (static_cast<double>(rest % side) + 0.5) / static_cast<double>(side);
      rest /= side;
    }
    weight = density.density(x) / static_cast<double>(rule.nodes);
  } else {
    CounterRng rng(rule.seed, i);
    density.sample(rng, x);
    weight = 1.0 / static_cast<double>(rule.nodes);
  }
}

NodeSums node_pass(const SimplexMap& f, const ContrastiveTarget& target, const BaseDensity& density,
                   const QuadratureRule& rule) {
  const auto& frame = target.frame;
  const int d0 = target.partition.d0();
  const auto d1 = static_cast<std::size_t>(frame.d1());
  const double bound_scale = 4.0 / frame.diameter_sq();
  // Layout: per-part [0, d1), then total, total^2, vec, wrong, wrong^2,
  // bound, bound^2, gap^2, weight.
  const std::size_t width = d1 + 9;
  const auto sums = chunked_sums(rule.nodes, width, [&](std::size_t i, double* out) {
    Vector x(static_cast<std::size_t>(d0));
    double w = 0.0;
    node_point(rule, density, d0, i, x, w);
    const int part = target.part(x);
    const Vector g = f.coefficients(x);
    double total = 0.0;
    for (std::size_t j = 0; j < d1; ++j) {
      const double e = g[j] - (static_cast<int>(j) == part ? 1.0 : 0.0);
      out[j] = w * e * e;
      total += e * e;
    }
    Vector point(static_cast<std::size_t>(frame.d()));
    frame.embed_into(g, point);
    const double vec = squared_distance(point, frame.vertex(part));
    const double wrong = plugin_classify(f, x) == part ? 0.0 : 1.0;
    const double bound = bound_scale * vec;
    out[d1] = w * total;
    out[d1 + 1] = w * total * total;
    out[d1 + 2] = w * vec;
    out[d1 + 3] = w * wrong;
    out[d1 + 4] = w * wrong;
    out[d1 + 5] = w * bound;
    out[d1 + 6] = w * bound * bound;
    out[d1 + 7] = w * (bound - wrong) * (bound - wrong);
    out[d1 + 8] = w;
  });
  NodeSums s;
  s.per_part.assign(sums.begin(), sums.begin() + static_cast<std::ptrdiff_t>(d1));
  s.total = sums[d1];
  s.total_sq = sums[d1 + 1];
  s.vec = sums[d1 + 2];
  s.wrong = sums[d1 + 3];
  s.wrong_sq = sums[d1 + 4];
  s.bound = sums[d1 + 5];
  s.bound_sq = sums[d1 + 6];
  s.gap_sq = sums[d1 + 7];
  s.weight = sums[d1 + 8];
  return s;
}

// Standard error of a weighted mean from its first two moments; 0 for grids.
double mean_se(const QuadratureRule& rule, double mean, double second) {
  if (rule.kind == Quadrature::grid || rule.nodes < 2) return 0.0;
  const double n = static_cast<double>(rule.nodes);
  const double var = std::max(0.0, (second - mean * mean) * n / (n - 1.0));
  return std::sqrt(var / n);
}

L2Risk l2_from(const NodeSums& s, const ContrastiveTarget& target, const QuadratureRule& rule) {
  L2Risk r;
  r.per_part = s.per_part;
  r.total = tree_sum(s.per_part);
  r.vector_form = s.vec;
  r.total_se = mean_se(rule, s.total, s.total_sq);
  r.rule = rule;
  const double lhs = r.total * target.frame.coefficient_scale();
  if (std::abs(lhs - r.vector_form) > kCrossCheckTol * std::max(1.0, std::abs(r.vector_form))) {
    throw NumericError("l2_risk: norm-identity cross-check failed (" + format_number(lhs) + " vs " +
                       format_number(r.vector_form) + ")");
  }
  return r;
}

MisclassReport misclass_from(const NodeSums& s, const QuadratureRule& rule) {
  MisclassReport m;
  m.excess = s.wrong;
  m.excess_se = mean_se(rule, s.wrong, s.wrong_sq);
  m.bound = s.bound;
  m.bound_se = mean_se(rule, s.bound, s.bound_sq);
  const double gap = s.bound - s.wrong;
  m.gap_se = mean_se(rule, gap, s.gap_sq);
  m.bound_ok = m.excess <= m.bound + 3.0 * m.gap_se + 1e-12;
  m.rule = rule;
  return m;
}

nlohmann::json rule_json(const QuadratureRule& rule) {
  return {{"kind", to_string(rule.kind)}, {"nodes", rule.nodes}, {"seed", rule.seed}};
}

}  // namespace

std::string to_string(Quadrature q) { return q == Quadrature::grid ? "grid" : "mc"; }

QuadratureRule make_quadrature(int d0, std::size_t nodes, std::uint64_t seed) {
  if (nodes < 1000) throw InvalidArgument("quadrature needs at least 1000 nodes");
  QuadratureRule rule;
  rule.seed = seed;
  if (d0 <= kMaxGridDim) {
    rule.kind = Quadrature::grid;
    const double side = std::ceil(std::pow(static_cast<double>(nodes), 1.0 / d0) - 1e-9);
    rule.side = std::min(kMaxGridSide, static_cast<int>(side));
    rule.nodes = 1;
    for (int k = 0; k < d0; ++k) rule.nodes *= static_cast<std::size_t>(rule.side);
  } else {
    rule.kind = Quadrature::mc;
    rule.nodes = nodes;
  }
  return rule;
}

L2Risk l2_risk(const SimplexMap& f, const ContrastiveTarget& target, const BaseDensity& density, std::size_t nodes,
               std::uint64_t seed) {
  const auto rule = make_quadrature(target.partition.d0(), nodes, seed);
  return l2_from(node_pass(f, target, density, rule), target, rule);
}

int plugin_classify(const SimplexMap& f, std::span<const double> x) {
  const Vector g = f.coefficients(x);
  return static_cast<int>(std::max_element(g.begin(), g.end()) - g.begin());
}

int plugin_classify_point(const SimplexFrame& frame, std::span<const double> z) {
  if (z.size() != static_cast<std::size_t>(frame.d())) {
    throw InvalidArgument("plugin_classify_point: point dimension mismatch");
  }
  double norm_sq = 0.0;
  for (double v : z) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);
  if (norm <= 1e-12) return 0;
  Vector scores(static_cast<std::size_t>(frame.d1()));
  for (int j = 0; j < frame.d1(); ++j) {
    double s = 0.0;
    const auto& v = frame.vertex(j);
    for (std::size_t k = 0; k < z.size(); ++k) s += z[k] * v[k];
    scores[static_cast<std::size_t>(j)] = s / norm;
  }
  const double best = *std::max_element(scores.begin(), scores.end());
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] >= best - 1e-12) return static_cast<int>(j);
  }
  return 0;
}

MisclassReport excess_misclassification(const SimplexMap& f, const ContrastiveTarget& target,
                                        const BaseDensity& density, std::size_t nodes, std::uint64_t seed) {
  const auto rule = make_quadrature(target.partition.d0(), nodes, seed);
  return misclass_from(node_pass(f, target, density, rule), rule);
}

RiskReport evaluate_risks(const SimplexMap& f, const ContrastiveTarget& target, const GeneratorConfig& cfg,
                          const EvalSettings& settings) {
  const auto rule = make_quadrature(target.partition.d0(), settings.nodes, settings.seed);
  const auto sums = node_pass(f, target, cfg.density, rule);
  RiskReport report;
  report.l2 = l2_from(sums, target, rule);
  report.misclass = misclass_from(sums, rule);
  report.excess_hinge = excess_risk_mc(f, target, cfg, settings.n_mc, derive_key(settings.seed, 0x68696e67ULL));
  return report;
}

nlohmann::json RiskReport::to_json() const {
  return {{"per_part_l2", l2.per_part},
          {"total_l2", l2.total},
          {"l2_vector_form", l2.vector_form},
          {"total_l2_se", l2.total_se},
          {"excess_hinge", excess_hinge.value},
          {"excess_hinge_se", excess_hinge.std_error},
          {"excess_hinge_samples", excess_hinge.samples},
          {"excess_misclass", misclass.excess},
          {"excess_misclass_se", misclass.excess_se},
          {"misclass_bound", misclass.bound},
          {"misclass_bound_ok", misclass.bound_ok},
          {"quadrature", rule_json(l2.rule)}};
}

std::string RiskReport::csv_header() {
  return "total_l2,l2_vector_form,excess_hinge,excess_hinge_se,excess_misclass,excess_misclass_se,misclass_bound,"
         "bound_ok,quadrature,nodes";
}

std::string RiskReport::csv_row() const {
  return format_number(l2.total) + "," + format_number(l2.vector_form) + "," + format_number(excess_hinge.value) +
         "," + format_number(excess_hinge.std_error) + "," + format_number(misclass.excess) + "," +
         format_number(misclass.excess_se) + "," + format_number(misclass.bound) + "," +
         (misclass.bound_ok ? "1" : "0") + "," + to_string(l2.rule.kind) + "," + std::to_string(l2.rule.nodes);
}

}  // namespace cbound
