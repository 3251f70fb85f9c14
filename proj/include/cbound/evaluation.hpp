#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "cbound/contrastive.hpp"
#include "cbound/pairgen.hpp"
#include "cbound/partition.hpp"
#include "cbound/simplex_map.hpp"
#include "json.hpp"

namespace cbound {

enum class Quadrature { grid, mc };

std::string to_string(Quadrature q);

// Tensor midpoint grid for d0 <= 3 (side = min(256, ceil(nodes^{1/d0}))),
// Monte Carlo draws from the density otherwise.
struct QuadratureRule {
  Quadrature kind = Quadrature::grid;
  std::size_t nodes = 0;
  int side = 0;  // grid only
  std::uint64_t seed = 0;
};

QuadratureRule make_quadrature(int d0, std::size_t nodes, std::uint64_t seed);

struct L2Risk {
  Vector per_part;           // int (g_i - 1_{K_i})^2 dP_X
  double total = 0.0;        // sum of per_part
  double vector_form = 0.0;  // int ||f - f*||^2 dP_X from embedded points
  double total_se = 0.0;     // 0 for the grid rule
  QuadratureRule rule;
};

/// L2 risk sum_i ||g_i - 1_{K_i}||^2 in L2(P_X). Throws NumericError when
/// total * (d1/d) and vector_form disagree by more than 1e-8 relative.
/// Requires nodes >= 1000.
L2Risk l2_risk(const SimplexMap& f, const ContrastiveTarget& target, const BaseDensity& density, std::size_t nodes,
               std::uint64_t seed);

/// Plug-in label (0-based): minimal j maximizing <f(x), v_j>, computed as the
/// minimal argmax of the coefficients since <f, v_j> = (d1 g_j - 1) / d. The
/// zero vector (all g_j equal) gets label 0.
int plugin_classify(const SimplexMap& f, std::span<const double> x);

/// Same rule for a raw point z of R^d. Inner products within 1e-12 of the
/// maximum count as ties; ||z|| <= 1e-12 is treated as the zero vector.
int plugin_classify_point(const SimplexFrame& frame, std::span<const double> z);

struct MisclassReport {
  double excess = 0.0;  // P_X(plug-in label != part); the Bayes risk is 0
  double excess_se = 0.0;
  double bound = 0.0;   // 4 D^-2 E ||f - f*||^2
  double bound_se = 0.0;
  double gap_se = 0.0;  // SE of the paired difference bound - excess
  bool bound_ok = false;
  QuadratureRule rule;
};

/// Excess misclassification of the plug-in classifier and the check
/// excess <= 4 D^-2 E||f - f*||^2 + 3 SE on the same nodes.
MisclassReport excess_misclassification(const SimplexMap& f, const ContrastiveTarget& target,
                                        const BaseDensity& density, std::size_t nodes, std::uint64_t seed);

struct EvalSettings {
  std::size_t nodes = 65536;
  std::size_t n_mc = 20000;
  std::uint64_t seed = 1;
};

struct RiskReport {
  L2Risk l2;
  McEstimate excess_hinge;
  MisclassReport misclass;

  nlohmann::json to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

RiskReport evaluate_risks(const SimplexMap& f, const ContrastiveTarget& target, const GeneratorConfig& cfg,
                          const EvalSettings& settings);

}  // namespace cbound
