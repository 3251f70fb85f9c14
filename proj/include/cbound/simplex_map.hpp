#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>

#include "cbound/simplex.hpp"

namespace cbound {

/// A map f: [0,1]^{d0} -> simplex, carried by its coefficient functions
/// g_1..g_{d1} (f = sum_i g_i v_i). Cheap to copy.
class SimplexMap {
 public:
  using Fn = std::function<void(std::span<const double>, std::span<double>)>;

  SimplexMap(int d1, Fn fn, std::string name = "map")
      : d1_(d1), fn_(std::move(fn)), name_(std::move(name)) {}

  int d1() const noexcept { return d1_; }
  const std::string& name() const noexcept { return name_; }

  void coefficients(std::span<const double> x, std::span<double> out) const { fn_(x, out); }
  Vector coefficients(std::span<const double> x) const {
    Vector g(static_cast<std::size_t>(d1_));
    fn_(x, g);
    return g;
  }

 private:
  int d1_;
  Fn fn_;
  std::string name_;
};

// Constant map to the centre of the simplex (uniform coefficients).
SimplexMap centroid_map(int d1);

// Pointwise (1 - weight) a + weight b; stays inside the simplex.
SimplexMap mixture_map(SimplexMap a, SimplexMap b, double weight);

}  // namespace cbound
