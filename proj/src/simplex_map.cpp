#include "cbound/simplex_map.hpp"

#include <algorithm>

#include "cbound/error.hpp"

namespace cbound {

SimplexMap centroid_map(int d1) {
  const double value = 1.0 / static_cast<double>(d1);
  return SimplexMap(
      d1, [value](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), value); },
      "centroid");
}

SimplexMap mixture_map(SimplexMap a, SimplexMap b, double weight) {
  if (a.d1() != b.d1()) throw InvalidArgument("mixture_map: coefficient counts differ");
  if (!(weight >= 0.0 && weight <= 1.0)) throw InvalidArgument("mixture_map: weight outside [0,1]");
  const int d1 = a.d1();
  return SimplexMap(
      d1,
      [a = std::move(a), b = std::move(b), weight, d1](std::span<const double> x, std::span<double> out) {
        Vector gb(static_cast<std::size_t>(d1));
        a.coefficients(x, out);
        b.coefficients(x, gb);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - weight) * out[i] + weight * gb[i];
      },
      "mixture");
}

}  // namespace cbound
