#include <cmath>
#include <numbers>

#include "cbound/error.hpp"
#include "cbound/partition.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace cbound;

TEST_CASE("sinusoid boundaries classify hand-computed points") {
  const auto p = fixtures::sinusoid();
  // boundary 1 thresholds x_2 at 0.5 + 0.1 sin(2 pi x_1), boundary 2 thresholds x_1 at 0.5 + 0.1 sin(2 pi x_2 + 1)
  const double h1 = 0.5 + 0.1 * std::sin(2.0 * std::numbers::pi * 0.25);
  CHECK(p.boundaries()[0].evaluate(std::vector<double>{0.25, 0.9}) == doctest::Approx(h1).epsilon(1e-15));
  const double h2 = 0.5 + 0.1 * std::sin(2.0 * std::numbers::pi * 0.61 + 1.0);
  CHECK(p.boundaries()[1].evaluate(std::vector<double>{0.0, 0.61}) == doctest::Approx(h2).epsilon(1e-15));
  CHECK(p.classify(std::vector<double>{0.25, 0.61}) == 1);   // (+1, -1)
  CHECK(p.classify(std::vector<double>{0.9, 0.9}) == 0);     // (+1, +1)
  CHECK(p.classify(std::vector<double>{0.9, 0.1}) == 2);     // (-1, +1)
  CHECK(p.classify(std::vector<double>{0.1, 0.1}) == 2);     // (-1, -1)
  CHECK(p.indicator(2, std::vector<double>{0.1, 0.1}) == 1);
  CHECK(p.indicator(0, std::vector<double>{0.1, 0.1}) == 0);
}

TEST_CASE("points on a boundary take the +1 side") {
  const auto p = fixtures::halves();
  CHECK(p.classify(std::vector<double>{0.5, 0.3}) == 0);
  CHECK(p.classify(std::vector<double>{std::nextafter(0.5, 0.0), 0.3}) == 1);
}

TEST_CASE("json round trip preserves the partition") {
  const auto p = fixtures::sinusoid();
  const auto q = SmoothPartition::from_json(p.to_json());
  CHECK(q.to_json() == p.to_json());
  CounterRng rng(3, 0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> x{rng.uniform(), rng.uniform()};
    CHECK(p.classify(x) == q.classify(x));
  }
}

TEST_CASE("Monte Carlo part masses agree with grid counting") {
  for (const auto& p : {fixtures::halves(), fixtures::sinusoid()}) {
    const auto mc = part_probabilities(p, BaseDensity::uniform(), 200000, 17);
    const auto grid = fixtures::grid_part_masses(p, 1000);
    double total = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(std::abs(mc.probs[i] - grid[i]) <= 4.0 * mc.std_errors[i] + 2e-3);
      total += mc.probs[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("uniform density samples the cube") {
  CounterRng rng(9, 0);
  double x[3];
  double mean = 0.0;
  for (int i = 0; i < 30000; ++i) {
    BaseDensity::uniform().sample(rng, std::span<double>(x, 3));
    for (double v : x) {
      CHECK(v >= 0.0);
      CHECK(v < 1.0);
    }
    mean += x[1];
  }
  CHECK(std::abs(mean / 30000 - 0.5) <= 3.0 * std::sqrt(1.0 / 12.0 / 30000));
  CHECK(BaseDensity::uniform().density(std::vector<double>{0.2, 0.3}) == 1.0);
}

TEST_CASE("Lipschitz bound dominates finite-difference slopes") {
  const auto p = fixtures::sinusoid();
  for (const auto& b : p.boundaries()) {
    const double lip = b.lipschitz_bound(2);
    CHECK(lip == doctest::Approx(0.2 * std::numbers::pi).epsilon(1e-12));
    const int free_axis = b.axis == 0 ? 1 : 0;
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      std::vector<double> a(2, 0.5), c(2, 0.5);
      a[free_axis] = k / 1000.0;
      c[free_axis] = (k + 1) / 1000.0;
      worst = std::max(worst, std::abs(b.evaluate(c) - b.evaluate(a)) * 1000.0);
    }
    CHECK(worst <= lip + 1e-9);
    CHECK(worst >= 0.99 * lip);
  }
}

TEST_CASE("boundary proximity of the halves partition") {
  const double f = boundary_proximity_fraction(fixtures::halves(), BaseDensity::uniform(), 0.1, 40000, 5);
  CHECK(std::abs(f - 0.2) <= 3.0 * std::sqrt(0.2 * 0.8 / 40000));
}

TEST_CASE("malformed partitions are rejected") {
  auto doc = fixtures::sinusoid_json();
  auto missing = doc;
  missing["pattern_map"].erase(3);
  CHECK_THROWS_AS(SmoothPartition::from_json(missing), InvalidArgument);
  auto duplicate = doc;
  duplicate["pattern_map"][3]["pattern"] = {1, 1};
  CHECK_THROWS_AS(SmoothPartition::from_json(duplicate), InvalidArgument);
  auto kind = doc;
  kind["boundaries"][0]["kind"] = "spline";
  CHECK_THROWS_AS(SmoothPartition::from_json(kind), InvalidArgument);
  auto axis = doc;
  axis["boundaries"][0]["axis"] = 3;
  CHECK_THROWS_AS(SmoothPartition::from_json(axis), InvalidArgument);
  auto unreached = doc;
  unreached["d1"] = 4;
  CHECK_THROWS_AS(SmoothPartition::from_json(unreached), InvalidArgument);
  CHECK_THROWS_AS(part_probabilities(fixtures::halves(), BaseDensity::uniform(), 10, 1), InvalidArgument);
}

TEST_CASE("a part with no mass is reported as degenerate") {
  auto doc = fixtures::halves_json();
  doc["boundaries"][0]["params"] = {2.0};
  CHECK_THROWS_AS(part_probabilities(SmoothPartition::from_json(doc), BaseDensity::uniform(), 5000, 1),
                  DegeneratePartition);
}
