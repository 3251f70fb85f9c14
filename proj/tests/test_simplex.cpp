#include <cmath>

#include "cbound/error.hpp"
#include "cbound/simplex.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace cbound;

namespace {

double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Solves the (d+1) x d1 system [v_j; 1] g = [z; 1] by Gaussian elimination.
Vector solve_affine(const SimplexFrame& f, const Vector& z) {
  const int n = f.d1();
  std::vector<Vector> a(static_cast<std::size_t>(n), Vector(static_cast<std::size_t>(n + 1)));
  for (int r = 0; r < f.d(); ++r) {
    for (int c = 0; c < n; ++c) a[r][c] = f.vertex(c)[r];
    a[r][n] = z[r];
  }
  for (int c = 0; c < n; ++c) a[n - 1][c] = 1.0;
  a[n - 1][n] = 1.0;
  for (int c = 0; c < n; ++c) {
    int pivot = c;
    for (int r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[pivot][c])) pivot = r;
    }
    std::swap(a[c], a[pivot]);
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const double m = a[r][c] / a[c][c];
      for (int k = c; k <= n; ++k) a[r][k] -= m * a[c][k];
    }
  }
  Vector g(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) g[c] = a[c][n] / a[c][c];
  return g;
}

}  // namespace

TEST_CASE("gram matrix of the frame is I - (1 - I)/d") {
  for (int d1 = 2; d1 <= 16; ++d1) {
    const auto f = SimplexFrame::build(d1);
    CHECK(f.d() == d1 - 1);
    Vector sum(static_cast<std::size_t>(f.d()), 0.0);
    for (int i = 0; i < d1; ++i) {
      REQUIRE(f.vertex(i).size() == static_cast<std::size_t>(f.d()));
      for (int k = 0; k < f.d(); ++k) sum[k] += f.vertex(i)[k];
      for (int j = 0; j < d1; ++j) {
        const double expected = i == j ? 1.0 : -1.0 / f.d();
        CHECK(std::abs(dot(f.vertex(i), f.vertex(j)) - expected) <= 1e-12);
      }
    }
    for (double s : sum) CHECK(std::abs(s) <= 1e-12);
    CHECK(check_frame(f).ok());
  }
}

TEST_CASE("diameter and facet distance match independent computations") {
  for (int d1 = 2; d1 <= 16; ++d1) {
    const auto f = SimplexFrame::build(d1);
    CHECK(std::abs(f.diameter_sq() - squared_distance(f.vertex(0), f.vertex(d1 - 1))) <= 1e-12);
    CHECK(std::abs(f.diameter() * f.diameter() - f.diameter_sq()) <= 1e-12);
    CHECK(std::abs(f.coefficient_scale() - static_cast<double>(d1) / (d1 - 1)) <= 1e-15);
  }
  // d1 = 3: minimize the distance from v_0 over the opposite edge on a fine grid.
  const auto f = SimplexFrame::build(3);
  double best = INFINITY;
  for (int k = 0; k <= 100000; ++k) {
    const double t = k / 100000.0;
    Vector p{(1 - t) * f.vertex(1)[0] + t * f.vertex(2)[0], (1 - t) * f.vertex(1)[1] + t * f.vertex(2)[1]};
    best = std::min(best, std::sqrt(squared_distance(f.vertex(0), p)));
  }
  CHECK(std::abs(f.dproj() - best) <= 1e-9);
  CHECK(std::abs(SimplexFrame::build(2).dproj() - 2.0) <= 1e-15);
}

TEST_CASE("barycentric coordinates agree with a direct linear solve") {
  CounterRng rng(5, 0);
  for (int d1 : {2, 3, 5, 9}) {
    const auto f = SimplexFrame::build(d1);
    for (int trial = 0; trial < 20; ++trial) {
      Vector z(static_cast<std::size_t>(f.d()));
      for (auto& v : z) v = rng.uniform(-0.5, 0.5);
      const auto g = f.barycentric(z);
      const auto oracle = solve_affine(f, z);
      for (int i = 0; i < d1; ++i) CHECK(std::abs(g[i] - oracle[i]) <= 1e-10);
    }
  }
}

TEST_CASE("embedding and barycentric coordinates are inverse on the simplex") {
  CounterRng rng(6, 0);
  const auto f = SimplexFrame::build(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = fixtures::random_probability(rng, 6);
    const auto back = f.barycentric(f.embed(g));
    for (int i = 0; i < 6; ++i) CHECK(std::abs(back[i] - g[i]) <= 1e-12);
  }
}

TEST_CASE("norm identity holds for random coefficient pairs") {
  CounterRng rng(7, 0);
  for (int d1 : {2, 3, 4, 8, 16}) {
    const auto f = SimplexFrame::build(d1);
    for (int trial = 0; trial < 200; ++trial) {
      const auto g = fixtures::random_probability(rng, d1);
      const auto gp = fixtures::random_probability(rng, d1);
      double coef = 0.0;
      for (int i = 0; i < d1; ++i) coef += (g[i] - gp[i]) * (g[i] - gp[i]);
      CHECK(std::abs(squared_distance(f.embed(g), f.embed(gp)) - static_cast<double>(d1) / (d1 - 1) * coef) <=
            1e-10);
    }
  }
}

TEST_CASE("a perturbed vertex set fails the frame check") {
  auto vertices = SimplexFrame::build(4).vertices();
  vertices[2][1] += 1e-9;
  CHECK_FALSE(check_frame(SimplexFrame(vertices)).ok());
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(SimplexFrame::build(1), InvalidArgument);
  const auto f = SimplexFrame::build(3);
  CHECK_THROWS_AS(f.embed(Vector{0.5, 0.5}), InvalidArgument);
  CHECK_THROWS_AS(f.embed(Vector{0.7, 0.7, -0.4}), InvalidArgument);
}
