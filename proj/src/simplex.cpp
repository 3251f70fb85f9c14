#include "cbound/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cbound/error.hpp"

namespace cbound {

namespace {

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Orthonormal basis of {x in R^n : sum x = 0} by modified Gram-Schmidt on
// the seeds e_k - e_{k+1}.
std::vector<Vector> sum_zero_basis(int n) {
  std::vector<Vector> basis;
  for (int k = 0; k + 1 < n; ++k) {
    Vector v(static_cast<std::size_t>(n), 0.0);
    v[static_cast<std::size_t>(k)] = 1.0;
    v[static_cast<std::size_t>(k + 1)] = -1.0;
    for (const auto& b : basis) {
      const double proj = dot(v, b);
      for (int j = 0; j < n; ++j) v[static_cast<std::size_t>(j)] -= proj * b[static_cast<std::size_t>(j)];
    }
    const double norm = std::sqrt(dot(v, v));
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace

SimplexFrame SimplexFrame::build(int d1) {
  if (d1 < 2) throw InvalidArgument("simplex frame needs d1 >= 2, got " + std::to_string(d1));
  const auto basis = sum_zero_basis(d1);
  const double inv = 1.0 / static_cast<double>(d1);
  std::vector<Vector> vertices;
  vertices.reserve(static_cast<std::size_t>(d1));
  for (int i = 0; i < d1; ++i) {
    Vector centred(static_cast<std::size_t>(d1), -inv);
    centred[static_cast<std::size_t>(i)] += 1.0;
    Vector v(basis.size());
    for (std::size_t k = 0; k < basis.size(); ++k) v[k] = dot(centred, basis[k]);
    const double norm = std::sqrt(dot(v, v));
    for (auto& x : v) x /= norm;
    vertices.push_back(std::move(v));
  }
  return SimplexFrame(std::move(vertices));
}

SimplexFrame::SimplexFrame(std::vector<Vector> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 2) throw InvalidArgument("simplex frame needs at least 2 vertices");
  const std::size_t dim = vertices_.size() - 1;
  for (const auto& v : vertices_) {
    if (v.size() != dim) throw InvalidArgument("simplex vertices must live in R^(d1-1)");
  }
  const double d = static_cast<double>(dim);
  scale_ = static_cast<double>(vertices_.size()) / d;
  diameter_sq_ = scale_ * 2.0;
  diameter_ = std::sqrt(diameter_sq_);
  dproj_ = (d + 1.0) / d;
}

Vector SimplexFrame::barycentric(std::span<const double> z) const {
  if (z.size() != static_cast<std::size_t>(d())) {
    throw InvalidArgument("barycentric: expected a point of dimension " + std::to_string(d()));
  }
  const double dd = static_cast<double>(d());
  const double ratio = dd / static_cast<double>(d1());
  Vector g(static_cast<std::size_t>(d1()));
  for (int j = 0; j < d1(); ++j) g[static_cast<std::size_t>(j)] = ratio * (dot(z, vertex(j)) + 1.0 / dd);
  return g;
}

Vector SimplexFrame::embed(std::span<const double> g) const {
  if (g.size() != static_cast<std::size_t>(d1())) {
    throw InvalidArgument("embed: expected " + std::to_string(d1()) + " coefficients");
  }
  constexpr double tol = 1e-9;
  double total = 0.0;
  for (double gi : g) {
    if (!(gi >= -tol && gi <= 1.0 + tol)) throw InvalidArgument("embed: coefficient outside [0,1]");
    total += gi;
  }
  if (std::abs(total - 1.0) > tol) throw InvalidArgument("embed: coefficients do not sum to 1");
  Vector z(static_cast<std::size_t>(d()));
  embed_into(g, z);
  return z;
}

void SimplexFrame::embed_into(std::span<const double> g, std::span<double> out) const noexcept {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const auto& v = vertices_[i];
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += g[i] * v[k];
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

FrameCheck check_frame(const SimplexFrame& frame) {
  FrameCheck c;
  const int n = frame.d1();
  const std::size_t dim = static_cast<std::size_t>(frame.d());
  Vector sum(dim, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto& v = frame.vertex(i);
    for (std::size_t k = 0; k < dim; ++k) sum[k] += v[k];
    c.norm_error = std::max(c.norm_error, std::abs(std::sqrt(dot(v, v)) - 1.0));
    for (int j = i + 1; j < n; ++j) {
      const auto& w = frame.vertex(j);
      c.inner_error = std::max(c.inner_error, std::abs(dot(v, w) + 1.0 / static_cast<double>(frame.d())));
      c.distance_error =
          std::max(c.distance_error, std::abs(std::sqrt(squared_distance(v, w)) - frame.diameter()));
    }
  }
  for (double s : sum) c.sum_error = std::max(c.sum_error, std::abs(s));
  // Vertex-to-facet distance: the facet opposite v_1 lies in the plane
  // <z, v_1> = -1/d at unit normal v_1, and its centroid is the foot.
  Vector foot(dim, 0.0);
  for (int i = 1; i < n; ++i) {
    for (std::size_t k = 0; k < dim; ++k) foot[k] += frame.vertex(i)[k] / static_cast<double>(n - 1);
  }
  const double measured = std::sqrt(squared_distance(frame.vertex(0), foot));
  c.dproj_consistent = std::abs(measured - frame.dproj()) <= 1e-12 && frame.dproj() > 0.0 &&
                       frame.dproj() <= frame.diameter() + 1e-12;
  return c;
}

}  // namespace cbound
