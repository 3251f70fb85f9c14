#include "cbound/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "cbound/contrastive.hpp"
#include "cbound/erm.hpp"
#include "cbound/evaluation.hpp"
#include "cbound/io.hpp"
#include "cbound/pairgen.hpp"
#include "cbound/rng.hpp"
#include "cbound/simplex.hpp"
#include "cbound/simplexnet.hpp"

namespace cbound {

namespace {

constexpr double kKinkMargin = 1e-3;

SmoothPartition halves_partition() {
  return SmoothPartition::from_json(nlohmann::json::parse(R"({"d0":2,"d1":2,
    "boundaries":[{"kind":"constant","params":[0.5],"axis":1}],
    "pattern_map":[{"pattern":[1],"part":1},{"pattern":[-1],"part":2}]})"));
}

SmoothPartition sinusoid_partition() {
  return SmoothPartition::from_json(nlohmann::json::parse(R"({"d0":2,"d1":3,
    "boundaries":[{"kind":"sinusoid","params":[0.5,0.1,1.0,0.0],"axis":2},
                  {"kind":"sinusoid","params":[0.5,0.1,1.0,1.0],"axis":1}],
    "pattern_map":[{"pattern":[1,1],"part":1},{"pattern":[1,-1],"part":2},
                   {"pattern":[-1,1],"part":3},{"pattern":[-1,-1],"part":3}]})"));
}

Vector random_probability(CounterRng& rng, int d1) {
  Vector g(static_cast<std::size_t>(d1));
  double total = 0.0;
  for (auto& v : g) {
    v = -std::log(1.0 - rng.uniform());
    total += v;
  }
  for (auto& v : g) v /= total;
  return g;
}

// Smallest distance of any hidden pre-activation to 0 or any raw logit to +-M.
double kink_distance(const MlpParams& p, std::span<const double> x) {
  Vector a(x.begin(), x.end());
  double closest = INFINITY;
  for (int l = 0; l < p.depth(); ++l) {
    const int in = p.layer_dims[static_cast<std::size_t>(l)];
    const int out = p.layer_dims[static_cast<std::size_t>(l) + 1];
    const auto& w = p.weights[static_cast<std::size_t>(l)];
    Vector z(static_cast<std::size_t>(out));
    for (int i = 0; i < out; ++i) {
      double s = p.biases[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)];
      for (int j = 0; j < in; ++j) s += w[static_cast<std::size_t>(i * in + j)] * a[static_cast<std::size_t>(j)];
      z[static_cast<std::size_t>(i)] = s;
    }
    const bool last = l + 1 == p.depth();
    for (auto& v : z) {
      closest = std::min(closest, last ? std::abs(std::abs(v) - p.M) : std::abs(v));
      if (!last) v = std::max(0.0, v);
    }
    a = std::move(z);
  }
  return closest;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

SuiteResult timed(const std::string& name, const std::function<std::string(bool&)>& body) {
  SuiteResult r;
  r.name = name;
  const auto start = std::chrono::steady_clock::now();
  try {
    bool pass = true;
    r.detail = body(pass);
    r.pass = pass;
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

std::string simplex_suite(const SelftestHooks& hooks, bool& pass) {
  double worst = 0.0;
  for (int d1 = 2; d1 <= 16; ++d1) {
    auto vertices = SimplexFrame::build(d1).vertices();
    if (hooks.perturb_vertex) vertices[0][0] += 1e-6;
    const SimplexFrame frame(vertices);
    const auto c = check_frame(frame);
    worst = std::max({worst, c.sum_error, c.norm_error, c.inner_error, c.distance_error});
    if (!c.ok(1e-12)) pass = false;
  }
  auto vertices = SimplexFrame::build(4).vertices();
  if (hooks.perturb_vertex) vertices[0][0] += 1e-6;
  const SimplexFrame frame(vertices);
  CounterRng rng(0x73696d70ULL, 0);
  double norm_gap = 0.0;
  Vector a(static_cast<std::size_t>(frame.d())), b(a.size());
  for (int k = 0; k < 1000; ++k) {
    const auto g = random_probability(rng, frame.d1());
    const auto gp = random_probability(rng, frame.d1());
    frame.embed_into(g, a);
    frame.embed_into(gp, b);
    double coef = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) coef += (g[i] - gp[i]) * (g[i] - gp[i]);
    norm_gap = std::max(norm_gap, std::abs(squared_distance(a, b) - frame.coefficient_scale() * coef));
  }
  if (norm_gap > 1e-10) pass = false;
  return "max identity error " + format_number(worst) + ", norm identity gap " + format_number(norm_gap);
}

std::string generator_suite(bool& pass) {
  const auto cfg = GeneratorConfig::estimated(halves_partition(), 0.9, 0x67656e31ULL, 20000);
  const auto ds = generate_dataset(cfg, 20000);
  const auto eta = empirical_eta(ds, cfg.partition);
  std::ostringstream detail;
  for (std::size_t i = 0; i < eta.diagonal.size(); ++i) {
    const auto& e = eta.diagonal[i];
    const double expected = analytic_eta(cfg, static_cast<int>(i));
    if (!e.estimate || std::abs(*e.estimate - expected) > 3.0 * e.std_error) pass = false;
    detail << "eta_" << i + 1 << " " << (e.estimate ? format_number(*e.estimate) : "none") << " vs "
           << format_number(expected) << "; ";
  }
  if (eta.off_diagonal_positives != 0) pass = false;
  const ContrastiveTarget target(cfg.partition, SimplexFrame::build(2));
  const auto sign = bayes_sign_check(target, cfg, 10000, 0x62617973ULL);
  if (!sign.pass()) pass = false;
  detail << "off-diagonal positives " << eta.off_diagonal_positives << ", sign violations " << sign.violations;
  return detail.str();
}

std::string gradient_suite(const SelftestHooks& hooks, bool& pass) {
  std::ostringstream detail;
  for (int depth = 2; depth <= 4; ++depth) {
    const auto check = gradient_fd_check(depth, 5, 0x67726164ULL + static_cast<std::uint64_t>(depth),
                                         hooks.flip_hinge_sign);
    if (!(check.max_relative_error < 1e-4)) pass = false;
    detail << "L=" << depth << " " << format_number(check.max_relative_error) << (depth < 4 ? "; " : "");
  }
  return detail.str();
}

std::string bounds_suite(bool& pass) {
  const auto cfg = GeneratorConfig::estimated(sinusoid_partition(), 0.9, 0x626e6473ULL, 50000);
  const ContrastiveTarget target(cfg.partition, SimplexFrame::build(3));
  std::vector<SimplexMap> maps{target_map(target), centroid_map(3),
                               mixture_map(target_map(target), centroid_map(3), 0.3)};
  for (std::uint64_t s = 0; s < 3; ++s) maps.push_back(SimplexNet::he_uniform({2, 8, 8, 3}, 10.0, 10.0, s).as_map());
  std::size_t bound_failures = 0;
  std::size_t minimizer_failures = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto m = excess_misclassification(maps[i], target, cfg.density, 4096, 11 + i);
    if (!m.bound_ok) ++bound_failures;
    const auto e = excess_risk_mc(maps[i], target, cfg, 20000, 17 + i);
    if (e.value < -3.0 * e.std_error) ++minimizer_failures;
  }
  const auto centroid = excess_risk_mc(centroid_map(3), target, cfg, 20000, 29);
  const bool centroid_ok = centroid.value > 3.0 * centroid.std_error;
  if (bound_failures > 0 || minimizer_failures > 0 || !centroid_ok) pass = false;
  return "misclassification bound failures " + std::to_string(bound_failures) + ", negative excess " +
         std::to_string(minimizer_failures) + ", centroid excess " + format_number(centroid.value);
}

std::string localization_suite(bool& pass) {
  const ContrastiveTarget target(halves_partition(), SimplexFrame::build(2));
  const LocalizationSpec spec{0.5 * target.frame.dproj(), 0.01, 20000, 0x6c6f6361ULL};
  const auto exact = check_localized(target_map(target), target, spec, BaseDensity::uniform());
  const auto permuted = check_localized(permuted_target_map(target), target, spec, BaseDensity::uniform());
  if (!exact.is_member || exact.measured_prob != 1.0 || permuted.is_member) pass = false;
  return "f* prob " + format_number(exact.measured_prob) + ", permuted prob " + format_number(permuted.measured_prob);
}

}  // namespace

bool SelftestReport::pass() const noexcept {
  return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.pass; });
}

std::string SelftestReport::table() const {
  std::ostringstream out;
  for (const auto& s : suites) {
    char seconds[32];
    std::snprintf(seconds, sizeof(seconds), "%7.2fs", s.seconds);
    out << (s.pass ? "PASS " : "FAIL ") << s.name << std::string(14 - std::min<std::size_t>(13, s.name.size()), ' ')
        << seconds << "  " << s.detail << "\n";
  }
  out << (pass() ? "all suites passed" : "self-test FAILED") << "\n";
  return out.str();
}

GradientCheck gradient_fd_check(int depth, int configurations, std::uint64_t seed, bool flip_hinge_sign) {
  if (depth < 1 || configurations < 1) throw InvalidArgument("gradient check needs depth >= 1 and configurations >= 1");
  GradientCheck result;
  constexpr double h = 1e-6;
  std::vector<int> dims{2};
  for (int l = 1; l < depth; ++l) dims.push_back(5);
  dims.push_back(3);
  std::uint64_t draw = 0;
  while (result.configurations < static_cast<std::size_t>(configurations)) {
    CounterRng rng(seed, draw);
    auto net = SimplexNet::he_uniform(dims, 10.0, 3.0, derive_key(seed, draw));
    ++draw;
    for (auto& b : net.mutable_params().biases) {
      for (auto& v : b) v = rng.uniform(-0.2, 0.2);
    }
    std::vector<PairwiseSample> batch(8);
    double closest = INFINITY;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      batch[k].x = {rng.uniform(), rng.uniform()};
      batch[k].xp = {rng.uniform(), rng.uniform()};
      batch[k].y = k % 2 == 0 ? 1 : -1;
      closest = std::min({closest, kink_distance(net.params(), batch[k].x), kink_distance(net.params(), batch[k].xp)});
    }
    if (closest < kKinkMargin) {
      ++result.redraws;
      if (result.redraws > 1000) throw NumericError("gradient check could not find an interior configuration");
      continue;
    }
    auto labelled = batch;
    if (flip_hinge_sign) {
      for (auto& s : labelled) s.y = -s.y;
    }
    const auto analytic = loss_gradient(net, labelled).flatten();
    std::vector<double> fd;
    fd.reserve(analytic.size());
    auto probe = net;
    auto& params = probe.mutable_params();
    const auto perturb = [&](double& entry) {
      const double saved = entry;
      entry = saved + h;
      const double up = loss_gradient(probe, batch).loss;
      entry = saved - h;
      const double down = loss_gradient(probe, batch).loss;
      entry = saved;
      fd.push_back((up - down) / (2.0 * h));
    };
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      for (auto& w : params.weights[l]) perturb(w);
      for (auto& b : params.biases[l]) perturb(b);
    }
    if (fd.size() != analytic.size()) throw NumericError("gradient layout mismatch");
    std::vector<double> diff(fd.size());
    for (std::size_t i = 0; i < fd.size(); ++i) diff[i] = analytic[i] - fd[i];
    const double scale = std::max({norm(analytic), norm(fd), 1e-12});
    result.max_relative_error = std::max(result.max_relative_error, norm(diff) / scale);
    ++result.configurations;
  }
  return result;
}

SelftestReport run_selftest(const SelftestHooks& hooks) {
  SelftestReport report;
  report.suites.push_back(timed("simplex", [&](bool& pass) { return simplex_suite(hooks, pass); }));
  report.suites.push_back(timed("generator", [&](bool& pass) { return generator_suite(pass); }));
  report.suites.push_back(timed("gradient", [&](bool& pass) { return gradient_suite(hooks, pass); }));
  report.suites.push_back(timed("bounds", [&](bool& pass) { return bounds_suite(pass); }));
  report.suites.push_back(timed("localization", [&](bool& pass) { return localization_suite(pass); }));
  return report;
}

}  // namespace cbound
