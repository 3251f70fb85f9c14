#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cbound {

// Mutations injected into the self-test to confirm the suites can fail.
struct SelftestHooks {
  bool perturb_vertex = false;   // moves vertex 0 of every frame by 1e-6
  bool flip_hinge_sign = false;  // analytic gradient computed with flipped labels
};

struct SuiteResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct SelftestReport {
  std::vector<SuiteResult> suites;

  bool pass() const noexcept;
  std::string table() const;
};

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t configurations = 0;
  std::size_t redraws = 0;  // configurations rejected for sitting near a kink
};

/// Central finite differences (h = 1e-6) of the batch hinge risk against
/// loss_gradient for `configurations` random nets with `depth` weight layers
/// and random batches. Configurations with a ReLU pre-activation or a logit
/// within 1e-3 of a kink are redrawn. Relative error is
/// ||analytic - fd|| / max(||analytic||, ||fd||).
GradientCheck gradient_fd_check(int depth, int configurations, std::uint64_t seed, bool flip_hinge_sign = false);

SelftestReport run_selftest(const SelftestHooks& hooks = {});

}  // namespace cbound
