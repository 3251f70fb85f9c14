#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cbound/pairgen.hpp"
#include "cbound/simplex.hpp"
#include "cbound/simplex_map.hpp"
#include "json.hpp"

namespace cbound {

/// Dense ReLU MLP parameters. weights[l] is row-major with shape
/// layer_dims[l+1] x layer_dims[l].
struct MlpParams {
  std::vector<int> layer_dims;  // d0, w_1, .., w_{L-1}, d1
  std::vector<Vector> weights;
  std::vector<Vector> biases;
  double J = 10.0;  // entrywise magnitude bound
  double M = 10.0;  // logit clamp

  static MlpParams zeros(std::vector<int> layer_dims, double J, double M);

  int depth() const noexcept { return static_cast<int>(layer_dims.size()) - 1; }
  std::size_t parameter_count() const noexcept;
  void validate() const;
};

struct MlpGradient {
  std::vector<Vector> weights;
  std::vector<Vector> biases;
  double loss = 0.0;  // batch mean hinge loss at the evaluation point

  static MlpGradient zeros_like(const MlpParams& params);
  std::vector<double> flatten() const;
};

struct ForwardResult {
  Vector logits;  // clamped to [-M, M]
  Vector probs;
  Vector point;   // embedded in the simplex
};

/// f(x) = sum_i softmax_i(clamp(g(x))) v_i for a ReLU network g.
class SimplexNet {
 public:
  SimplexNet(MlpParams params, SimplexFrame frame);

  static SimplexNet zeros(std::vector<int> layer_dims, double J, double M);
  // Weights uniform in +-min(J, sqrt(6 / fan_in)), zero biases.
  static SimplexNet he_uniform(std::vector<int> layer_dims, double J, double M, std::uint64_t seed);

  int d0() const noexcept { return params_.layer_dims.front(); }
  int d1() const noexcept { return params_.layer_dims.back(); }
  const MlpParams& params() const noexcept { return params_; }
  MlpParams& mutable_params() noexcept { return params_; }
  const SimplexFrame& frame() const noexcept { return frame_; }

  ForwardResult forward(std::span<const double> x) const;
  void coefficients(std::span<const double> x, std::span<double> out) const;

  // Snapshot of this net as a SimplexMap.
  SimplexMap as_map() const;

  nlohmann::json to_checkpoint() const;
  static SimplexNet from_checkpoint(const nlohmann::json& doc);

  bool same_parameters(const SimplexNet& other) const noexcept;

 private:
  MlpParams params_;
  SimplexFrame frame_;
};

/// Subgradient of the batch-mean contrastive hinge risk. The hinge kink and
/// ReLU kink take subgradient 0; the logit clamp passes gradient only on
/// [-M, M].
MlpGradient loss_gradient(const SimplexNet& net, std::span<const PairwiseSample> batch);

// Reshaping of the training objective used by optimizer warm-up phases. The
// defaults give the contrastive hinge loss itself.
struct LossShape {
  double positive_weight = 1.0;
  double negative_weight = 1.0;
  // When positive, the y = -1 term becomes max(0, 2 - 2 rho / margin).
  double negative_margin = 0.0;
};

// Gradient over samples[indices[k]]; overwrites `out`, reusing its storage.
void loss_gradient_into(const SimplexNet& net, std::span<const PairwiseSample> samples,
                        std::span<const std::size_t> indices, MlpGradient& out, const LossShape& shape = {});

/// params -= lr * gradient, then clip entrywise to [-J, J]. Throws
/// NumericError on a non-finite gradient or shape mismatch.
void apply_update(SimplexNet& net, const MlpGradient& gradient, double learning_rate);

// Entrywise clip to [-J, J]; idempotent.
void clip_parameters(MlpParams& params) noexcept;

struct ParamStats {
  int depth = 0;
  double max_magnitude = 0.0;
  std::size_t nonzero = 0;  // entries with |w| > 1e-12
  std::size_t total = 0;
  double J = 0.0;
  double M = 0.0;
};

ParamStats param_stats(const SimplexNet& net) noexcept;

// Net whose logit i is the original logit perm[i].
SimplexNet permute_head(const SimplexNet& net, std::span<const int> perm);

}  // namespace cbound
