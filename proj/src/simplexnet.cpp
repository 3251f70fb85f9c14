#include "cbound/simplexnet.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "cbound/contrastive.hpp"
#include "cbound/error.hpp"
#include "cbound/rng.hpp"

namespace cbound {

namespace {

// Activations of one forward pass, kept for backprop.
struct Trace {
  std::vector<Vector> pre;  // pre-activations per layer (last = raw logits)
  std::vector<Vector> act;  // act[0] = input, act[l] = relu(pre[l-1])
  Vector probs;
};

void forward_trace(const MlpParams& p, std::span<const double> x, Trace& t) {
  const int depth = p.depth();
  t.pre.resize(static_cast<std::size_t>(depth));
  t.act.resize(static_cast<std::size_t>(depth));
  t.act[0].assign(x.begin(), x.end());
  for (int l = 0; l < depth; ++l) {
    const auto rows = static_cast<std::size_t>(p.layer_dims[static_cast<std::size_t>(l) + 1]);
    const auto cols = static_cast<std::size_t>(p.layer_dims[static_cast<std::size_t>(l)]);
    const auto& w = p.weights[static_cast<std::size_t>(l)];
    const auto& b = p.biases[static_cast<std::size_t>(l)];
    const auto& in = t.act[static_cast<std::size_t>(l)];
    auto& z = t.pre[static_cast<std::size_t>(l)];
    z.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = b[r];
      const double* row = w.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) s += row[c] * in[c];
      z[r] = s;
    }
    if (l + 1 < depth) {
      auto& a = t.act[static_cast<std::size_t>(l) + 1];
      a.resize(rows);
      for (std::size_t r = 0; r < rows; ++r) a[r] = z[r] > 0.0 ? z[r] : 0.0;
    }
  }
  const auto& logits = t.pre.back();
  t.probs.resize(logits.size());
  double top = -p.M;
  for (double v : logits) top = std::max(top, std::clamp(v, -p.M, p.M));
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    t.probs[i] = std::exp(std::clamp(logits[i], -p.M, p.M) - top);
    total += t.probs[i];
  }
  for (auto& v : t.probs) v /= total;
}

// Accumulates d(loss)/d(params) given d(loss)/d(probs).
void backward(const MlpParams& p, const Trace& t, std::span<const double> dprobs, MlpGradient& g) {
  const int depth = p.depth();
  double mean = 0.0;
  for (std::size_t i = 0; i < dprobs.size(); ++i) mean += t.probs[i] * dprobs[i];
  Vector delta(dprobs.size());
  const auto& logits = t.pre.back();
  for (std::size_t i = 0; i < dprobs.size(); ++i) {
    const bool inside = logits[i] >= -p.M && logits[i] <= p.M;
    delta[i] = inside ? t.probs[i] * (dprobs[i] - mean) : 0.0;
  }
  Vector next;
  for (int l = depth - 1; l >= 0; --l) {
    const auto rows = static_cast<std::size_t>(p.layer_dims[static_cast<std::size_t>(l) + 1]);
    const auto cols = static_cast<std::size_t>(p.layer_dims[static_cast<std::size_t>(l)]);
    const auto& w = p.weights[static_cast<std::size_t>(l)];
    const auto& in = t.act[static_cast<std::size_t>(l)];
    auto& gw = g.weights[static_cast<std::size_t>(l)];
    auto& gb = g.biases[static_cast<std::size_t>(l)];
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      gb[r] += d;
      double* grow = gw.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) grow[c] += d * in[c];
    }
    if (l == 0) break;
    next.assign(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double* row = w.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) next[c] += row[c] * d;
    }
    const auto& z = t.pre[static_cast<std::size_t>(l) - 1];
    for (std::size_t c = 0; c < cols; ++c) {
      if (!(z[c] > 0.0)) next[c] = 0.0;
    }
    delta.swap(next);
  }
}

}  // namespace

MlpParams MlpParams::zeros(std::vector<int> layer_dims, double J, double M) {
  MlpParams p;
  p.layer_dims = std::move(layer_dims);
  p.J = J;
  p.M = M;
  for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
    const auto rows = static_cast<std::size_t>(p.layer_dims[l + 1]);
    const auto cols = static_cast<std::size_t>(p.layer_dims[l]);
    p.weights.emplace_back(rows * cols, 0.0);
    p.biases.emplace_back(rows, 0.0);
  }
  p.validate();
  return p;
}

std::size_t MlpParams::parameter_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    n += static_cast<std::size_t>(layer_dims[l + 1]) * static_cast<std::size_t>(layer_dims[l] + 1);
  }
  return n;
}

void MlpParams::validate() const {
  if (layer_dims.size() < 2) throw InvalidArgument("network needs at least one layer");
  for (int w : layer_dims) {
    if (w < 1) throw InvalidArgument("layer widths must be positive");
  }
  if (layer_dims.back() < 2) throw InvalidArgument("network output needs d1 >= 2 logits");
  if (!(J > 0.0) || !(M > 0.0)) throw InvalidArgument("J and M must be positive");
  const auto depth = layer_dims.size() - 1;
  if (weights.size() != depth || biases.size() != depth) {
    throw InvalidArgument("weights/biases do not match layer_dims");
  }
  for (std::size_t l = 0; l < depth; ++l) {
    const auto rows = static_cast<std::size_t>(layer_dims[l + 1]);
    const auto cols = static_cast<std::size_t>(layer_dims[l]);
    if (weights[l].size() != rows * cols || biases[l].size() != rows) {
      throw InvalidArgument("layer " + std::to_string(l + 1) + " has the wrong shape");
    }
  }
}

MlpGradient MlpGradient::zeros_like(const MlpParams& params) {
  MlpGradient g;
  for (const auto& w : params.weights) g.weights.emplace_back(w.size(), 0.0);
  for (const auto& b : params.biases) g.biases.emplace_back(b.size(), 0.0);
  return g;
}

std::vector<double> MlpGradient::flatten() const {
  std::vector<double> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.insert(out.end(), weights[l].begin(), weights[l].end());
    out.insert(out.end(), biases[l].begin(), biases[l].end());
  }
  return out;
}

SimplexNet::SimplexNet(MlpParams params, SimplexFrame frame)
    : params_(std::move(params)), frame_(std::move(frame)) {
  params_.validate();
  if (frame_.d1() != params_.layer_dims.back()) {
    throw InvalidArgument("network output width must equal the simplex vertex count");
  }
}

SimplexNet SimplexNet::zeros(std::vector<int> layer_dims, double J, double M) {
  const int d1 = layer_dims.empty() ? 0 : layer_dims.back();
  return SimplexNet(MlpParams::zeros(std::move(layer_dims), J, M), SimplexFrame::build(d1));
}

SimplexNet SimplexNet::he_uniform(std::vector<int> layer_dims, double J, double M, std::uint64_t seed) {
  auto net = zeros(std::move(layer_dims), J, M);
  auto& p = net.params_;
  CounterRng rng(seed, 0x6e6574ULL);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const double bound = std::min(J, std::sqrt(6.0 / static_cast<double>(p.layer_dims[l])));
    for (auto& w : p.weights[l]) w = rng.uniform(-bound, bound);
  }
  return net;
}

ForwardResult SimplexNet::forward(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(d0())) throw InvalidArgument("forward: input dimension mismatch");
  Trace t;
  forward_trace(params_, x, t);
  ForwardResult r;
  r.logits = t.pre.back();
  for (auto& v : r.logits) v = std::clamp(v, -params_.M, params_.M);
  r.probs = t.probs;
  r.point.resize(static_cast<std::size_t>(frame_.d()));
  frame_.embed_into(r.probs, r.point);
  return r;
}

void SimplexNet::coefficients(std::span<const double> x, std::span<double> out) const {
  thread_local Trace t;
  forward_trace(params_, x, t);
  std::copy(t.probs.begin(), t.probs.end(), out.begin());
}

SimplexMap SimplexNet::as_map() const {
  auto snapshot = std::make_shared<const SimplexNet>(*this);
  return SimplexMap(
      d1(), [snapshot](std::span<const double> x, std::span<double> out) { snapshot->coefficients(x, out); },
      "net");
}

nlohmann::json SimplexNet::to_checkpoint() const {
  return {{"layer_dims", params_.layer_dims},
          {"weights", params_.weights},
          {"biases", params_.biases},
          {"J", params_.J},
          {"M", params_.M},
          {"d1", frame_.d1()}};
}

SimplexNet SimplexNet::from_checkpoint(const nlohmann::json& doc) {
  try {
    MlpParams p;
    p.layer_dims = doc.at("layer_dims").get<std::vector<int>>();
    p.weights = doc.at("weights").get<std::vector<Vector>>();
    p.biases = doc.at("biases").get<std::vector<Vector>>();
    p.J = doc.at("J").get<double>();
    p.M = doc.at("M").get<double>();
    const int d1 = doc.at("d1").get<int>();
    return SimplexNet(std::move(p), SimplexFrame::build(d1));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed checkpoint: ") + e.what());
  }
}

bool SimplexNet::same_parameters(const SimplexNet& other) const noexcept {
  return params_.layer_dims == other.params_.layer_dims && params_.weights == other.params_.weights &&
         params_.biases == other.params_.biases && params_.J == other.params_.J &&
         params_.M == other.params_.M;
}

namespace {

// Adds the subgradient of `weight * hinge(sample)` to grad; returns the hinge.
double accumulate_sample(const SimplexNet& net, const PairwiseSample& s, double weight, double negative_margin,
                         Trace& tx, Trace& txp, Vector& dg, MlpGradient& grad) {
  const auto& p = net.params();
  const auto& frame = net.frame();
  forward_trace(p, s.x, tx);
  forward_trace(p, s.xp, txp);
  const double r = rho_from_coefficients(frame, tx.probs, txp.probs);
  const bool reshaped = s.y < 0 && negative_margin > 0.0;
  const double margin = reshaped ? 2.0 - 2.0 * r / negative_margin : 1.0 - static_cast<double>(s.y) * psi(frame, r);
  if (!(margin > 0.0)) return 0.0;
  // d(margin)/d(rho) = 2 y / D^2 (or -2 / margin); d(rho)/dg = 2 (d1/d) (g - g').
  const double slope = reshaped ? -2.0 / negative_margin : 2.0 * static_cast<double>(s.y) / frame.diameter_sq();
  const double coef = weight * slope * 2.0 * frame.coefficient_scale();
  dg.resize(tx.probs.size());
  for (std::size_t i = 0; i < dg.size(); ++i) dg[i] = coef * (tx.probs[i] - txp.probs[i]);
  backward(p, tx, dg, grad);
  for (auto& v : dg) v = -v;
  backward(p, txp, dg, grad);
  return margin;
}

void reset_gradient(const MlpParams& p, MlpGradient& g) {
  if (g.weights.size() != p.weights.size()) g = MlpGradient::zeros_like(p);
  for (auto& w : g.weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : g.biases) std::fill(b.begin(), b.end(), 0.0);
  g.loss = 0.0;
}

}  // namespace

MlpGradient loss_gradient(const SimplexNet& net, std::span<const PairwiseSample> batch) {
  if (batch.empty()) throw InvalidArgument("loss_gradient: empty batch");
  auto grad = MlpGradient::zeros_like(net.params());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Trace tx;
  Trace txp;
  Vector dg;
  double loss = 0.0;
  for (const auto& s : batch) loss += accumulate_sample(net, s, inv_n, 0.0, tx, txp, dg, grad);
  grad.loss = loss * inv_n;
  return grad;
}

void loss_gradient_into(const SimplexNet& net, std::span<const PairwiseSample> samples,
                        std::span<const std::size_t> indices, MlpGradient& out, const LossShape& shape) {
  if (indices.empty()) throw InvalidArgument("loss_gradient: empty batch");
  reset_gradient(net.params(), out);
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  thread_local Trace tx;
  thread_local Trace txp;
  thread_local Vector dg;
  double loss = 0.0;
  for (std::size_t k : indices) {
    const double w = samples[k].y > 0 ? shape.positive_weight : shape.negative_weight;
    loss += w * accumulate_sample(net, samples[k], w * inv_n, shape.negative_margin, tx, txp, dg, out);
  }
  out.loss = loss * inv_n;
}

void clip_parameters(MlpParams& params) noexcept {
  for (auto& w : params.weights) {
    for (auto& v : w) v = std::clamp(v, -params.J, params.J);
  }
  for (auto& b : params.biases) {
    for (auto& v : b) v = std::clamp(v, -params.J, params.J);
  }
}

void apply_update(SimplexNet& net, const MlpGradient& gradient, double learning_rate) {
  auto& p = net.mutable_params();
  if (gradient.weights.size() != p.weights.size() || gradient.biases.size() != p.biases.size()) {
    throw NumericError("apply_update: gradient shape mismatch");
  }
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    if (gradient.weights[l].size() != p.weights[l].size() || gradient.biases[l].size() != p.biases[l].size()) {
      throw NumericError("apply_update: gradient shape mismatch");
    }
    for (double v : gradient.weights[l]) {
      if (!std::isfinite(v)) throw NumericError("apply_update: non-finite gradient");
    }
    for (double v : gradient.biases[l]) {
      if (!std::isfinite(v)) throw NumericError("apply_update: non-finite gradient");
    }
  }
  if (learning_rate == 0.0) return;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    for (std::size_t k = 0; k < p.weights[l].size(); ++k) p.weights[l][k] -= learning_rate * gradient.weights[l][k];
    for (std::size_t k = 0; k < p.biases[l].size(); ++k) p.biases[l][k] -= learning_rate * gradient.biases[l][k];
  }
  clip_parameters(p);
}

ParamStats param_stats(const SimplexNet& net) noexcept {
  const auto& p = net.params();
  ParamStats s;
  s.depth = p.depth();
  s.J = p.J;
  s.M = p.M;
  auto visit = [&s](const Vector& values) {
    for (double v : values) {
      ++s.total;
      s.max_magnitude = std::max(s.max_magnitude, std::abs(v));
      if (std::abs(v) > 1e-12) ++s.nonzero;
    }
  };
  for (const auto& w : p.weights) visit(w);
  for (const auto& b : p.biases) visit(b);
  return s;
}

SimplexNet permute_head(const SimplexNet& net, std::span<const int> perm) {
  const auto d1 = static_cast<std::size_t>(net.d1());
  if (perm.size() != d1) throw InvalidArgument("permute_head: permutation has the wrong length");
  std::vector<bool> seen(d1, false);
  for (int i : perm) {
    if (i < 0 || static_cast<std::size_t>(i) >= d1 || seen[static_cast<std::size_t>(i)]) {
      throw InvalidArgument("permute_head: not a permutation");
    }
    seen[static_cast<std::size_t>(i)] = true;
  }
  MlpParams p = net.params();
  const auto& src_w = net.params().weights.back();
  const auto& src_b = net.params().biases.back();
  const auto cols = static_cast<std::size_t>(p.layer_dims[p.layer_dims.size() - 2]);
  auto& w = p.weights.back();
  auto& b = p.biases.back();
  for (std::size_t i = 0; i < d1; ++i) {
    const auto from = static_cast<std::size_t>(perm[i]);
    std::copy_n(src_w.begin() + static_cast<std::ptrdiff_t>(from * cols), cols,
                w.begin() + static_cast<std::ptrdiff_t>(i * cols));
    b[i] = src_b[from];
  }
  return SimplexNet(std::move(p), net.frame());
}

}  // namespace cbound
