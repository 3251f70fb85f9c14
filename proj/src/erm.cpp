#include "cbound/erm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cbound/io.hpp"
#include "cbound/parallel.hpp"
#include "cbound/rng.hpp"

namespace cbound {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974ULL;
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;
constexpr double kRiskResolution = 1e12;

long long risk_key(double risk) { return std::llround(risk * kRiskResolution); }

TraceRow trace_row(int epoch, double risk, const SimplexNet& net) {
  const auto stats = param_stats(net);
  TraceRow row;
  row.epoch = epoch;
  row.empirical_risk = risk;
  row.max_weight = stats.max_magnitude;
  row.sparsity = stats.total == 0 ? 0.0
                                  : static_cast<double>(stats.total - stats.nonzero) /
                                        static_cast<double>(stats.total);
  return row;
}

std::vector<std::vector<int>> head_permutations(int d1, bool all) {
  std::vector<int> perm(static_cast<std::size_t>(d1));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<int>> out{perm};
  if (!all) return out;
  if (d1 > 7) throw InvalidArgument("head permutations are limited to d1 <= 7");
  while (std::next_permutation(perm.begin(), perm.end())) out.push_back(perm);
  return out;
}

// Lowest index attaining the minimal rounded risk among `eligible`.
std::optional<std::size_t> select_min(const std::vector<PoolCandidate>& cands, bool members_only) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (members_only && !cands[i].membership.is_member) continue;
    if (!best || risk_key(cands[i].empirical_risk) < risk_key(cands[*best].empirical_risk)) best = i;
  }
  return best;
}

std::string describe(const PoolReport& report) {
  std::ostringstream out;
  out << "local ERM infeasible: none of " << report.candidates.size() << " candidates is localized";
  double best = 0.0;
  for (const auto& c : report.candidates) best = std::max(best, c.membership.measured_prob);
  out << " (best measured probability " << best << ")";
  return out.str();
}

// Heavy-ball SGD, or Adam with beta1 = momentum.
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const MlpParams& params)
      : adam_(cfg.optimizer == "adam"),
        momentum_(cfg.momentum),
        first_(MlpGradient::zeros_like(params)),
        second_(MlpGradient::zeros_like(params)),
        direction_(MlpGradient::zeros_like(params)) {}

  void step(SimplexNet& net, const MlpGradient& g, double lr) {
    ++steps_;
    if (adam_) {
      const double c1 = 1.0 - std::pow(momentum_, static_cast<double>(steps_));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(steps_));
      for (std::size_t l = 0; l < g.weights.size(); ++l) {
        adam(g.weights[l], first_.weights[l], second_.weights[l], direction_.weights[l], c1, c2);
        adam(g.biases[l], first_.biases[l], second_.biases[l], direction_.biases[l], c1, c2);
      }
      apply_update(net, direction_, lr);
    } else if (momentum_ > 0.0) {
      for (std::size_t l = 0; l < g.weights.size(); ++l) {
        heavy_ball(g.weights[l], first_.weights[l]);
        heavy_ball(g.biases[l], first_.biases[l]);
      }
      apply_update(net, first_, lr);
    } else {
      apply_update(net, g, lr);
    }
  }

 private:
  static constexpr double kBeta2 = 0.999;

  void adam(const Vector& g, Vector& m, Vector& v, Vector& d, double c1, double c2) const {
    for (std::size_t k = 0; k < g.size(); ++k) {
      m[k] = momentum_ * m[k] + (1.0 - momentum_) * g[k];
      v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g[k] * g[k];
      d[k] = (m[k] / c1) / (std::sqrt(v[k] / c2) + 1e-8);
    }
  }

  void heavy_ball(const Vector& g, Vector& velocity) const {
    for (std::size_t k = 0; k < g.size(); ++k) velocity[k] = momentum_ * velocity[k] + g[k];
  }

  bool adam_;
  double momentum_;
  long long steps_ = 0;
  MlpGradient first_;
  MlpGradient second_;
  MlpGradient direction_;
};

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
  if (!(lr_decay > 0.0) || lr_decay > 1.0) throw InvalidArgument("lr_decay must lie in (0, 1]");
  if (decay_every < 0) throw InvalidArgument("decay_every must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidArgument("momentum must lie in [0, 1)");
  if (optimizer != "sgd" && optimizer != "adam") throw InvalidArgument("optimizer must be sgd or adam");
  if (warmup_margin < 0.0 || warmup_margin > 1.0) throw InvalidArgument("warmup_margin must lie in [0, 1]");
  if (balanced_epochs < 0) throw InvalidArgument("balanced_epochs must be >= 0");
  if (restarts < 1) throw InvalidArgument("restarts must be >= 1");
  if (!(J > 0.0) || !(M > 0.0)) throw InvalidArgument("J and M must be positive");
  if (layer_dims.size() < 2) throw InvalidArgument("layer_dims needs at least input and output widths");
}

double TrainConfig::rate_at(int epoch) const noexcept {
  if (decay_every <= 0) return learning_rate;
  return learning_rate * std::pow(lr_decay, static_cast<double>((epoch - 1) / decay_every));
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"lr_decay", lr_decay},
          {"decay_every", decay_every},
          {"momentum", momentum},
          {"optimizer", optimizer},
          {"balanced_epochs", balanced_epochs},
          {"warmup_margin", warmup_margin},
          {"seed", seed},
          {"J", J},
          {"M", M},
          {"layer_dims", layer_dims},
          {"restarts", restarts},
          {"head_permutations", head_permutations}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc) {
  TrainConfig c;
  c.epochs = doc.value("epochs", c.epochs);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.lr_decay = doc.value("lr_decay", c.lr_decay);
  c.decay_every = doc.value("decay_every", c.decay_every);
  c.momentum = doc.value("momentum", c.momentum);
  c.optimizer = doc.value("optimizer", c.optimizer);
  c.balanced_epochs = doc.value("balanced_epochs", c.balanced_epochs);
  c.warmup_margin = doc.value("warmup_margin", c.warmup_margin);
  c.seed = doc.value("seed", c.seed);
  c.J = doc.value("J", c.J);
  c.M = doc.value("M", c.M);
  c.layer_dims = doc.value("layer_dims", c.layer_dims);
  c.restarts = doc.value("restarts", c.restarts);
  c.head_permutations = doc.value("head_permutations", c.head_permutations);
  return c;
}

void LocalizationSpec::validate(const SimplexFrame& frame) const {
  if (!(beta > 0.0) || !(beta < frame.dproj())) {
    throw InvalidArgument("beta must lie in (0, D_proj)");
  }
  if (!(beta0 >= 0.0)) throw InvalidArgument("beta0 must be >= 0");
  if (eval_points == 0) throw InvalidArgument("eval_points must be positive");
}

double net_empirical_risk(const SimplexNet& net, const PairwiseDataset& ds) {
  return empirical_risk(net.as_map(), ds, net.frame());
}

GlobalErmResult train_global_erm(const TrainConfig& cfg, const PairwiseDataset& ds, const SimplexFrame& frame) {
  cfg.validate();
  if (ds.size() == 0) throw InvalidArgument("train_global_erm: empty dataset");
  if (cfg.layer_dims.front() != ds.d0) throw InvalidArgument("layer_dims[0] must equal the dataset dimension");
  if (cfg.layer_dims.back() != frame.d1()) throw InvalidArgument("layer_dims must end with d1");

  auto net = SimplexNet::he_uniform(cfg.layer_dims, cfg.J, cfg.M, derive_key(cfg.seed, kInitStream));
  double risk = net_empirical_risk(net, ds);
  if (!std::isfinite(risk)) throw NumericError("non-finite empirical risk at epoch 0");

  GlobalErmResult result{net, {trace_row(0, risk, net)}, 0, risk};
  std::vector<std::size_t> order(ds.size());
  MlpGradient grad;
  Optimizer optimizer(cfg, net.params());
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  const auto positives = static_cast<double>(
      std::count_if(ds.samples.begin(), ds.samples.end(), [](const PairwiseSample& s) { return s.y > 0; }));
  const double total = static_cast<double>(ds.size());
  const double negatives = total - positives;
  const bool can_balance = positives > 0.0 && negatives > 0.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(derive_key(cfg.seed, kShuffleStream), static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    const double lr = cfg.rate_at(epoch);
    const bool balanced = can_balance && epoch <= cfg.balanced_epochs;
    LossShape shape;
    if (balanced) {
      shape.positive_weight = total / (2.0 * positives);
      shape.negative_weight = total / (2.0 * negatives);
      shape.negative_margin = cfg.warmup_margin * frame.diameter_sq();
    }
    try {
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t len = std::min(batch, order.size() - start);
        loss_gradient_into(net, ds.samples, std::span(order).subspan(start, len), grad, shape);
        optimizer.step(net, grad, lr);
      }
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
    }

    risk = net_empirical_risk(net, ds);
    if (!std::isfinite(risk)) {
      throw NumericError("non-finite empirical risk at epoch " + std::to_string(epoch));
    }
    result.trace.push_back(trace_row(epoch, risk, net));
    if (risk < result.empirical_risk) {
      result.empirical_risk = risk;
      result.best_epoch = epoch;
      result.net = net;
    }
  }
  return result;
}

Membership check_localized(const SimplexMap& f, const ContrastiveTarget& target, const LocalizationSpec& spec,
                           const BaseDensity& density) {
  spec.validate(target.frame);
  const auto d0 = static_cast<std::size_t>(target.partition.d0());
  const auto& frame = target.frame;
  const double beta_sq = spec.beta * spec.beta;
  const double hits = chunked_sum(spec.eval_points, [&](std::size_t i) {
    CounterRng rng(spec.seed, i);
    Vector x(d0);
    density.sample(rng, x);
    const Vector g = f.coefficients(x);
    Vector point(static_cast<std::size_t>(frame.d()));
    frame.embed_into(g, point);
    return squared_distance(point, frame.vertex(target.part(x))) < beta_sq ? 1.0 : 0.0;
  });
  Membership m;
  m.eval_points = spec.eval_points;
  m.measured_prob = hits / static_cast<double>(spec.eval_points);
  m.std_error = std::sqrt(m.measured_prob * (1.0 - m.measured_prob) / static_cast<double>(spec.eval_points));
  m.is_member = m.measured_prob >= 1.0 - spec.beta0;
  return m;
}

nlohmann::json PoolReport::to_json() const {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : candidates) {
    cands.push_back({{"restart", c.restart},
                     {"head_perm", c.head_perm},
                     {"empirical_risk", c.empirical_risk},
                     {"is_member", c.membership.is_member},
                     {"measured_prob", c.membership.measured_prob},
                     {"std_error", c.membership.std_error},
                     {"eval_points", c.membership.eval_points}});
  }
  nlohmann::json doc{{"candidates", cands}, {"global_index", global_index}};
  doc["local_index"] = local_index ? nlohmann::json(*local_index) : nlohmann::json(nullptr);
  return doc;
}

LocalErmInfeasible::LocalErmInfeasible(PoolReport report) : Error(describe(report)), report_(std::move(report)) {}

ErmPool train_pool(const TrainConfig& cfg, const PairwiseDataset& ds, const ContrastiveTarget& target,
                   const LocalizationSpec& spec, const BaseDensity& density) {
  cfg.validate();
  spec.validate(target.frame);
  const auto restarts = static_cast<std::size_t>(cfg.restarts);
  std::vector<std::optional<GlobalErmResult>> runs(restarts);
  parallel_for(restarts, [&](std::size_t r) {
    TrainConfig run_cfg = cfg;
    if (r > 0) run_cfg.seed = derive_key(cfg.seed, r);
    runs[r] = train_global_erm(run_cfg, ds, target.frame);
  });

  const auto perms = head_permutations(target.frame.d1(), cfg.head_permutations);
  ErmPool pool;
  for (std::size_t r = 0; r < restarts; ++r) {
    pool.traces.push_back(runs[r]->trace);
    for (const auto& perm : perms) {
      pool.nets.push_back(permute_head(runs[r]->net, perm));
      PoolCandidate c;
      c.restart = static_cast<int>(r);
      c.head_perm = perm;
      pool.report.candidates.push_back(c);
    }
  }
  parallel_for(pool.nets.size(), [&](std::size_t i) {
    auto& c = pool.report.candidates[i];
    c.empirical_risk = net_empirical_risk(pool.nets[i], ds);
    c.membership = check_localized(pool.nets[i].as_map(), target, spec, density);
  });
  pool.report.global_index = *select_min(pool.report.candidates, false);
  pool.report.local_index = select_min(pool.report.candidates, true);
  return pool;
}

LocalErmResult local_erm_from_pool(const ErmPool& pool) {
  if (!pool.report.local_index) throw LocalErmInfeasible(pool.report);
  return {pool.nets[*pool.report.local_index], pool.report};
}

LocalErmResult train_local_erm(const TrainConfig& cfg, const PairwiseDataset& ds, const ContrastiveTarget& target,
                               const LocalizationSpec& spec, const BaseDensity& density) {
  return local_erm_from_pool(train_pool(cfg, ds, target, spec, density));
}

void write_trace(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  std::string out = "epoch,empirical_risk,max_weight,sparsity\n";
  for (const auto& row : trace) {
    out += std::to_string(row.epoch) + "," + format_number(row.empirical_risk) + "," +
           format_number(row.max_weight) + "," + format_number(row.sparsity) + "\n";
  }
  write_text(path, out);
}

}  // namespace cbound
