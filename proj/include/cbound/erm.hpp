#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cbound/contrastive.hpp"
#include "cbound/error.hpp"
#include "cbound/pairgen.hpp"
#include "cbound/simplexnet.hpp"
#include "json.hpp"

namespace cbound {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 0.05;
  double lr_decay = 0.5;      // multiplier applied every decay_every epochs
  int decay_every = 0;        // 0 disables decay
  double momentum = 0.0;
  // "sgd" (heavy-ball momentum) or "adam" (beta1 = momentum, beta2 = 0.999).
  std::string optimizer = "sgd";
  // Epochs at the start during which both labels carry equal total weight.
  int balanced_epochs = 0;
  // Fraction of D^2 at which the y = -1 term saturates during the balanced
  // epochs (0 keeps the hinge loss).
  double warmup_margin = 0.0;
  std::uint64_t seed = 1;
  double J = 10.0;
  double M = 10.0;
  std::vector<int> layer_dims;
  int restarts = 1;
  // Adds every relabelling of the output head of each restart to the pool.
  bool head_permutations = false;

  void validate() const;
  double rate_at(int epoch) const noexcept;  // epoch is 1-based
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& doc);
};

struct LocalizationSpec {
  double beta = 0.5;
  double beta0 = 0.0;
  std::size_t eval_points = 20000;
  std::uint64_t seed = 1;

  void validate(const SimplexFrame& frame) const;
};

struct TraceRow {
  int epoch = 0;  // 0 is the initialization
  double empirical_risk = 0.0;
  double max_weight = 0.0;
  double sparsity = 0.0;  // fraction of entries with |w| <= 1e-12
};

struct GlobalErmResult {
  SimplexNet net;
  std::vector<TraceRow> trace;
  int best_epoch = 0;
  double empirical_risk = 0.0;
};

/// Minibatch subgradient descent on the empirical hinge risk. Returns the
/// end-of-epoch snapshot with the smallest empirical risk (earliest on ties).
GlobalErmResult train_global_erm(const TrainConfig& cfg, const PairwiseDataset& ds, const SimplexFrame& frame);

// Empirical risk of a net, evaluated through the same reduction as training.
double net_empirical_risk(const SimplexNet& net, const PairwiseDataset& ds);

struct Membership {
  bool is_member = false;
  double measured_prob = 0.0;
  double std_error = 0.0;
  std::size_t eval_points = 0;
};

/// MC estimate of P_X(||f - f*|| < beta); member iff the estimate >= 1 - beta0.
Membership check_localized(const SimplexMap& f, const ContrastiveTarget& target, const LocalizationSpec& spec,
                           const BaseDensity& density);

struct PoolCandidate {
  int restart = 0;
  std::vector<int> head_perm;  // identity unless head permutations are on
  double empirical_risk = 0.0;
  Membership membership;
};

struct PoolReport {
  std::vector<PoolCandidate> candidates;
  std::size_t global_index = 0;
  std::optional<std::size_t> local_index;

  nlohmann::json to_json() const;
};

struct ErmPool {
  std::vector<SimplexNet> nets;
  std::vector<std::vector<TraceRow>> traces;  // one per restart
  PoolReport report;
};

class LocalErmInfeasible : public Error {
 public:
  explicit LocalErmInfeasible(PoolReport report);
  const PoolReport& report() const noexcept { return report_; }

 private:
  PoolReport report_;
};

/// Trains cfg.restarts global ERM runs (restart 0 uses cfg.seed, restart r
/// uses derive_key(cfg.seed, r)), expands head permutations if requested,
/// and scores every candidate. Risks are compared after rounding to 1e-12 so
/// head relabellings of one net tie exactly; ties go to the lowest index.
ErmPool train_pool(const TrainConfig& cfg, const PairwiseDataset& ds, const ContrastiveTarget& target,
                   const LocalizationSpec& spec, const BaseDensity& density = BaseDensity::uniform());

struct LocalErmResult {
  SimplexNet net;
  PoolReport report;
};

// Member of the pool with minimum empirical risk; throws LocalErmInfeasible.
LocalErmResult local_erm_from_pool(const ErmPool& pool);

LocalErmResult train_local_erm(const TrainConfig& cfg, const PairwiseDataset& ds, const ContrastiveTarget& target,
                               const LocalizationSpec& spec, const BaseDensity& density = BaseDensity::uniform());

void write_trace(const std::filesystem::path& path, const std::vector<TraceRow>& trace);

}  // namespace cbound
