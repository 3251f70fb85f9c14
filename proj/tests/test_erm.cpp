#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "cbound/erm.hpp"
#include "cbound/io.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace cbound;

namespace {

struct Setup {
  GeneratorConfig gen;
  ContrastiveTarget target;
  PairwiseDataset ds;
};

Setup halves_setup(std::size_t n) {
  auto gen = GeneratorConfig::estimated(fixtures::halves(), 0.9, 31, 20000);
  ContrastiveTarget target(gen.partition, SimplexFrame::build(2));
  auto ds = generate_dataset(gen, n);
  return {std::move(gen), std::move(target), std::move(ds)};
}

TrainConfig small_config() {
  TrainConfig tc;
  tc.epochs = 12;
  tc.batch_size = 16;
  tc.learning_rate = 0.01;
  tc.optimizer = "adam";
  tc.momentum = 0.9;
  tc.balanced_epochs = 3;
  tc.warmup_margin = 0.25;
  tc.layer_dims = {2, 8, 8, 2};
  tc.M = 5.0;
  tc.seed = 4;
  return tc;
}

}  // namespace

TEST_CASE("training returns the best end-of-epoch snapshot") {
  const auto s = halves_setup(800);
  const auto result = train_global_erm(small_config(), s.ds, s.target.frame);
  REQUIRE(result.trace.size() == 13);
  double best = INFINITY;
  int best_epoch = -1;
  for (const auto& row : result.trace) {
    if (row.empirical_risk < best) {
      best = row.empirical_risk;
      best_epoch = row.epoch;
    }
    CHECK(row.max_weight <= 10.0);
    CHECK(row.sparsity >= 0.0);
    CHECK(row.sparsity <= 1.0);
  }
  CHECK(result.best_epoch == best_epoch);
  CHECK(result.empirical_risk == best);
  CHECK(net_empirical_risk(result.net, s.ds) == result.empirical_risk);
  CHECK(result.empirical_risk < result.trace.front().empirical_risk);
}

TEST_CASE("zero epochs returns the initialization") {
  const auto s = halves_setup(200);
  auto tc = small_config();
  tc.epochs = 0;
  const auto result = train_global_erm(tc, s.ds, s.target.frame);
  CHECK(result.trace.size() == 1);
  CHECK(result.best_epoch == 0);
}

TEST_CASE("training is reproducible across worker counts") {
  const auto s = halves_setup(600);
  auto tc = small_config();
  tc.restarts = 3;
  const LocalizationSpec spec{0.9, 0.05, 5000, 3};
  ErmPool a, b;
  {
    fixtures::ScopedWorkers w(1);
    a = train_pool(tc, s.ds, s.target, spec);
  }
  {
    fixtures::ScopedWorkers w(3);
    b = train_pool(tc, s.ds, s.target, spec);
  }
  REQUIRE(a.nets.size() == b.nets.size());
  for (std::size_t i = 0; i < a.nets.size(); ++i) CHECK(a.nets[i].same_parameters(b.nets[i]));
  CHECK(a.report.to_json() == b.report.to_json());
}

TEST_CASE("learning-rate schedule") {
  TrainConfig tc;
  tc.learning_rate = 0.1;
  tc.lr_decay = 0.5;
  tc.decay_every = 3;
  CHECK(tc.rate_at(1) == 0.1);
  CHECK(tc.rate_at(3) == 0.1);
  CHECK(tc.rate_at(4) == 0.05);
  CHECK(tc.rate_at(7) == 0.025);
  tc.decay_every = 0;
  CHECK(tc.rate_at(100) == 0.1);
  const auto back = TrainConfig::from_json(small_config().to_json());
  CHECK(back.to_json() == small_config().to_json());
}

TEST_CASE("membership of maps at a known distance from the target") {
  // ||mix(f*, centroid, w) - f*|| = w ||v_i|| = w at every point.
  const auto s = halves_setup(10);
  for (double w : {0.1, 0.3, 0.5, 0.9}) {
    const auto f = mixture_map(target_map(s.target), centroid_map(2), w);
    for (double beta : {0.2, 0.6, 1.0}) {
      const auto m = check_localized(f, s.target, {beta, 0.01, 4000, 5}, BaseDensity::uniform());
      CHECK(m.measured_prob == (w < beta ? 1.0 : 0.0));
      CHECK(m.is_member == (w < beta));
      CHECK(m.eval_points == 4000);
    }
  }
}

TEST_CASE("the relabelled target is never localized") {
  const auto s = halves_setup(10);
  const auto permuted = permuted_target_map(s.target);
  for (double frac : {0.1, 0.5, 0.99}) {
    const double beta = frac * s.target.frame.dproj();
    const auto m = check_localized(permuted, s.target, {beta, 0.2, 4000, 6}, BaseDensity::uniform());
    CHECK_FALSE(m.is_member);
    CHECK(m.measured_prob == 0.0);
  }
  CHECK(check_localized(target_map(s.target), s.target, {0.1, 0.0, 4000, 6}, BaseDensity::uniform()).measured_prob ==
        1.0);
}

TEST_CASE("pool selection follows the rounded-risk tie rule") {
  auto gen = GeneratorConfig::estimated(fixtures::sinusoid(), 0.9, 8, 50000);
  const ContrastiveTarget target(gen.partition, SimplexFrame::build(3));
  const auto ds = generate_dataset(gen, 600);
  auto tc = small_config();
  tc.layer_dims = {2, 8, 8, 3};
  tc.restarts = 2;
  tc.head_permutations = true;
  const LocalizationSpec spec{1.2, 0.3, 4000, 9};
  const auto pool = train_pool(tc, ds, target, spec);
  const auto& c = pool.report.candidates;
  REQUIRE(c.size() == 12);
  REQUIRE(pool.nets.size() == 12);
  const auto key = [](double r) { return std::llround(r * 1e12); };
  // relabellings of one restart tie exactly
  std::map<int, long long> per_restart;
  for (const auto& cand : c) {
    if (per_restart.count(cand.restart)) CHECK(per_restart[cand.restart] == key(cand.empirical_risk));
    per_restart[cand.restart] = key(cand.empirical_risk);
  }
  std::size_t global = 0;
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (key(c[i].empirical_risk) < key(c[global].empirical_risk)) global = i;
  }
  CHECK(pool.report.global_index == global);
  std::optional<std::size_t> local;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!c[i].membership.is_member) continue;
    if (!local || key(c[i].empirical_risk) < key(c[*local].empirical_risk)) local = i;
  }
  CHECK(pool.report.local_index == local);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(net_empirical_risk(pool.nets[i], ds) == doctest::Approx(c[i].empirical_risk).epsilon(1e-12));
  }
}

TEST_CASE("an empty localized subclass raises with the pool report") {
  const auto s = halves_setup(300);
  auto tc = small_config();
  tc.epochs = 1;
  try {
    train_local_erm(tc, s.ds, s.target, {1e-6, 0.0, 2000, 1});
    FAIL("expected LocalErmInfeasible");
  } catch (const LocalErmInfeasible& e) {
    CHECK(e.report().candidates.size() == 1);
    CHECK_FALSE(e.report().local_index.has_value());
  }
}

TEST_CASE("invalid localization and training settings are rejected") {
  const auto s = halves_setup(50);
  auto tc = small_config();
  CHECK_THROWS_AS(train_pool(tc, s.ds, s.target, {2.0, 0.1, 100, 1}), InvalidArgument);
  CHECK_THROWS_AS(train_pool(tc, s.ds, s.target, {0.5, 0.1, 0, 1}), InvalidArgument);
  tc.optimizer = "lbfgs";
  CHECK_THROWS_AS(train_global_erm(tc, s.ds, s.target.frame), InvalidArgument);
}

TEST_CASE("trace files have the documented header") {
  const auto s = halves_setup(100);
  auto tc = small_config();
  tc.epochs = 2;
  const auto result = train_global_erm(tc, s.ds, s.target.frame);
  const auto path = std::filesystem::temp_directory_path() / "cbound_test_trace.csv";
  write_trace(path, result.trace);
  const auto text = read_text(path);
  CHECK(text.rfind("epoch,empirical_risk,max_weight,sparsity\n0,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}
