#include <cmath>
#include <filesystem>

#include "cbound/error.hpp"
#include "cbound/io.hpp"
#include "cbound/rate_study.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace cbound;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_study(const std::string& name) {
  ExperimentConfig cfg;
  cfg.partition = fixtures::sinusoid_json();
  cfg.n_grid = {128, 256, 512};
  cfg.seeds = {1, 2};
  cfg.schedule = ScheduleConstants{0.25, 8.0, 1.0, 10.0};
  cfg.optimizer.epochs = 3;
  cfg.evaluation = EvalSettings{4096, 10000, 1};
  cfg.eval_points = 4000;
  cfg.part_prob_samples = 20000;
  cfg.output_dir = fs::temp_directory_path() / "cbound_test_rate" / name;
  fs::remove_all(cfg.output_dir);
  return cfg;
}

}  // namespace

TEST_CASE("step rule") {
  StudyOptimizer o;
  CHECK(o.epochs_for(2048) == 128);   // 8192 steps of 32 over 2048 samples
  CHECK(o.epochs_for(8192) == 64);    // 16384 steps
  CHECK(o.epochs_for(512) == 256);    // 4096 steps
  o.epochs = 7;
  CHECK(o.epochs_for(512) == 7);
  CHECK(StudyOptimizer::from_json(o.to_json()).to_json() == o.to_json());
}

TEST_CASE("one cell with zero epochs completes") {
  auto cfg = tiny_study("smoke");
  cfg.n_grid = {512};
  cfg.seeds = {3};
  cfg.optimizer.epochs = 0;
  const auto result = run_rate_study(cfg);
  REQUIRE(result.rows.size() == 1);
  CHECK(result.rows[0].ok());
  CHECK(result.rows[0].risks->l2.total > 0.1);
  CHECK_FALSE(result.slope.has_value());
  const auto csv = read_text(cfg.output_dir / "results.csv");
  CHECK(csv.rfind("n,seed,total_l2,excess_hinge,excess_misclass,local_member,L,width,M,wall_ms\n512,3,", 0) == 0);
  CHECK(fs::exists(cfg.output_dir / "summary.json"));
  CHECK(fs::exists(cfg.output_dir / "cells" / "n512_seed3" / "checkpoint.json"));
  CHECK(fs::exists(cfg.output_dir / "cells" / "n512_seed3" / "pool.json"));
  CHECK(fs::exists(cfg.output_dir / "cells" / "n512_seed3" / "trace.csv"));
}

TEST_CASE("oracle rows have zero risk and a flat slope") {
  auto cfg = tiny_study("oracle");
  cfg.estimator = "oracle";
  const auto result = run_rate_study(cfg);
  CHECK(result.rows.size() == 6);
  for (const auto& row : result.rows) {
    REQUIRE(row.ok());
    CHECK(row.risks->l2.total == 0.0);
    CHECK(row.risks->excess_hinge.value == 0.0);
    CHECK(row.risks->misclass.excess == 0.0);
    CHECK(row.local_member);
  }
  REQUIRE(result.slope.has_value());
  CHECK(result.slope->slope == 0.0);
  CHECK_FALSE(result.strictly_decreasing);
}

TEST_CASE("results are byte-identical across reruns and worker counts") {
  auto cfg = tiny_study("determinism_a");
  cfg.record_wall_time = false;
  {
    fixtures::ScopedWorkers w(1);
    run_rate_study(cfg);
  }
  const auto first = read_text(cfg.output_dir / "results.csv");
  cfg.output_dir = cfg.output_dir.parent_path() / "determinism_b";
  fs::remove_all(cfg.output_dir);
  {
    fixtures::ScopedWorkers w(3);
    run_rate_study(cfg);
  }
  CHECK(read_text(cfg.output_dir / "results.csv") == first);
  CHECK(first.find(",0\n") != std::string::npos);
}

TEST_CASE("summary fields follow the rows") {
  auto cfg = tiny_study("summary");
  const auto result = run_rate_study(cfg);
  REQUIRE(result.per_n.size() == 3);
  for (const auto& g : result.per_n) {
    std::vector<double> l2;
    for (const auto& row : result.rows) {
      if (row.n == g.n && row.ok()) l2.push_back(row.risks->l2.total);
    }
    REQUIRE(l2.size() == 2);
    CHECK(g.median_total_l2 == doctest::Approx(0.5 * (l2[0] + l2[1])).epsilon(1e-15));
  }
  CHECK(result.expected_exponent == doctest::Approx(-2.0 / 3.0));
  std::size_t global_members = 0;
  for (const auto& row : result.rows) {
    global_members += row.global_member;
    if (row.global_member) {
      REQUIRE(row.local_matches_global.has_value());
      CHECK(*row.local_matches_global);
    }
  }
  CHECK(result.global_member_cells == global_members);
  CHECK(result.consistent_cells == global_members);
}

TEST_CASE("invalid grids are rejected before any compute") {
  auto cfg = tiny_study("invalid");
  cfg.n_grid = {512, 256};
  CHECK_THROWS_AS(run_rate_study(cfg), InvalidArgument);
  cfg.n_grid = {8, 512};
  cfg.alpha = 0.5;  // eps_8 = 8^{-1/3} = 1/2
  CHECK_THROWS_AS(run_rate_study(cfg), PreconditionViolated);
  CHECK_FALSE(fs::exists(cfg.output_dir));
  cfg = tiny_study("invalid");
  cfg.beta = 1.6;
  CHECK_THROWS_AS(run_rate_study(cfg), InvalidArgument);
}

TEST_CASE("a study whose cells all fail raises") {
  auto cfg = tiny_study("failing");
  cfg.evaluation.nodes = 10;  // every evaluation rejects the quadrature size
  CHECK_THROWS_AS(run_rate_study(cfg), StudyError);
  const auto csv = read_text(cfg.output_dir / "results.csv");
  CHECK(csv.find("nan") != std::string::npos);
}

TEST_CASE("config files resolve the partition path") {
  const auto dir = fs::temp_directory_path() / "cbound_test_rate" / "config";
  fs::create_directories(dir);
  write_json(dir / "partition.json", fixtures::halves_json());
  write_json(dir / "study.json", {{"partition", "partition.json"},
                                  {"d1", 2},
                                  {"n_grid", {256, 1024}},
                                  {"seeds", 3},
                                  {"optimizer", {{"epochs", 2}}},
                                  {"output_dir", "out"}});
  const auto cfg = ExperimentConfig::load(dir / "study.json");
  CHECK(cfg.partition == fixtures::halves_json());
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(cfg.output_dir == dir / "out");
  CHECK(cfg.optimizer.epochs_for(256) == 2);
  CHECK_NOTHROW(cfg.validate());
  CHECK_THROWS_AS(ExperimentConfig::from_json({{"n_grid", {1}}}), InvalidArgument);
}
