#include <cmath>
#include <filesystem>

#include "cbound/error.hpp"
#include "cbound/pairgen.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace cbound;

TEST_CASE("eta formula for equal halves") {
  const GeneratorConfig cfg{fixtures::halves(), BaseDensity::uniform(), 0.9, {0.5, 0.5}, 1};
  CHECK(analytic_eta(cfg, 0) == doctest::Approx(0.9 / 0.95).epsilon(1e-15));
  CHECK(eta_for_parts(cfg, 0, 1) == 0.0);
  CHECK(massart_margin(cfg) == doctest::Approx(2.0 * 0.9 / 0.95 - 1.0).epsilon(1e-15));
}

TEST_CASE("empirical eta matches the analytic value and off-diagonal pairs are negative") {
  const auto cfg = GeneratorConfig::estimated(fixtures::sinusoid(), 0.9, 21);
  const auto ds = generate_dataset(cfg, 100000);
  const auto eta = empirical_eta(ds, cfg.partition);
  for (int i = 0; i < 3; ++i) {
    const auto& e = eta.diagonal[static_cast<std::size_t>(i)];
    REQUIRE(e.estimate.has_value());
    CHECK(std::abs(*e.estimate - analytic_eta(cfg, i)) <= 3.0 * e.std_error);
    CHECK(e.wilson_lo <= *e.estimate);
    CHECK(*e.estimate <= e.wilson_hi);
  }
  CHECK(eta.off_diagonal_trials > 0);
  CHECK(eta.off_diagonal_positives == 0);
}

TEST_CASE("label frequency equals c") {
  const auto cfg = GeneratorConfig::estimated(fixtures::halves(), 0.7, 3, 20000);
  const auto ds = generate_dataset(cfg, 40000);
  double positives = 0.0;
  for (const auto& s : ds.samples) positives += s.y == 1;
  CHECK(std::abs(positives / 40000 - 0.7) <= 3.0 * std::sqrt(0.7 * 0.3 / 40000));
}

TEST_CASE("conditional draws land in the requested part") {
  const auto p = fixtures::sinusoid();
  CounterRng rng(4, 0);
  std::uint64_t attempts = 0;
  for (int i = 0; i < 3000; ++i) {
    const auto draw = sample_conditional(p, i % 3, BaseDensity::uniform(), rng);
    CHECK(p.classify(draw.x) == i % 3);
    attempts += draw.attempts;
  }
  CHECK(attempts >= 3000);
}

TEST_CASE("acceptance rate of one half is about one half") {
  const auto p = fixtures::halves();
  CounterRng rng(8, 0);
  std::uint64_t attempts = 0;
  for (int i = 0; i < 10000; ++i) attempts += sample_conditional(p, 0, BaseDensity::uniform(), rng).attempts;
  const double rate = 10000.0 / static_cast<double>(attempts);
  CHECK(std::abs(rate - 0.5) <= 3.0 * std::sqrt(0.25 / static_cast<double>(attempts)));
}

TEST_CASE("datasets do not depend on the worker count") {
  const auto cfg = GeneratorConfig::estimated(fixtures::sinusoid(), 0.9, 5, 20000);
  PairwiseDataset a, b;
  {
    fixtures::ScopedWorkers w(1);
    a = generate_dataset(cfg, 5000);
  }
  {
    fixtures::ScopedWorkers w(3);
    b = generate_dataset(cfg, 5000);
  }
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.samples[i].x == b.samples[i].x);
    CHECK(a.samples[i].xp == b.samples[i].xp);
    CHECK(a.samples[i].y == b.samples[i].y);
  }
  CHECK(a.fingerprint == b.fingerprint);
}

TEST_CASE("dataset files round trip exactly") {
  const auto cfg = GeneratorConfig::estimated(fixtures::sinusoid(), 0.9, 6, 20000);
  const auto ds = generate_dataset(cfg, 500);
  const auto path = std::filesystem::temp_directory_path() / "cbound_test_dataset.csv";
  write_dataset(ds, path);
  const auto back = read_dataset(path);
  CHECK(back.fingerprint == ds.fingerprint);
  CHECK(back.seed == ds.seed);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.samples[i].x == ds.samples[i].x);
    CHECK(back.samples[i].xp == ds.samples[i].xp);
    CHECK(back.samples[i].y == ds.samples[i].y);
  }
}

TEST_CASE("generator configs violating the noise condition are rejected") {
  GeneratorConfig cfg{fixtures::halves(), BaseDensity::uniform(), 0.3, {0.5, 0.5}, 1};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);  // needs c > 1/3
  cfg.c = 0.34;
  CHECK_NOTHROW(cfg.validate());
  cfg.part_probs = {0.6, 0.6};
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg.part_probs = {0.5, 0.5};
  cfg.c = 1.2;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}
