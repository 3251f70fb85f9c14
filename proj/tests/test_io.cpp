#include <cmath>
#include <filesystem>
#include <limits>

#include "cbound/error.hpp"
#include "cbound/io.hpp"
#include "cbound/parallel.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace cbound;

TEST_CASE("numbers round trip through their decimal form") {
  CounterRng rng(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.below(80)) - 40);
    CHECK(parse_number(format_number(v)) == v);
  }
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(3.0) == "3");
  CHECK(std::isnan(parse_number(format_number(std::nan("")))));
  CHECK_THROWS_AS(parse_number("abc"), InvalidArgument);
}

TEST_CASE("csv splitting") {
  const auto f = split_csv_line("1,2.5,,-3");
  REQUIRE(f.size() == 4);
  CHECK(f[0] == "1");
  CHECK(f[2].empty());
  CHECK(f[3] == "-3");
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("json files round trip") {
  const auto path = std::filesystem::temp_directory_path() / "cbound_test_io" / "doc.json";
  const nlohmann::json doc{{"a", 1}, {"b", {1.5, 2.5}}};
  write_json(path, doc);
  CHECK(read_json(path) == doc);
  CHECK_THROWS_AS(read_json(path.parent_path() / "missing.json"), InvalidArgument);
}

TEST_CASE("counter streams are pure functions of key and counter") {
  CounterRng a(11, 3), b(11, 3), c(11, 4);
  for (int i = 0; i < 10; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    CHECK(va != c.next_u64());
  }
  CounterRng u(2, 0);
  double mean = 0.0;
  for (int i = 0; i < 50000; ++i) mean += u.uniform();
  CHECK(std::abs(mean / 50000 - 0.5) <= 3.0 * std::sqrt(1.0 / 12.0 / 50000));
  CounterRng k(3, 0);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) ++counts[k.below(5)];
  double chi2 = 0.0;
  for (int n : counts) chi2 += (n - 10000.0) * (n - 10000.0) / 10000.0;
  CHECK(chi2 < 18.47);  // chi-square 0.999 quantile, 4 degrees of freedom
}

TEST_CASE("chunked sums do not depend on the worker count") {
  const auto fn = [](std::size_t i) { return std::sin(static_cast<double>(i)) * 1e-3 + 1.0 / (1.0 + i); };
  double one = 0.0, four = 0.0;
  {
    fixtures::ScopedWorkers w(1);
    one = chunked_sum(100000, fn);
  }
  {
    fixtures::ScopedWorkers w(4);
    four = chunked_sum(100000, fn);
  }
  CHECK(one == four);
  double naive = 0.0;
  for (std::size_t i = 0; i < 100000; ++i) naive += fn(i);
  CHECK(one == doctest::Approx(naive).epsilon(1e-12));
  CHECK(tree_sum({1.0, 2.0, 3.0}) == 6.0);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  fixtures::ScopedWorkers w(3);
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 7) throw NumericError("boom");
                  }),
                  NumericError);
}

TEST_CASE("worker count comes from the environment") {
  {
    fixtures::ScopedWorkers w(5);
    CHECK(worker_count() == 5);
  }
  CHECK(worker_count() >= 1);
}
