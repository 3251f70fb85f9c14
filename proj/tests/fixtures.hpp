#pragma once

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "cbound/partition.hpp"
#include "cbound/rng.hpp"
#include "cbound/simplex.hpp"
#include "json.hpp"

namespace fixtures {

inline nlohmann::json halves_json() {
  return nlohmann::json::parse(R"({"d0":2,"d1":2,
    "boundaries":[{"kind":"constant","params":[0.5],"axis":1}],
    "pattern_map":[{"pattern":[1],"part":1},{"pattern":[-1],"part":2}]})");
}

inline nlohmann::json sinusoid_json() {
  return nlohmann::json::parse(R"({"d0":2,"d1":3,
    "boundaries":[{"kind":"sinusoid","params":[0.5,0.1,1.0,0.0],"axis":2},
                  {"kind":"sinusoid","params":[0.5,0.1,1.0,1.0],"axis":1}],
    "pattern_map":[{"pattern":[1,1],"part":1},{"pattern":[1,-1],"part":2},
                   {"pattern":[-1,1],"part":3},{"pattern":[-1,-1],"part":3}]})");
}

inline cbound::SmoothPartition halves() { return cbound::SmoothPartition::from_json(halves_json()); }
inline cbound::SmoothPartition sinusoid() { return cbound::SmoothPartition::from_json(sinusoid_json()); }

inline std::vector<double> random_probability(cbound::CounterRng& rng, int d1) {
  std::vector<double> g(static_cast<std::size_t>(d1));
  double total = 0.0;
  for (auto& v : g) {
    v = -std::log(1.0 - rng.uniform());
    total += v;
  }
  for (auto& v : g) v /= total;
  return g;
}

// Part masses of a partition by midpoint counting on a side x side grid.
inline std::vector<double> grid_part_masses(const cbound::SmoothPartition& p, int side) {
  std::vector<double> mass(static_cast<std::size_t>(p.d1()), 0.0);
  double x[2];
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      x[0] = (i + 0.5) / side;
      x[1] = (j + 0.5) / side;
      mass[static_cast<std::size_t>(p.classify(x))] += 1.0;
    }
  }
  for (auto& m : mass) m /= static_cast<double>(side) * side;
  return mass;
}

// Sets CBOUND_WORKERS for the lifetime of the object.
class ScopedWorkers {
 public:
  explicit ScopedWorkers(int n) {
    if (const char* old = std::getenv("CBOUND_WORKERS")) saved_ = old;
    setenv("CBOUND_WORKERS", std::to_string(n).c_str(), 1);
  }
  ~ScopedWorkers() {
    if (saved_.empty()) {
      unsetenv("CBOUND_WORKERS");
    } else {
      setenv("CBOUND_WORKERS", saved_.c_str(), 1);
    }
  }

 private:
  std::string saved_;
};

}  // namespace fixtures
