#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace cbound {

/// eps_n = n^{-alpha / (alpha + d0 - 1)}. Throws PreconditionViolated when
/// eps_n >= 1/2 and InvalidArgument for n < 3, alpha <= 0 or d0 < 2.
double theoretical_epsilon(double n, double alpha, int d0);

struct ScheduleConstants {
  double c_L = 1.0;
  double c_S = 1.0;
  double c_M = 1.0;
  double J = 10.0;  // fixed entrywise bound, not scaled with eps

  nlohmann::json to_json() const;
  static ScheduleConstants from_json(const nlohmann::json& doc);
};

struct NetworkSchedule {
  double eps = 0.0;
  int L = 0;               // number of weight layers, >= 2
  long long S_budget = 0;  // parameter budget
  int width = 0;           // hidden width of the dense net meeting S_budget
  long long parameters = 0;
  double M = 0.0;
  double J = 0.0;

  std::vector<int> layer_dims(int d0, int d1) const;
  nlohmann::json to_json() const;
};

// Weights and biases of a dense net with L - 1 hidden layers of `width`.
long long dense_parameter_count(int d0, int width, int L, int d1);

/// L = ceil(c_L (log2(1/eps) + 1)) (at least 2),
/// S = ceil(c_S eps^{-(d0-1)/alpha} max(1, log2(1/eps))),
/// M = max(1, c_M |ln(4 d1^-2 ||p_X||^-1 eps)|), width minimal with
/// dense_parameter_count >= S. Requires 0 < eps < 1/2.
NetworkSchedule network_size_schedule(double eps, double alpha, int d0, int d1, const ScheduleConstants& constants,
                                      double density_sup = 1.0);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double ci_low = 0.0;  // 95% Student-t interval
  double ci_high = 0.0;
  std::size_t used = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Least squares of ln(risk) on ln(n). Nonpositive risks are dropped with a
/// warning; fewer than 3 usable points throws InsufficientData.
SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points);

}  // namespace cbound
