#include "cbound/schedule.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "cbound/error.hpp"
#include "cbound/io.hpp"

namespace cbound {

double theoretical_epsilon(double n, double alpha, int d0) {
  if (!(n >= 3.0)) throw InvalidArgument("theoretical_epsilon: n must be >= 3");
  if (!(alpha > 0.0)) throw InvalidArgument("theoretical_epsilon: alpha must be > 0");
  if (d0 < 2) throw InvalidArgument("theoretical_epsilon: d0 must be >= 2");
  const double eps = std::pow(n, -alpha / (alpha + static_cast<double>(d0) - 1.0));
  if (!(eps < 0.5)) {
    throw PreconditionViolated("eps_n = " + format_number(eps) + " >= 1/2 for n = " + format_number(n));
  }
  return eps;
}

nlohmann::json ScheduleConstants::to_json() const {
  return {{"c_L", c_L}, {"c_S", c_S}, {"c_M", c_M}, {"J", J}};
}

ScheduleConstants ScheduleConstants::from_json(const nlohmann::json& doc) {
  ScheduleConstants c;
  c.c_L = doc.value("c_L", c.c_L);
  c.c_S = doc.value("c_S", c.c_S);
  c.c_M = doc.value("c_M", c.c_M);
  c.J = doc.value("J", c.J);
  if (!(c.c_L > 0.0) || !(c.c_S > 0.0) || !(c.c_M > 0.0) || !(c.J > 0.0)) {
    throw InvalidArgument("schedule constants must be positive");
  }
  return c;
}

long long dense_parameter_count(int d0, int width, int L, int d1) {
  if (L < 2) return static_cast<long long>(d0 + 1) * d1;
  const long long w = width;
  return (d0 + 1) * w + static_cast<long long>(L - 2) * (w + 1) * w + (w + 1) * d1;
}

std::vector<int> NetworkSchedule::layer_dims(int d0, int d1) const {
  std::vector<int> dims{d0};
  for (int l = 0; l + 1 < L; ++l) dims.push_back(width);
  dims.push_back(d1);
  return dims;
}

nlohmann::json NetworkSchedule::to_json() const {
  return {{"eps", eps}, {"L", L},         {"S_budget", S_budget}, {"width", width},
          {"parameters", parameters},     {"M", M},               {"J", J}};
}

NetworkSchedule network_size_schedule(double eps, double alpha, int d0, int d1, const ScheduleConstants& constants,
                                      double density_sup) {
  if (!(eps > 0.0) || !(eps < 0.5)) throw PreconditionViolated("network_size_schedule: eps must lie in (0, 1/2)");
  if (!(alpha > 0.0) || d0 < 1 || d1 < 2) throw InvalidArgument("network_size_schedule: bad dimensions");
  const double log2_inv = std::log2(1.0 / eps);
  NetworkSchedule s;
  s.eps = eps;
  s.L = std::max(2, static_cast<int>(std::ceil(constants.c_L * (log2_inv + 1.0) - 1e-12)));
  s.S_budget = static_cast<long long>(std::ceil(
      constants.c_S * std::pow(eps, -static_cast<double>(d0 - 1) / alpha) * std::max(1.0, log2_inv) - 1e-9));
  s.M = std::max(1.0, constants.c_M * std::abs(std::log(4.0 / (static_cast<double>(d1) * d1) / density_sup * eps)));
  s.J = constants.J;
  s.width = 1;
  while (dense_parameter_count(d0, s.width, s.L, d1) < s.S_budget) ++s.width;
  s.parameters = dense_parameter_count(d0, s.width, s.L, d1);
  return s;
}

nlohmann::json SlopeFit::to_json() const {
  return {{"slope", slope},   {"intercept", intercept}, {"slope_se", slope_se},
          {"ci_low", ci_low}, {"ci_high", ci_high},     {"used", used},
          {"warnings", warnings}};
}

SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  SlopeFit fit;
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& [n, risk] : points) {
    if (!(n > 0.0) || !(risk > 0.0) || !std::isfinite(risk)) {
      fit.warnings.push_back("dropped point n=" + format_number(n) + " risk=" + format_number(risk));
      continue;
    }
    xs.push_back(std::log(n));
    ys.push_back(std::log(risk));
  }
  fit.used = xs.size();
  if (xs.size() < 3) throw InsufficientData("fit_loglog_slope needs at least 3 positive risks");
  const double m = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw InsufficientData("fit_loglog_slope needs at least two distinct n");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - fit.intercept - fit.slope * xs[i];
    rss += r * r;
  }
  const double dof = m - 2.0;
  fit.slope_se = std::sqrt(rss / dof / sxx);
  const boost::math::students_t dist(dof);
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
  fit.ci_low = fit.slope - t * fit.slope_se;
  fit.ci_high = fit.slope + t * fit.slope_se;
  return fit;
}

}  // namespace cbound
