#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cbound/erm.hpp"
#include "cbound/evaluation.hpp"
#include "cbound/partition.hpp"
#include "cbound/schedule.hpp"
#include "json.hpp"

namespace cbound {

struct StudyOptimizer {
  std::string name = "adam";
  double learning_rate = 0.003;
  double momentum = 0.9;
  int batch_size = 32;
  // Optimizer steps for sample size n: ceil(steps_base (n / steps_reference_n)^steps_exponent).
  double steps_base = 8192.0;
  double steps_reference_n = 2048.0;
  double steps_exponent = 0.5;
  std::optional<int> epochs;  // overrides the step rule
  double lr_decay = 0.5;
  int decay_phases = 3;
  double balanced_fraction = 0.25;
  double warmup_margin = 0.25;
  int restarts = 1;
  bool head_permutations = true;

  int epochs_for(std::size_t n) const;
  nlohmann::json to_json() const;
  static StudyOptimizer from_json(const nlohmann::json& doc);
};

struct ExperimentConfig {
  nlohmann::json partition;  // partition document (resolved from a file path when loaded)
  double alpha = 2.0;
  int d0 = 2;
  int d1 = 3;
  std::vector<std::size_t> n_grid;
  std::vector<std::uint64_t> seeds;
  double c = 0.9;
  double beta = 1.2;
  ScheduleConstants schedule;
  StudyOptimizer optimizer;
  EvalSettings evaluation;
  std::size_t eval_points = 20000;  // membership draws
  std::size_t part_prob_samples = 200000;
  std::string estimator = "erm";  // "erm" or "oracle" (evaluates f* itself)
  std::filesystem::path output_dir = "rate_study_out";
  bool record_wall_time = true;  // false writes wall_ms = 0 for byte-stable output

  /// Checks the grid (strictly increasing, eps_n < 1/2 everywhere) and all
  /// scalar ranges before any compute.
  void validate() const;
  nlohmann::json to_json() const;
  // Paths inside `doc` are resolved against base_dir.
  static ExperimentConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
};

struct CellResult {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  NetworkSchedule schedule;
  std::optional<RiskReport> risks;
  bool local_member = false;   // the reported estimator is a local ERM
  bool global_member = false;  // the global ERM passed check_localized
  // Set when global_member: whether the local ERM over the same pool is the
  // global ERM itself.
  std::optional<bool> local_matches_global;
  double best_measured_prob = 0.0;
  double empirical_risk = 0.0;
  double wall_ms = 0.0;
  std::string error;

  bool ok() const noexcept { return error.empty() && risks.has_value(); }
};

struct GridSummary {
  std::size_t n = 0;
  std::size_t cells_ok = 0;
  double median_total_l2 = 0.0;
  double median_excess_hinge = 0.0;
  double median_excess_misclass = 0.0;
  std::size_t local_members = 0;
  NetworkSchedule schedule;
};

struct RateStudyResult {
  std::vector<CellResult> rows;
  std::vector<GridSummary> per_n;
  std::optional<SlopeFit> slope;
  double expected_exponent = 0.0;
  bool strictly_decreasing = false;
  double final_over_first = 0.0;
  std::size_t global_member_cells = 0;
  std::size_t consistent_cells = 0;

  nlohmann::json summary_json() const;
};

inline constexpr const char* kResultsHeader = "n,seed,total_l2,excess_hinge,excess_misclass,local_member,L,width,M,wall_ms";

/// Runs every (n, seed) cell, writes results.csv, summary.json and per-cell
/// artifacts under output_dir. Failed cells are recorded and skipped; throws
/// StudyError when every cell fails.
RateStudyResult run_rate_study(const ExperimentConfig& cfg);

std::string results_csv(const RateStudyResult& result, bool record_wall_time);

}  // namespace cbound
