#include "cbound/rate_study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cbound/contrastive.hpp"
#include "cbound/error.hpp"
#include "cbound/io.hpp"
#include "cbound/pairgen.hpp"
#include "cbound/parallel.hpp"
#include "cbound/rng.hpp"

namespace cbound {

namespace {

constexpr std::uint64_t kPartProbStream = 0x70726f62ULL;

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

// Pool candidate closest to the localized subclass: largest measured
// probability, then smallest empirical risk, then lowest index.
std::size_t nearest_to_localized(const PoolReport& report) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < report.candidates.size(); ++i) {
    const auto& a = report.candidates[i];
    const auto& b = report.candidates[best];
    if (a.membership.measured_prob > b.membership.measured_prob ||
        (a.membership.measured_prob == b.membership.measured_prob && a.empirical_risk < b.empirical_risk)) {
      best = i;
    }
  }
  return best;
}

nlohmann::json cell_json(const CellResult& cell) {
  nlohmann::json doc{{"n", cell.n},
                     {"seed", cell.seed},
                     {"schedule", cell.schedule.to_json()},
                     {"local_member", cell.local_member},
                     {"global_member", cell.global_member},
                     {"best_measured_prob", cell.best_measured_prob},
                     {"empirical_risk", cell.empirical_risk}};
  doc["local_matches_global"] =
      cell.local_matches_global ? nlohmann::json(*cell.local_matches_global) : nlohmann::json(nullptr);
  doc["risks"] = cell.risks ? cell.risks->to_json() : nlohmann::json(nullptr);
  if (!cell.error.empty()) doc["error"] = cell.error;
  return doc;
}

struct StudyContext {
  const ExperimentConfig& cfg;
  ContrastiveTarget target;
  GeneratorConfig generator;
};

CellResult run_cell(const StudyContext& ctx, std::size_t n, std::uint64_t seed) {
  const auto& cfg = ctx.cfg;
  const auto start = std::chrono::steady_clock::now();
  CellResult cell;
  cell.n = n;
  cell.seed = seed;
  const double eps = theoretical_epsilon(static_cast<double>(n), cfg.alpha, cfg.d0);
  cell.schedule = network_size_schedule(eps, cfg.alpha, cfg.d0, cfg.d1, cfg.schedule,
                                        ctx.generator.density.sup_norm());
  const auto cell_dir = cfg.output_dir / "cells" / ("n" + std::to_string(n) + "_seed" + std::to_string(seed));

  GeneratorConfig gen = ctx.generator;
  gen.seed = derive_key(seed, 2 * n);
  EvalSettings eval = cfg.evaluation;
  eval.seed = derive_key(seed, 2 * n + 1);

  try {
    if (cfg.estimator == "oracle") {
      const auto fstar = target_map(ctx.target);
      LocalizationSpec spec{cfg.beta, eps / cfg.beta, cfg.eval_points, derive_key(seed, 2 * n + 2)};
      const auto m = check_localized(fstar, ctx.target, spec, gen.density);
      cell.local_member = m.is_member;
      cell.global_member = m.is_member;
      cell.local_matches_global = true;
      cell.best_measured_prob = m.measured_prob;
      cell.risks = evaluate_risks(fstar, ctx.target, gen, eval);
    } else {
      const auto ds = generate_dataset(gen, n);
      TrainConfig tc;
      tc.epochs = cfg.optimizer.epochs_for(n);
      tc.batch_size = cfg.optimizer.batch_size;
      tc.learning_rate = cfg.optimizer.learning_rate;
      tc.lr_decay = cfg.optimizer.lr_decay;
      tc.decay_every = std::max(1, tc.epochs / std::max(1, cfg.optimizer.decay_phases));
      tc.momentum = cfg.optimizer.momentum;
      tc.optimizer = cfg.optimizer.name;
      tc.balanced_epochs = static_cast<int>(std::ceil(cfg.optimizer.balanced_fraction * tc.epochs));
      tc.warmup_margin = cfg.optimizer.warmup_margin;
      tc.seed = derive_key(seed, 2 * n + 3);
      tc.J = cell.schedule.J;
      tc.M = cell.schedule.M;
      tc.layer_dims = cell.schedule.layer_dims(cfg.d0, cfg.d1);
      tc.restarts = cfg.optimizer.restarts;
      tc.head_permutations = cfg.optimizer.head_permutations;
      LocalizationSpec spec{cfg.beta, eps / cfg.beta, cfg.eval_points, derive_key(seed, 2 * n + 2)};

      const auto pool = train_pool(tc, ds, ctx.target, spec, gen.density);
      const auto& report = pool.report;
      const auto& global = report.candidates[report.global_index];
      cell.global_member = global.membership.is_member;

      std::size_t chosen = nearest_to_localized(report);
      if (report.local_index) {
        const auto local = local_erm_from_pool(pool);
        chosen = *report.local_index;
        cell.local_member = true;
        if (cell.global_member) {
          cell.local_matches_global = local.net.same_parameters(pool.nets[report.global_index]);
        }
      }
      const auto& estimator = pool.nets[chosen];
      cell.best_measured_prob = report.candidates[chosen].membership.measured_prob;
      cell.empirical_risk = report.candidates[chosen].empirical_risk;
      cell.risks = evaluate_risks(estimator.as_map(), ctx.target, gen, eval);

      write_json(cell_dir / "pool.json", report.to_json());
      write_json(cell_dir / "checkpoint.json", estimator.to_checkpoint());
      write_trace(cell_dir / "trace.csv", pool.traces[static_cast<std::size_t>(report.candidates[chosen].restart)]);
    }
  } catch (const Error& e) {
    cell.risks.reset();
    cell.error = e.what();
  }
  if (cfg.record_wall_time) {
    cell.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  write_json(cell_dir / "cell.json", cell_json(cell));
  return cell;
}

}  // namespace

int StudyOptimizer::epochs_for(std::size_t n) const {
  if (epochs) return *epochs;
  const double steps = std::ceil(steps_base * std::pow(static_cast<double>(n) / steps_reference_n, steps_exponent));
  return std::max(1, static_cast<int>(std::ceil(steps * batch_size / static_cast<double>(n))));
}

nlohmann::json StudyOptimizer::to_json() const {
  nlohmann::json doc{{"name", name},
                     {"learning_rate", learning_rate},
                     {"momentum", momentum},
                     {"batch_size", batch_size},
                     {"steps_base", steps_base},
                     {"steps_reference_n", steps_reference_n},
                     {"steps_exponent", steps_exponent},
                     {"lr_decay", lr_decay},
                     {"decay_phases", decay_phases},
                     {"balanced_fraction", balanced_fraction},
                     {"warmup_margin", warmup_margin},
                     {"restarts", restarts},
                     {"head_permutations", head_permutations}};
  if (epochs) doc["epochs"] = *epochs;
  return doc;
}

StudyOptimizer StudyOptimizer::from_json(const nlohmann::json& doc) {
  StudyOptimizer o;
  o.name = doc.value("name", o.name);
  o.learning_rate = doc.value("learning_rate", o.learning_rate);
  o.momentum = doc.value("momentum", o.momentum);
  o.batch_size = doc.value("batch_size", o.batch_size);
  o.steps_base = doc.value("steps_base", o.steps_base);
  o.steps_reference_n = doc.value("steps_reference_n", o.steps_reference_n);
  o.steps_exponent = doc.value("steps_exponent", o.steps_exponent);
  if (doc.contains("epochs")) o.epochs = doc.at("epochs").get<int>();
  o.lr_decay = doc.value("lr_decay", o.lr_decay);
  o.decay_phases = doc.value("decay_phases", o.decay_phases);
  o.balanced_fraction = doc.value("balanced_fraction", o.balanced_fraction);
  o.warmup_margin = doc.value("warmup_margin", o.warmup_margin);
  o.restarts = doc.value("restarts", o.restarts);
  o.head_permutations = doc.value("head_permutations", o.head_permutations);
  return o;
}

void ExperimentConfig::validate() const {
  if (!(alpha > 0.0)) throw InvalidArgument("alpha must be > 0");
  if (d0 < 2) throw InvalidArgument("d0 must be >= 2");
  if (d1 < 2) throw InvalidArgument("d1 must be >= 2");
  if (n_grid.empty()) throw InvalidArgument("n_grid must not be empty");
  if (seeds.empty()) throw InvalidArgument("seeds must not be empty");
  for (std::size_t i = 1; i < n_grid.size(); ++i) {
    if (n_grid[i] <= n_grid[i - 1]) throw InvalidArgument("n_grid must be strictly increasing");
  }
  for (std::size_t n : n_grid) theoretical_epsilon(static_cast<double>(n), alpha, d0);
  if (!(c > 0.0) || c > 1.0) throw InvalidArgument("c must lie in (0, 1]");
  if (!(beta > 0.0) || !(beta < SimplexFrame::build(d1).dproj())) throw InvalidArgument("beta must lie in (0, D_proj)");
  if (estimator != "erm" && estimator != "oracle") throw InvalidArgument("estimator must be erm or oracle");
  if (optimizer.batch_size < 1 || optimizer.restarts < 1) throw InvalidArgument("bad optimizer settings");
  if (!(optimizer.steps_base > 0.0) || !(optimizer.steps_reference_n > 0.0)) {
    throw InvalidArgument("step rule constants must be positive");
  }
  if (optimizer.epochs && *optimizer.epochs < 0) throw InvalidArgument("epochs must be >= 0");
  const auto p = SmoothPartition::from_json(partition);
  if (p.d0() != d0 || p.d1() != d1) throw InvalidArgument("partition dimensions disagree with d0/d1");
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"partition", partition},
          {"alpha", alpha},
          {"d0", d0},
          {"d1", d1},
          {"n_grid", n_grid},
          {"seeds", seeds},
          {"c", c},
          {"beta", beta},
          {"schedule", schedule.to_json()},
          {"optimizer", optimizer.to_json()},
          {"evaluation", {{"nodes", evaluation.nodes}, {"n_mc", evaluation.n_mc}, {"eval_points", eval_points}}},
          {"part_prob_samples", part_prob_samples},
          {"estimator", estimator},
          {"output_dir", output_dir.string()},
          {"record_wall_time", record_wall_time}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  try {
    ExperimentConfig c;
    const auto& part = doc.at("partition");
    c.partition = part.is_string() ? read_json(base_dir / part.get<std::string>()) : part;
    c.alpha = doc.value("alpha", c.alpha);
    c.d0 = doc.value("d0", c.d0);
    c.d1 = doc.value("d1", c.d1);
    c.n_grid = doc.at("n_grid").get<std::vector<std::size_t>>();
    const auto& seeds = doc.at("seeds");
    if (seeds.is_number_integer()) {
      for (std::uint64_t s = 1; s <= seeds.get<std::uint64_t>(); ++s) c.seeds.push_back(s);
    } else {
      c.seeds = seeds.get<std::vector<std::uint64_t>>();
    }
    c.c = doc.value("c", c.c);
    c.beta = doc.value("beta", c.beta);
    if (doc.contains("schedule")) c.schedule = ScheduleConstants::from_json(doc.at("schedule"));
    if (doc.contains("optimizer")) c.optimizer = StudyOptimizer::from_json(doc.at("optimizer"));
    if (doc.contains("evaluation")) {
      const auto& e = doc.at("evaluation");
      c.evaluation.nodes = e.value("nodes", c.evaluation.nodes);
      c.evaluation.n_mc = e.value("n_mc", c.evaluation.n_mc);
      c.eval_points = e.value("eval_points", c.eval_points);
    }
    c.part_prob_samples = doc.value("part_prob_samples", c.part_prob_samples);
    c.estimator = doc.value("estimator", c.estimator);
    const std::filesystem::path out = doc.value("output_dir", c.output_dir.string());
    c.output_dir = out.is_absolute() ? out : base_dir / out;
    c.record_wall_time = doc.value("record_wall_time", c.record_wall_time);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed experiment config: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_json(read_json(path), path.parent_path());
}

std::string results_csv(const RateStudyResult& result, bool record_wall_time) {
  std::string out = std::string(kResultsHeader) + "\n";
  const double nan = std::nan("");
  for (const auto& row : result.rows) {
    const bool ok = row.ok();
    out += std::to_string(row.n) + "," + std::to_string(row.seed) + "," +
           format_number(ok ? row.risks->l2.total : nan) + "," +
           format_number(ok ? row.risks->excess_hinge.value : nan) + "," +
           format_number(ok ? row.risks->misclass.excess : nan) + "," + (row.local_member ? "1" : "0") + "," +
           std::to_string(row.schedule.L) + "," + std::to_string(row.schedule.width) + "," +
           format_number(row.schedule.M) + "," + format_number(record_wall_time ? std::round(row.wall_ms) : 0.0) +
           "\n";
  }
  return out;
}

nlohmann::json RateStudyResult::summary_json() const {
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& g : per_n) {
    grid.push_back({{"n", g.n},
                    {"cells_ok", g.cells_ok},
                    {"median_total_l2", g.median_total_l2},
                    {"median_excess_hinge", g.median_excess_hinge},
                    {"median_excess_misclass", g.median_excess_misclass},
                    {"local_members", g.local_members},
                    {"schedule", g.schedule.to_json()}});
  }
  nlohmann::json doc{{"grid", grid},
                     {"expected_exponent", expected_exponent},
                     {"strictly_decreasing", strictly_decreasing},
                     {"final_over_first", final_over_first},
                     {"global_member_cells", global_member_cells},
                     {"consistent_cells", consistent_cells}};
  doc["slope"] = slope ? slope->to_json() : nlohmann::json(nullptr);
  return doc;
}

RateStudyResult run_rate_study(const ExperimentConfig& cfg) {
  cfg.validate();
  auto partition = SmoothPartition::from_json(cfg.partition);
  StudyContext ctx{cfg, ContrastiveTarget(partition, SimplexFrame::build(cfg.d1)),
                   GeneratorConfig::estimated(partition, cfg.c, kPartProbStream, cfg.part_prob_samples)};

  std::vector<std::pair<std::size_t, std::uint64_t>> cells;
  for (std::size_t n : cfg.n_grid) {
    for (std::uint64_t s : cfg.seeds) cells.emplace_back(n, s);
  }
  RateStudyResult result;
  result.rows.resize(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) { result.rows[i] = run_cell(ctx, cells[i].first, cells[i].second); });

  std::size_t ok_cells = 0;
  for (const auto& row : result.rows) {
    if (row.ok()) ++ok_cells;
    if (row.global_member) ++result.global_member_cells;
    if (row.local_matches_global.value_or(false)) ++result.consistent_cells;
  }
  write_text(cfg.output_dir / "results.csv", results_csv(result, cfg.record_wall_time));
  if (ok_cells == 0) throw StudyError("every rate-study cell failed; first error: " + result.rows.front().error);

  result.expected_exponent = -cfg.alpha / (cfg.alpha + cfg.d0 - 1.0);
  std::vector<std::pair<double, double>> points;
  for (std::size_t n : cfg.n_grid) {
    GridSummary g;
    g.n = n;
    std::vector<double> l2, hinge, misclass;
    for (const auto& row : result.rows) {
      if (row.n != n) continue;
      g.schedule = row.schedule;
      if (!row.ok()) continue;
      ++g.cells_ok;
      if (row.local_member) ++g.local_members;
      l2.push_back(row.risks->l2.total);
      hinge.push_back(row.risks->excess_hinge.value);
      misclass.push_back(row.risks->misclass.excess);
    }
    g.median_total_l2 = median(l2);
    g.median_excess_hinge = median(hinge);
    g.median_excess_misclass = median(misclass);
    if (g.cells_ok > 0) points.emplace_back(static_cast<double>(n), g.median_total_l2);
    result.per_n.push_back(g);
  }

  result.strictly_decreasing = true;
  for (std::size_t i = 1; i < result.per_n.size(); ++i) {
    if (!(result.per_n[i].median_total_l2 < result.per_n[i - 1].median_total_l2)) result.strictly_decreasing = false;
  }
  const double first = result.per_n.front().median_total_l2;
  const double last = result.per_n.back().median_total_l2;
  result.final_over_first = first > 0.0 ? last / first : std::nan("");

  const bool all_zero =
      !points.empty() && std::all_of(points.begin(), points.end(), [](const auto& p) { return p.second == 0.0; });
  if (all_zero) {
    SlopeFit flat;
    flat.used = points.size();
    flat.warnings.push_back("all median risks are zero");
    result.slope = flat;
  } else {
    try {
      result.slope = fit_loglog_slope(points);
    } catch (const InsufficientData&) {
      result.slope.reset();
    }
  }
  write_json(cfg.output_dir / "summary.json", result.summary_json());
  write_json(cfg.output_dir / "config.json", cfg.to_json());
  return result;
}

}  // namespace cbound
