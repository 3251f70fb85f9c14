#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cbound/contrastive.hpp"
#include "cbound/erm.hpp"
#include "cbound/error.hpp"
#include "cbound/evaluation.hpp"
#include "cbound/io.hpp"
#include "cbound/pairgen.hpp"
#include "cbound/parallel.hpp"
#include "cbound/rate_study.hpp"
#include "cbound/schedule.hpp"
#include "cbound/selftest.hpp"

namespace fs = std::filesystem;
using namespace cbound;

namespace {

struct Loaded {
  nlohmann::json doc;
  fs::path base;
};

Loaded load_config(const fs::path& path) { return {read_json(path), path.parent_path()}; }

SmoothPartition partition_of(const Loaded& cfg) {
  const auto& part = cfg.doc.at("partition");
  return SmoothPartition::from_json(part.is_string() ? read_json(cfg.base / part.get<std::string>()) : part);
}

GeneratorConfig generator_of(const Loaded& cfg, std::uint64_t seed) {
  return GeneratorConfig::estimated(partition_of(cfg), cfg.doc.value("c", 0.9), seed,
                                    cfg.doc.value("part_prob_samples", std::size_t{200000}));
}

int cmd_gen(const fs::path& config, std::optional<std::uint64_t> seed, std::optional<std::size_t> n,
            const fs::path& out) {
  const auto cfg = load_config(config);
  const std::uint64_t s = seed.value_or(cfg.doc.value("seed", std::uint64_t{1}));
  const std::size_t count = n.value_or(cfg.doc.at("n").get<std::size_t>());
  const auto gen = generator_of(cfg, s);
  const auto ds = generate_dataset(gen, count);
  write_dataset(ds, out);
  std::printf("wrote %zu pairs to %s (fingerprint %s)\n", ds.size(), out.c_str(), ds.fingerprint.c_str());
  return 0;
}

int cmd_train(const fs::path& config, std::optional<std::uint64_t> seed, const fs::path& data, const fs::path& out) {
  const auto cfg = load_config(config);
  auto tc = TrainConfig::from_json(cfg.doc.value("train", nlohmann::json::object()));
  if (seed) tc.seed = *seed;
  const auto ds = read_dataset(data);
  const auto partition = partition_of(cfg);
  const ContrastiveTarget target(partition, SimplexFrame::build(partition.d1()));
  const double alpha = cfg.doc.value("alpha", 2.0);
  const double eps = theoretical_epsilon(static_cast<double>(ds.size()), alpha, partition.d0());
  if (tc.layer_dims.empty()) {
    const auto constants = ScheduleConstants::from_json(cfg.doc.value("schedule", nlohmann::json::object()));
    const auto schedule = network_size_schedule(eps, alpha, partition.d0(), partition.d1(), constants);
    tc.layer_dims = schedule.layer_dims(partition.d0(), partition.d1());
    tc.J = schedule.J;
    tc.M = schedule.M;
  }
  fs::create_directories(out);
  write_json(out / "train_config.json", tc.to_json());
  if (!cfg.doc.contains("localization")) {
    const auto result = train_global_erm(tc, ds, target.frame);
    write_json(out / "checkpoint.json", result.net.to_checkpoint());
    write_trace(out / "trace.csv", result.trace);
    std::printf("global ERM: empirical risk %s at epoch %d\n", format_number(result.empirical_risk).c_str(),
                result.best_epoch);
    return 0;
  }
  const auto& loc = cfg.doc.at("localization");
  LocalizationSpec spec;
  spec.beta = loc.at("beta").get<double>();
  spec.beta0 = loc.value("beta0", eps / spec.beta);
  spec.eval_points = loc.value("eval_points", spec.eval_points);
  spec.seed = loc.value("seed", derive_key(tc.seed, 0x6c6f63ULL));
  const auto pool = train_pool(tc, ds, target, spec);
  write_json(out / "pool.json", pool.report.to_json());
  for (std::size_t r = 0; r < pool.traces.size(); ++r) {
    write_trace(out / ("trace_restart" + std::to_string(r) + ".csv"), pool.traces[r]);
  }
  const auto local = local_erm_from_pool(pool);
  write_json(out / "checkpoint.json", local.net.to_checkpoint());
  const auto& chosen = pool.report.candidates[*pool.report.local_index];
  std::printf("local ERM: candidate %zu, empirical risk %s, measured probability %s\n", *pool.report.local_index,
              format_number(chosen.empirical_risk).c_str(), format_number(chosen.membership.measured_prob).c_str());
  return 0;
}

int cmd_eval(const fs::path& config, std::optional<std::uint64_t> seed, const fs::path& checkpoint,
             const fs::path& out) {
  const auto cfg = load_config(config);
  EvalSettings settings;
  const auto ev = cfg.doc.value("evaluation", nlohmann::json::object());
  settings.nodes = ev.value("nodes", settings.nodes);
  settings.n_mc = ev.value("n_mc", settings.n_mc);
  settings.seed = seed.value_or(ev.value("seed", settings.seed));
  const auto gen = generator_of(cfg, settings.seed);
  const ContrastiveTarget target(gen.partition, SimplexFrame::build(gen.partition.d1()));
  const auto net = SimplexNet::from_checkpoint(read_json(checkpoint));
  const auto report = evaluate_risks(net.as_map(), target, gen, settings);
  fs::create_directories(out);
  write_json(out / "report.json", report.to_json());
  write_text(out / "report.csv", RiskReport::csv_header() + "\n" + report.csv_row() + "\n");
  std::printf("%s\n%s\n", RiskReport::csv_header().c_str(), report.csv_row().c_str());
  return 0;
}

int cmd_rate_study(const fs::path& config, std::optional<std::uint64_t> seed, const std::string& output_dir) {
  auto cfg = ExperimentConfig::load(config);
  if (seed) cfg.seeds = {*seed};
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  std::printf("rate study: %zu cells on %zu workers\n", cfg.n_grid.size() * cfg.seeds.size(), worker_count());
  const auto result = run_rate_study(cfg);
  for (const auto& g : result.per_n) {
    std::printf("n=%zu  median total_l2 %s  excess_hinge %s  excess_misclass %s  local members %zu/%zu\n", g.n,
                format_number(g.median_total_l2).c_str(), format_number(g.median_excess_hinge).c_str(),
                format_number(g.median_excess_misclass).c_str(), g.local_members, g.cells_ok);
  }
  if (result.slope) {
    std::printf("slope %s  95%% CI [%s, %s]  expected %s\n", format_number(result.slope->slope).c_str(),
                format_number(result.slope->ci_low).c_str(), format_number(result.slope->ci_high).c_str(),
                format_number(result.expected_exponent).c_str());
  }
  for (const auto& row : result.rows) {
    if (!row.ok()) std::fprintf(stderr, "cell n=%zu seed=%llu failed: %s\n", row.n,
                                static_cast<unsigned long long>(row.seed), row.error.c_str());
  }
  std::printf("results in %s\n", (cfg.output_dir / "results.csv").c_str());
  return 0;
}

int cmd_selftest(const SelftestHooks& hooks) {
  const auto report = run_selftest(hooks);
  std::fputs(report.table().c_str(), stdout);
  return report.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive simplex-network estimator: data generation, training, evaluation and rate studies"};
  app.require_subcommand(1);

  fs::path config, data, checkpoint, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
  std::string output_dir;
  SelftestHooks hooks;

  auto* gen = app.add_subcommand("gen", "Generate a pairwise dataset");
  gen->add_option("-c,--config", config, "Generator config (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--seed", seed, "Override the config seed");
  gen->add_option("-n,--n", n, "Override the sample size");
  gen->add_option("-o,--out", out, "Dataset CSV path")->required();

  auto* train = app.add_subcommand("train", "Train a global or local ERM on a dataset");
  train->add_option("-c,--config", config, "Training config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Override the training seed");
  train->add_option("-d,--data", data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate the risks of a checkpoint");
  eval->add_option("-c,--config", config, "Evaluation config (JSON)")->required()->check(CLI::ExistingFile);
  eval->add_option("--seed", seed, "Override the evaluation seed");
  eval->add_option("-k,--checkpoint", checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("-o,--out", out, "Output directory")->required();

  auto* study = app.add_subcommand("rate-study", "Run the rate experiment over an n grid");
  study->add_option("-c,--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  study->add_option("--seed", seed, "Run a single seed instead of the configured list");
  study->add_option("-o,--output-dir", output_dir, "Override the output directory");

  auto* self = app.add_subcommand("selftest", "Run the invariant suites");
  self->add_flag("--perturb-vertex", hooks.perturb_vertex, "Inject a vertex perturbation");
  self->add_flag("--flip-hinge-sign", hooks.flip_hinge_sign, "Inject a wrong hinge sign");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(config, seed, n, out);
    if (*train) return cmd_train(config, seed, data, out);
    if (*eval) return cmd_eval(config, seed, checkpoint, out);
    if (*study) return cmd_rate_study(config, seed, output_dir);
    if (*self) return cmd_selftest(hooks);
  } catch (const LocalErmInfeasible& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  return 1;
}
