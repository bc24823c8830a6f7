// bsdtq: command-line front end (synth, train, eval, gradcheck, experiment).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "bsdtq/errors.hpp"
#include "bsdtq/pipeline.hpp"
#include "bsdtq/serialize.hpp"
#include "bsdtq/simd.hpp"

namespace fs = std::filesystem;
using namespace bsdtq;

namespace {

enum Exit : int { kOk = 0, kConfig = 2, kData = 3, kTraining = 4, kOracle = 5 };

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("bsdtq");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("BSDTQ_LOG");
  const std::string level = env != nullptr ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "warn") {
    spdlog::set_level(spdlog::level::warn);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("BSDTQ_LOG='{}' not recognized, using info", level);
  }
}

// Long-form overrides shared by train and experiment.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> rounds;
  std::optional<double> shrinkage;
  std::optional<unsigned> tree_depth;
  std::optional<std::size_t> q_steps;
  std::optional<double> q_lr;
  std::optional<std::string> out;

  void add_to(CLI::App* cmd, bool with_seed) {
    if (with_seed) cmd->add_option("--seed", seed, "Root random seed");
    cmd->add_option("--rounds", rounds, "Boosting rounds K")->check(CLI::PositiveNumber);
    cmd->add_option("--shrinkage", shrinkage, "Shrinkage nu in (0, 1]");
    cmd->add_option("--tree-depth", tree_depth, "Soft tree depth")->check(CLI::PositiveNumber);
    cmd->add_option("--q-steps", q_steps, "Transform gradient steps per round");
    cmd->add_option("--q-lr", q_lr, "Transform learning rate");
    cmd->add_option("--out", out, "Output directory");
  }

  void apply(BoostConfig& boost) const {
    if (rounds) boost.rounds = *rounds;
    if (shrinkage) boost.shrinkage = *shrinkage;
    if (tree_depth) boost.tree_depth = *tree_depth;
    if (q_steps) boost.transform.steps = *q_steps;
    if (q_lr) boost.transform.learning_rate = *q_lr;
    try {
      boost.validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what(), "flags");
    }
  }
};

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  SynthSpec spec;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

int cmd_synth(const SynthArgs& args) {
  SynthSpec spec = args.spec;
  spec.seed = *args.seed;
  try {
    spec.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what(), "flags");
  }
  const SyntheticData synth = generate_synthetic(spec);
  const fs::path dir = args.out;
  fs::create_directories(dir);
  write_csv(synth.dataset, dir / "synthetic.csv");
  Json weights;
  weights["spec"] = synth_spec_to_json(spec);
  weights["feature_names"] = synth.dataset.feature_names;
  weights["weights"] = synth.weights;
  write_json(weights, dir / "weights.json");
  std::cout << "rows " << synth.dataset.rows() << " columns " << synth.dataset.num_features() << '\n';
  spdlog::info("wrote {} and {}", (dir / "synthetic.csv").string(), (dir / "weights.json").string());
  return kOk;
}

// ---- train ----------------------------------------------------------------

int cmd_train(const std::string& config_path, const Overrides& ov) {
  RunConfig config = run_config_from_json(read_config_file(config_path));
  if (ov.seed) config.boost.seed = *ov.seed;
  ov.apply(config.boost);
  if (ov.out) config.output_dir = *ov.out;

  const PreparedData data = prepare_data(config);
  spdlog::info("training on {} rows x {} features", data.parts.train.rows(), data.parts.train.num_features());
  fs::create_directories(config.output_dir);
  write_json(run_config_to_json(config), config.output_dir / "run_config.json");
  for (const auto& run : run_variants(config, data)) {
    const std::string name(variant_name(run.variant));
    save_model(run.result.model, config.output_dir / ("model_" + name + ".json"), run.train_hash);
    write_json(Json{{"variant", name}, {"train_mse", run.result.loss_trace}},
               config.output_dir / ("trace_" + name + ".json"));
    std::cout << name << " train_mse " << run.result.loss_trace.back() << " test_mse "
              << run.test_report.aggregate_mse << '\n';
  }
  return kOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::optional<std::string> config;
  std::optional<std::string> data;
  std::string split = "test";
  std::string out = ".";
  std::optional<std::string> tag;
};

int cmd_eval(const EvalArgs& args) {
  const LoadedModel loaded = load_model(args.model);
  SeriesDataset ds;
  if (args.config) {
    const RunConfig config = run_config_from_json(read_config_file(*args.config));
    PreparedData data = prepare_data(config);
    ds = args.split == "train" ? std::move(data.parts.train) : std::move(data.parts.test);
  } else {
    ds = load_csv(*args.data);
  }
  if (ds.num_features() != loaded.model.input_dim()) {
    throw DomainError("model expects d = " + std::to_string(loaded.model.input_dim()) +
                      " features, data has d = " + std::to_string(ds.num_features()));
  }
  const Vector pred = loaded.model.predict(ds.features);
  EvalReport report = mse_curves(forecasts_by_series(ds, pred),
                                 args.tag.value_or(std::string(variant_name(loaded.model.variant()))));
  report.in_sample = loaded.data_hash && *loaded.data_hash == data_hash(ds.features, ds.target);
  if (report.in_sample) spdlog::warn("evaluation rows are the model's training rows (in-sample)");

  const fs::path dir = args.out;
  fs::create_directories(dir);
  write_json(eval_report_to_json(report), dir / "eval_report.json");
  write_curves_csv(report, dir / "eval_curves.csv");
  std::cout << "aggregate_mse " << report.aggregate_mse << " final_cmse " << report.cmse_t.back()
            << (report.in_sample ? " in-sample" : "") << '\n';
  return kOk;
}

// ---- gradcheck ------------------------------------------------------------

int cmd_gradcheck(const GradCheckConfig& config, const std::optional<std::string>& out) {
  const auto results = run_gradient_checks(config);
  bool all = true;
  for (const auto& r : results) {
    std::printf("%-18s checks %zu max_rel_err %.3e %s\n", std::string(gradient_kind_name(r.kind)).c_str(),
                r.checks, r.max_relative_error, r.passed ? "PASS" : "FAIL");
    all = all && r.passed;
  }
  if (out) write_json(gradcheck_to_json(results, config), *out);
  if (!all) {
    spdlog::error("gradient check failed (tolerance {:g})", config.tolerance);
    return kOracle;
  }
  return kOk;
}

// ---- experiment -----------------------------------------------------------

struct ExperimentArgs {
  std::string name;
  std::optional<std::string> manifest;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> threads;
};

int cmd_experiment(const ExperimentArgs& args, const Overrides& ov) {
  std::string name = args.name;
  Json config_doc;
  if (args.manifest) {
    Manifest m = read_manifest(*args.manifest);
    if (!name.empty() && name != m.experiment) {
      throw ConfigError("manifest is for '" + m.experiment + "', not '" + name + "'", "name");
    }
    name = m.experiment;
    config_doc = std::move(m.config);
  }
  if (name == "synthetic") {
    RunConfig config = args.manifest ? run_config_from_json(config_doc)
                                     : synthetic_experiment_config(ov.seed.value_or(0));
    if (args.manifest && ov.seed) throw ConfigError("cannot override the seed of a manifest", "--seed");
    ov.apply(config.boost);
    if (ov.out) config.output_dir = *ov.out;
    spdlog::info("synthetic experiment -> {}", config.output_dir.string());
    const auto runs = run_synthetic_experiment(config);
    for (const auto& run : runs) {
      std::cout << variant_name(run.variant) << " test_mse " << run.test_report.aggregate_mse
                << " final_cmse " << run.test_report.cmse_t.back() << '\n';
    }
    return kOk;
  }
  if (name == "weights") {
    WeightsExperimentConfig config = args.manifest ? weights_config_from_json(config_doc)
                                                   : weights_experiment_config(ov.seed.value_or(0));
    if (args.manifest && ov.seed) throw ConfigError("cannot override the seed of a manifest", "--seed");
    ov.apply(config.boost);
    if (args.runs) config.runs = *args.runs;
    if (args.threads) config.threads = *args.threads;
    if (ov.out) config.output_dir = *ov.out;
    if (config.runs == 0) throw ConfigError("must be at least 1", "--runs");
    spdlog::info("weight recovery: {} runs on {} thread(s) -> {}", config.runs, config.threads,
                 config.output_dir.string());
    const WeightRecoveryReport r = run_weights_experiment(config);
    for (std::size_t i = 0; i < r.mean_weights.size(); ++i) {
      std::printf("w%zu true %.4f mean %.4f mean_abs %.4f std %.5f\n", i + 1, r.true_weights_normalized[i],
                  r.mean_weights[i], r.mean_abs_weights[i], r.std_weights[i]);
    }
    return kOk;
  }
  throw ConfigError("expected synthetic or weights (or --manifest)", "name");
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Boosted soft decision trees with a learnable input transform"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "bsdtq 0.1.0");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--series", synth.spec.n_series, "Number of series")->capture_default_str();
  synth_cmd->add_option("--horizon", synth.spec.horizon, "Steps per series")->capture_default_str();
  synth_cmd->add_option("--relevant", synth.spec.n_relevant, "Relevant features")->capture_default_str();
  synth_cmd->add_option("--irrelevant", synth.spec.n_irrelevant, "Irrelevant features")->capture_default_str();
  synth_cmd->add_option("--noise", synth.spec.noise_std, "Noise standard deviation")->capture_default_str();
  synth_cmd->add_option("--weight-low", synth.spec.weight_low)->capture_default_str();
  synth_cmd->add_option("--weight-high", synth.spec.weight_high)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Random seed (required)")->required();
  synth_cmd->add_option("--out", synth.out, "Output directory")->capture_default_str();

  std::string train_config;
  Overrides train_ov;
  auto* train_cmd = app.add_subcommand("train", "Train the configured variants");
  train_cmd->add_option("--config", train_config, "Run configuration JSON")->required();
  train_ov.add_to(train_cmd, true);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model");
  eval_cmd->add_option("--model", eval.model, "Model JSON")->required();
  auto* eval_config = eval_cmd->add_option("--config", eval.config, "Run configuration (rebuilds its split)");
  auto* eval_data = eval_cmd->add_option("--data", eval.data, "CSV file evaluated as-is");
  eval_config->excludes(eval_data);
  eval_cmd->add_option("--split", eval.split, "Split to evaluate with --config")
      ->check(CLI::IsMember({"test", "train"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Output directory")->capture_default_str();
  eval_cmd->add_option("--tag", eval.tag, "Model tag in the report");

  GradCheckConfig gc;
  std::optional<std::string> gc_out;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  gc_cmd->add_option("--trials", gc.trials)->capture_default_str();
  gc_cmd->add_option("--min-depth", gc.min_depth)->capture_default_str();
  gc_cmd->add_option("--max-depth", gc.max_depth)->capture_default_str();
  gc_cmd->add_option("--max-input-dim", gc.max_input_dim)->capture_default_str();
  gc_cmd->add_option("--max-output-dim", gc.max_output_dim)->capture_default_str();
  gc_cmd->add_option("--step", gc.step, "Finite-difference step h")->capture_default_str();
  gc_cmd->add_option("--tolerance", gc.tolerance)->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed)->capture_default_str();
  gc_cmd->add_option("--out", gc_out, "Write the results as JSON");
  gc_cmd->add_flag("--inject-sign-flip", gc.inject_sign_flip)->group("");

  ExperimentArgs exp;
  Overrides exp_ov;
  auto* exp_cmd = app.add_subcommand("experiment", "Run a full experiment (synthetic | weights)");
  exp_cmd->add_option("name", exp.name, "synthetic or weights");
  exp_cmd->add_option("--manifest", exp.manifest, "Rerun from a manifest.json");
  exp_cmd->add_option("--runs", exp.runs, "Weight-recovery runs");
  exp_cmd->add_option("--threads", exp.threads, "Weight-recovery worker threads")->check(CLI::PositiveNumber);
  exp_ov.add_to(exp_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  spdlog::debug("kernels: {}", simd::backend_name(simd::active_backend()));
  try {
    if (*synth_cmd) return cmd_synth(synth);
    if (*train_cmd) return cmd_train(train_config, train_ov);
    if (*eval_cmd) {
      if (!eval.config && !eval.data) throw ConfigError("one of --config or --data is required", "eval");
      return cmd_eval(eval);
    }
    if (*gc_cmd) return cmd_gradcheck(gc, gc_out);
    if (*exp_cmd) return cmd_experiment(exp, exp_ov);
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfig;
  } catch (const ParseError& e) {
    spdlog::error("data error: {}", e.what());
    return kData;
  } catch (const DomainError& e) {
    spdlog::error("data error: {}", e.what());
    return kData;
  } catch (const TrainingError& e) {
    spdlog::error("training error: {}", e.what());
    return kTraining;
  } catch (const OracleError& e) {
    spdlog::error("oracle error: {}", e.what());
    return kOracle;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return kOk;
}
