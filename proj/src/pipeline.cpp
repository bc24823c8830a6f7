#include "bsdtq/pipeline.hpp"

#include <utility>

#include "bsdtq/errors.hpp"

namespace bsdtq {

namespace {

constexpr const char* kManifestFormat = "bsdtq-manifest-v1";

// Rethrows with "<stage>: " prepended, keeping the exception type.
template <class F>
auto in_stage(const std::string& stage, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(stage + ": " + e.what(), "");
  } catch (const ParseError& e) {
    throw ParseError(stage + ": " + e.what(), 0);
  } catch (const DomainError& e) {
    throw DomainError(stage + ": " + e.what());
  } catch (const TrainingError& e) {
    throw TrainingError(stage + ": " + e.what(), e.index());
  }
}

}  // namespace

// ---- RunConfig ------------------------------------------------------------

void RunConfig::validate() const {
  if (data.synthetic.has_value() == data.csv_path.has_value()) {
    throw ConfigError("exactly one of synthetic or csv must be given", "data");
  }
  if (variants.empty()) throw ConfigError("at least one variant is required", "variants");
  if (output_dir.empty()) throw ConfigError("must not be empty", "output_dir");
  try {
    split.validate();
    boost.validate();
    if (features) features->validate();
    if (data.synthetic) data.synthetic->validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what(), "");
  }
}

RunConfig run_config_from_json(const Json& doc) {
  RunConfig c;
  FieldReader r(doc, "");
  {
    FieldReader d(r.at("data"), "data");
    if (d.has("synthetic")) c.data.synthetic = synth_spec_from_json(d.at("synthetic"), d.child("synthetic"));
    if (d.has("csv")) {
      FieldReader f(d.at("csv"), d.child("csv"));
      c.data.csv_path = f.text("path");
      c.data.schema.series_column = f.text("series_column", c.data.schema.series_column);
      c.data.schema.time_column = f.text("time_column", c.data.schema.time_column);
      c.data.schema.target_column = f.text("target_column", c.data.schema.target_column);
      f.finish();
    }
    d.finish();
  }
  if (r.has("features") && !r.at("features").is_null()) {
    c.features = feature_config_from_json(r.at("features"), "features");
  }
  c.scale_target = r.flag("scale_target", c.scale_target);
  if (r.has("split")) c.split = split_spec_from_json(r.at("split"), "split");
  if (r.has("boost")) c.boost = boost_config_from_json(r.at("boost"), "boost");
  if (r.has("variants")) {
    const Json& v = r.at("variants");
    if (!v.is_array()) throw ConfigError("expected an array", "variants");
    c.variants.clear();
    for (const Json& e : v) {
      const auto variant = e.is_string() ? parse_variant(e.get<std::string>()) : std::nullopt;
      if (!variant) throw ConfigError("expected \"BSDTQ\" or \"BSDT\"", "variants");
      c.variants.push_back(*variant);
    }
  }
  c.output_dir = r.text("output_dir", c.output_dir.string());
  r.finish();
  c.validate();
  return c;
}

Json run_config_to_json(const RunConfig& c) {
  Json j;
  Json data;
  if (c.data.synthetic) data["synthetic"] = synth_spec_to_json(*c.data.synthetic);
  if (c.data.csv_path) {
    data["csv"] = {{"path", c.data.csv_path->string()},
                   {"series_column", c.data.schema.series_column},
                   {"time_column", c.data.schema.time_column},
                   {"target_column", c.data.schema.target_column}};
  }
  j["data"] = std::move(data);
  j["features"] = c.features ? feature_config_to_json(*c.features) : Json(nullptr);
  j["scale_target"] = c.scale_target;
  j["split"] = split_spec_to_json(c.split);
  j["boost"] = boost_config_to_json(c.boost);
  Json variants = Json::array();
  for (Variant v : c.variants) variants.push_back(std::string(variant_name(v)));
  j["variants"] = std::move(variants);
  j["output_dir"] = c.output_dir.string();
  return j;
}

RunConfig synthetic_experiment_config(std::uint64_t seed) {
  RunConfig c;
  SynthSpec spec;
  spec.seed = seed;
  c.data.synthetic = spec;
  c.split.seed = seed;
  c.boost.seed = seed;
  return c;
}

// ---- Running --------------------------------------------------------------

PreparedData prepare_data(const RunConfig& config) {
  config.validate();
  PreparedData out;
  SeriesDataset ds = in_stage("load", [&] {
    if (config.data.synthetic) {
      SyntheticData synth = generate_synthetic(*config.data.synthetic);
      out.true_weights = std::move(synth.weights);
      return std::move(synth.dataset);
    }
    return load_csv(*config.data.csv_path, config.data.schema);
  });
  if (config.scale_target) {
    ds = in_stage("scale", [&] { return minmax_scale(ds, config.split.test_len); });
  }
  if (config.features) {
    ds = in_stage("features", [&] { return engineer_features(ds, *config.features); });
  }
  out.parts = in_stage("split", [&] { return split(ds, config.split); });
  out.dataset = std::move(ds);
  return out;
}

std::vector<VariantRun> run_variants(const RunConfig& config, const PreparedData& data) {
  std::vector<VariantRun> runs;
  const auto& train_set = data.parts.train;
  const auto& test_set = data.parts.test;
  const std::string hash = data_hash(train_set.features, train_set.target);
  for (Variant v : config.variants) {
    const std::string name(variant_name(v));
    TrainResult result =
        in_stage("train " + name, [&] { return train(train_set.features, train_set.target, config.boost, v); });
    EvalReport report = in_stage("evaluate " + name, [&] {
      const Vector pred = result.model.predict(test_set.features);
      return mse_curves(forecasts_by_series(test_set, pred), name);
    });
    report.in_sample = data_hash(test_set.features, test_set.target) == hash;
    runs.push_back({v, std::move(result), std::move(report), hash});
  }
  return runs;
}

std::vector<VariantRun> run_synthetic_experiment(const RunConfig& config) {
  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  write_json(make_manifest("synthetic", run_config_to_json(config)), dir / "manifest.json");

  const PreparedData data = prepare_data(config);
  std::vector<VariantRun> runs = run_variants(config, data);

  Json summary;
  for (const auto& run : runs) {
    const std::string name(variant_name(run.variant));
    save_model(run.result.model, dir / ("model_" + name + ".json"), run.train_hash);
    write_json(Json{{"variant", name}, {"train_mse", run.result.loss_trace}}, dir / ("trace_" + name + ".json"));
    write_json(eval_report_to_json(run.test_report), dir / ("report_" + name + ".json"));
    write_curves_csv(run.test_report, dir / ("curves_" + name + ".csv"));
    summary["test_mse"][name] = run.test_report.aggregate_mse;
  }
  const VariantRun* q = nullptr;
  const VariantRun* base = nullptr;
  for (const auto& run : runs) (run.variant == Variant::BSDTQ ? q : base) = &run;
  if (q != nullptr && base != nullptr) {
    summary["ratio_bsdtq_to_bsdt"] = q->test_report.aggregate_mse / base->test_report.aggregate_mse;
  }
  write_json(summary, dir / "summary.json");
  return runs;
}

// ---- Weight recovery ------------------------------------------------------

WeightsExperimentConfig weights_experiment_config(std::uint64_t seed) {
  WeightsExperimentConfig c;
  c.spec.n_relevant = 3;
  c.spec.n_irrelevant = 2;
  c.spec.seed = seed;
  c.boost.seed = seed;
  c.boost.rounds = 50;
  c.boost.transform.output_dim = 1;
  return c;
}

WeightsExperimentConfig weights_config_from_json(const Json& doc) {
  WeightsExperimentConfig c = weights_experiment_config(0);
  FieldReader r(doc, "");
  c.spec = synth_spec_from_json(r.at("synthetic"), "synthetic", c.spec);
  c.runs = r.count("runs", c.runs);
  c.threads = r.count("threads", c.threads);
  c.train_rows_per_series = r.count("train_rows_per_series", c.train_rows_per_series);
  if (r.has("boost")) c.boost = boost_config_from_json(r.at("boost"), "boost", c.boost);
  c.output_dir = r.text("output_dir", c.output_dir.string());
  r.finish();
  if (c.runs == 0) throw ConfigError("must be at least 1", "runs");
  if (c.threads == 0) throw ConfigError("must be at least 1", "threads");
  if (c.boost.transform.kind != TransformKind::Linear || c.boost.transform.output_dim != 1) {
    throw ConfigError("weight recovery needs a linear transform with output_dim 1", "boost.transform");
  }
  return c;
}

Json weights_config_to_json(const WeightsExperimentConfig& c) {
  Json j;
  j["synthetic"] = synth_spec_to_json(c.spec);
  j["runs"] = c.runs;
  // Thread count does not change results; recorded for reference only.
  j["threads"] = c.threads;
  j["train_rows_per_series"] = c.train_rows_per_series;
  j["boost"] = boost_config_to_json(c.boost);
  j["output_dir"] = c.output_dir.string();
  return j;
}

WeightRecoveryReport run_weights_experiment(const WeightsExperimentConfig& config) {
  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  write_json(make_manifest("weights", weights_config_to_json(config)), dir / "manifest.json");
  WeightRecoveryReport report = in_stage("weight recovery", [&] {
    return weight_recovery_experiment(config.spec, config.runs, config.boost,
                                      config.train_rows_per_series, config.threads);
  });
  write_json(weight_report_to_json(report), dir / "weights_report.json");
  return report;
}

// ---- Manifests ------------------------------------------------------------

Json make_manifest(const std::string& experiment, const Json& config) {
  Json j;
  j["format"] = kManifestFormat;
  j["experiment"] = experiment;
  j["config"] = config;
  return j;
}

Manifest read_manifest(const std::filesystem::path& path) {
  const Json doc = read_config_file(path);
  FieldReader r(doc, "");
  if (r.text("format") != kManifestFormat) {
    throw ConfigError(std::string("expected ") + kManifestFormat, "format");
  }
  Manifest m{r.text("experiment"), r.at("config")};
  r.finish();
  if (m.experiment != "synthetic" && m.experiment != "weights") {
    throw ConfigError("expected \"synthetic\" or \"weights\"", "experiment");
  }
  return m;
}

}  // namespace bsdtq
