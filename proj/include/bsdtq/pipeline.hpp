#pragma once

// End-to-end runs: data source -> optional target scaling -> optional
// feature engineering -> split -> train each variant -> evaluate. Shared by
// the command-line tool and the acceptance suite.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bsdtq/boosting.hpp"
#include "bsdtq/data.hpp"
#include "bsdtq/eval.hpp"
#include "bsdtq/serialize.hpp"

namespace bsdtq {

struct DataSource {
  // Exactly one of the two is set.
  std::optional<SynthSpec> synthetic;
  std::optional<std::filesystem::path> csv_path;
  CsvSchema schema;
};

struct RunConfig {
  DataSource data;
  // Absent: use the dataset's own feature columns unchanged.
  std::optional<FeatureConfig> features;
  // Per-series min-max scaling of the target to [-1, 1], fit on the rows
  // before the test window.
  bool scale_target = true;
  SplitSpec split;
  BoostConfig boost;
  std::vector<Variant> variants{Variant::BSDTQ, Variant::BSDT};
  std::filesystem::path output_dir = "out";

  // Throws ConfigError.
  void validate() const;
};

// Unknown or malformed fields throw ConfigError naming the field path.
RunConfig run_config_from_json(const Json& doc);
Json run_config_to_json(const RunConfig& config);

// The synthetic protocol: 50 series x 196 steps, 5 relevant + 45 irrelevant
// features, noise 0.1, scaled targets, last 96 steps held out, 100 training
// steps per series. `seed` drives data, split and training.
RunConfig synthetic_experiment_config(std::uint64_t seed);

struct PreparedData {
  SeriesDataset dataset;  // after scaling and feature engineering
  TrainTestSplit parts;
  // Ground-truth weights when the source is synthetic.
  Vector true_weights;
};

PreparedData prepare_data(const RunConfig& config);

struct VariantRun {
  Variant variant;
  TrainResult result;
  EvalReport test_report;
  std::string train_hash;
};

// Trains every configured variant on parts.train and evaluates on parts.test.
std::vector<VariantRun> run_variants(const RunConfig& config, const PreparedData& data);

// Writes manifest.json, model_<V>.json, trace_<V>.json, report_<V>.json,
// curves_<V>.csv and summary.json into config.output_dir.
std::vector<VariantRun> run_synthetic_experiment(const RunConfig& config);

struct WeightsExperimentConfig {
  SynthSpec spec;
  std::size_t runs = 100;
  std::size_t threads = 1;
  std::size_t train_rows_per_series = 100;
  BoostConfig boost;
  std::filesystem::path output_dir = "out";
};

// 3 relevant + 2 irrelevant features, d_out = 1, 50 rounds, 100 runs.
WeightsExperimentConfig weights_experiment_config(std::uint64_t seed);

WeightsExperimentConfig weights_config_from_json(const Json& doc);
Json weights_config_to_json(const WeightsExperimentConfig& config);

// Writes manifest.json and weights_report.json into config.output_dir.
WeightRecoveryReport run_weights_experiment(const WeightsExperimentConfig& config);

// {"format": "bsdtq-manifest-v1", "experiment": name, "config": ...}
Json make_manifest(const std::string& experiment, const Json& config);

struct Manifest {
  std::string experiment;  // "synthetic" or "weights"
  Json config;
};

Manifest read_manifest(const std::filesystem::path& path);

}  // namespace bsdtq
