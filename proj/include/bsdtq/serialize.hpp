#pragma once

// JSON documents for models, configs and reports, plus the curve CSV.
// Objects keep insertion order and doubles print as shortest round-trip
// decimals, so equal values always serialize to identical bytes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "bsdtq/boosting.hpp"
#include "bsdtq/data.hpp"
#include "bsdtq/eval.hpp"

namespace bsdtq {

using Json = nlohmann::ordered_json;

inline constexpr const char* kModelFormat = "bsdtq-model-v1";

// Reads the fields of one JSON object, tracking the path for diagnostics.
// Every accessor throws ConfigError naming the offending field; finish()
// rejects keys that were never read (typos).
class FieldReader {
 public:
  FieldReader(const Json& object, std::string path);

  bool has(const std::string& key) const;
  const Json& at(const std::string& key);
  std::string child(const std::string& key) const;

  double number(const std::string& key, std::optional<double> fallback = std::nullopt);
  std::uint64_t count(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt);
  bool flag(const std::string& key, std::optional<bool> fallback = std::nullopt);
  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt);

  void finish() const;

 private:
  const Json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

// Parses JSON text; syntax errors become ConfigError naming the line and column.
Json parse_config_text(const std::string& text, const std::string& source);
Json read_config_file(const std::filesystem::path& path);

// Writes `doc.dump(2)` plus a trailing newline.
void write_json(const Json& doc, const std::filesystem::path& path);

// ---- Core types -----------------------------------------------------------

Json tree_to_json(const SoftTree& tree);
// Structural errors throw ParseError (models are data, not configuration).
SoftTree tree_from_json(const Json& doc);

Json transform_to_json(const Transform& transform);
Transform transform_from_json(const Json& doc);

Json model_to_json(const Ensemble& model, const std::optional<std::string>& data_hash = std::nullopt);
Ensemble model_from_json(const Json& doc);

struct LoadedModel {
  Ensemble model;
  std::optional<std::string> data_hash;
};

void save_model(const Ensemble& model, const std::filesystem::path& path,
                const std::optional<std::string>& data_hash = std::nullopt);
// Throws ParseError on unreadable, malformed or wrong-version files.
LoadedModel load_model(const std::filesystem::path& path);

// FNV-1a over the bit patterns of the features and targets, as 16 hex digits.
std::string data_hash(const Matrix& features, std::span<const double> targets);

// ---- Configs (ConfigError on bad fields) ----------------------------------

Json boost_config_to_json(const BoostConfig& config);
BoostConfig boost_config_from_json(const Json& doc, const std::string& path = "boost",
                                   const BoostConfig& base = {});

Json synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const Json& doc, const std::string& path = "synthetic",
                               const SynthSpec& base = {});

Json split_spec_to_json(const SplitSpec& spec);
SplitSpec split_spec_from_json(const Json& doc, const std::string& path = "split",
                               const SplitSpec& base = {});

Json feature_config_to_json(const FeatureConfig& config);
FeatureConfig feature_config_from_json(const Json& doc, const std::string& path = "features");

// ---- Reports --------------------------------------------------------------

Json eval_report_to_json(const EvalReport& report);
Json weight_report_to_json(const WeightRecoveryReport& report);
Json gradcheck_to_json(const std::vector<GradCheckResult>& results, const GradCheckConfig& config);

// Columns t (1-based), mse, cmse.
void write_curves_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace bsdtq
