#include "bsdtq/serialize.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bsdtq/errors.hpp"

namespace bsdtq {

// ---- FieldReader ----------------------------------------------------------

FieldReader::FieldReader(const Json& object, std::string path) : object_(object), path_(std::move(path)) {
  if (!object_.is_object()) throw ConfigError("expected a JSON object", path_);
}

bool FieldReader::has(const std::string& key) const { return object_.contains(key); }

std::string FieldReader::child(const std::string& key) const {
  return path_.empty() ? key : path_ + "." + key;
}

const Json& FieldReader::at(const std::string& key) {
  seen_.insert(key);
  auto it = object_.find(key);
  if (it == object_.end()) throw ConfigError("missing required field", child(key));
  return *it;
}

double FieldReader::number(const std::string& key, std::optional<double> fallback) {
  if (!has(key) && fallback) {
    seen_.insert(key);
    return *fallback;
  }
  const Json& v = at(key);
  if (!v.is_number()) throw ConfigError("expected a number", child(key));
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError("expected a finite number", child(key));
  return d;
}

std::uint64_t FieldReader::count(const std::string& key, std::optional<std::uint64_t> fallback) {
  if (!has(key) && fallback) {
    seen_.insert(key);
    return *fallback;
  }
  const Json& v = at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) throw ConfigError("expected a nonnegative integer", child(key));
  throw ConfigError("expected an integer", child(key));
}

bool FieldReader::flag(const std::string& key, std::optional<bool> fallback) {
  if (!has(key) && fallback) {
    seen_.insert(key);
    return *fallback;
  }
  const Json& v = at(key);
  if (!v.is_boolean()) throw ConfigError("expected true or false", child(key));
  return v.get<bool>();
}

std::string FieldReader::text(const std::string& key, std::optional<std::string> fallback) {
  if (!has(key) && fallback) {
    seen_.insert(key);
    return *fallback;
  }
  const Json& v = at(key);
  if (!v.is_string()) throw ConfigError("expected a string", child(key));
  return v.get<std::string>();
}

void FieldReader::finish() const {
  for (const auto& [key, value] : object_.items()) {
    if (!seen_.contains(key)) throw ConfigError("unknown field", child(key));
  }
}

// ---- Files ----------------------------------------------------------------

Json parse_config_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // e.what() already carries "line L, column C"; drop the library's id prefix.
    std::string msg = e.what();
    if (auto pos = msg.find("parse error"); pos != std::string::npos) msg = msg.substr(pos);
    throw ConfigError(msg, source);
  }
}

Json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

void write_json(const Json& doc, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// ---- Core types -----------------------------------------------------------

namespace {

Json numbers(std::span<const double> values) { return Json(Vector(values.begin(), values.end())); }

// Model documents are data: structural problems become ParseError.
template <class F>
auto as_model_data(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw ParseError(what + ": " + e.what(), 0);
  } catch (const DomainError& e) {
    throw ParseError(what + ": " + e.what(), 0);
  }
}

Matrix read_matrix(const Json& doc, const char* rows_key, const char* cols_key, const char* data_key) {
  return Matrix(doc.at(rows_key).get<std::size_t>(), doc.at(cols_key).get<std::size_t>(),
                doc.at(data_key).get<Vector>());
}

}  // namespace

Json tree_to_json(const SoftTree& tree) {
  Json j;
  j["depth"] = tree.depth();
  j["input_dim"] = tree.input_dim();
  j["node_weights"] = numbers(tree.node_weights().data());
  j["node_biases"] = numbers(tree.node_biases());
  j["leaf_values"] = numbers(tree.leaf_values());
  return j;
}

SoftTree tree_from_json(const Json& doc) {
  return as_model_data("tree", [&] {
    const auto depth = doc.at("depth").get<unsigned>();
    const auto dim = doc.at("input_dim").get<std::size_t>();
    if (depth < 1 || depth > SoftTree::kMaxDepth) throw DomainError("depth out of range");
    const std::size_t nodes = (std::size_t{1} << depth) - 1;
    return SoftTree(depth, Matrix(nodes, dim, doc.at("node_weights").get<Vector>()),
                    doc.at("node_biases").get<Vector>(), doc.at("leaf_values").get<Vector>());
  });
}

Json transform_to_json(const Transform& transform) {
  Json j;
  if (const auto* q = std::get_if<LinearMap>(&transform)) {
    j["kind"] = "linear";
    j["rows"] = q->output_dim();
    j["cols"] = q->input_dim();
    j["data"] = numbers(q->matrix().data());
  } else {
    const auto& m = std::get<MlpTransform>(transform);
    j["kind"] = "mlp";
    j["input_dim"] = m.input_dim();
    j["hidden"] = m.hidden_dim();
    j["output_dim"] = m.output_dim();
    j["layer1_weights"] = numbers(m.layer1_weights().data());
    j["layer1_biases"] = numbers(m.layer1_biases());
    j["layer2_weights"] = numbers(m.layer2_weights().data());
    j["layer2_biases"] = numbers(m.layer2_biases());
  }
  return j;
}

Transform transform_from_json(const Json& doc) {
  return as_model_data("transform", [&]() -> Transform {
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "linear") return LinearMap(read_matrix(doc, "rows", "cols", "data"));
    if (kind == "mlp") {
      const auto in = doc.at("input_dim").get<std::size_t>();
      const auto hidden = doc.at("hidden").get<std::size_t>();
      const auto out = doc.at("output_dim").get<std::size_t>();
      return MlpTransform(Matrix(hidden, in, doc.at("layer1_weights").get<Vector>()),
                          doc.at("layer1_biases").get<Vector>(),
                          Matrix(out, hidden, doc.at("layer2_weights").get<Vector>()),
                          doc.at("layer2_biases").get<Vector>());
    }
    throw DomainError("unknown transform kind '" + kind + "'");
  });
}

Json model_to_json(const Ensemble& model, const std::optional<std::string>& hash) {
  Json j;
  j["version"] = kModelFormat;
  j["variant"] = std::string(variant_name(model.variant()));
  j["shrinkage"] = model.shrinkage();
  j["input_dim"] = model.input_dim();
  if (hash) j["training_data_hash"] = *hash;
  Json stages = Json::array();
  for (const Stage& s : model.stages()) {
    Json stage;
    stage["transform"] = transform_to_json(s.transform);
    stage["tree"] = tree_to_json(s.tree);
    stages.push_back(std::move(stage));
  }
  j["stages"] = std::move(stages);
  return j;
}

Ensemble model_from_json(const Json& doc) {
  return as_model_data("model", [&] {
    const auto version = doc.at("version").get<std::string>();
    if (version != kModelFormat) {
      throw DomainError("unsupported version '" + version + "', expected " + kModelFormat);
    }
    const auto variant = parse_variant(doc.at("variant").get<std::string>());
    if (!variant) throw DomainError("unknown variant");
    Ensemble model(*variant, doc.at("shrinkage").get<double>(), doc.at("input_dim").get<std::size_t>());
    for (const Json& stage : doc.at("stages")) {
      model.add_stage(transform_from_json(stage.at("transform")), tree_from_json(stage.at("tree")));
    }
    return model;
  });
}

void save_model(const Ensemble& model, const std::filesystem::path& path,
                const std::optional<std::string>& hash) {
  write_json(model_to_json(model, hash), path);
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model file " + path.string(), 0);
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  LoadedModel out{model_from_json(doc), std::nullopt};
  if (auto it = doc.find("training_data_hash"); it != doc.end() && it->is_string()) {
    out.data_hash = it->get<std::string>();
  }
  return out;
}

std::string data_hash(const Matrix& features, std::span<const double> targets) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(features.rows());
  mix(features.cols());
  for (double v : features.data()) mix(std::bit_cast<std::uint64_t>(v));
  for (double v : targets) mix(std::bit_cast<std::uint64_t>(v));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- Configs --------------------------------------------------------------

namespace {

template <class F>
void validate_as_config(const std::string& path, F&& validate) {
  try {
    validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what(), path);
  }
}

std::vector<std::size_t> counts(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError("expected an array of integers", path);
  std::vector<std::size_t> out;
  for (const Json& e : v) {
    if (!e.is_number_unsigned()) throw ConfigError("expected an array of nonnegative integers", path);
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

}  // namespace

Json boost_config_to_json(const BoostConfig& c) {
  Json j;
  j["rounds"] = c.rounds;
  j["shrinkage"] = c.shrinkage;
  j["tree_depth"] = c.tree_depth;
  j["seed"] = c.seed;
  j["tree"] = {{"steps", c.tree.steps},
               {"learning_rate", c.tree.learning_rate},
               {"init_weight_scale", c.tree.init_weight_scale}};
  j["transform"] = {{"steps", c.transform.steps},
                    {"learning_rate", c.transform.learning_rate},
                    {"warm_start", c.transform.warm_start},
                    {"kind", c.transform.kind == TransformKind::Mlp ? "mlp" : "linear"},
                    {"output_dim", c.transform.output_dim},
                    {"hidden_units", c.transform.hidden_units},
                    {"joint_finetune", c.transform.joint_finetune}};
  return j;
}

BoostConfig boost_config_from_json(const Json& doc, const std::string& path, const BoostConfig& base) {
  BoostConfig c = base;
  FieldReader r(doc, path);
  c.rounds = r.count("rounds", c.rounds);
  c.shrinkage = r.number("shrinkage", c.shrinkage);
  c.tree_depth = static_cast<unsigned>(r.count("tree_depth", c.tree_depth));
  c.seed = r.count("seed", c.seed);
  if (r.has("tree")) {
    FieldReader t(r.at("tree"), r.child("tree"));
    c.tree.steps = t.count("steps", c.tree.steps);
    c.tree.learning_rate = t.number("learning_rate", c.tree.learning_rate);
    c.tree.init_weight_scale = t.number("init_weight_scale", c.tree.init_weight_scale);
    t.finish();
  }
  if (r.has("transform")) {
    FieldReader t(r.at("transform"), r.child("transform"));
    c.transform.steps = t.count("steps", c.transform.steps);
    c.transform.learning_rate = t.number("learning_rate", c.transform.learning_rate);
    c.transform.warm_start = t.flag("warm_start", c.transform.warm_start);
    const std::string kind =
        t.text("kind", c.transform.kind == TransformKind::Mlp ? "mlp" : "linear");
    if (kind == "linear") {
      c.transform.kind = TransformKind::Linear;
    } else if (kind == "mlp") {
      c.transform.kind = TransformKind::Mlp;
    } else {
      throw ConfigError("expected \"linear\" or \"mlp\"", t.child("kind"));
    }
    c.transform.output_dim = t.count("output_dim", c.transform.output_dim);
    c.transform.hidden_units = t.count("hidden_units", c.transform.hidden_units);
    c.transform.joint_finetune = t.flag("joint_finetune", c.transform.joint_finetune);
    t.finish();
  }
  r.finish();
  if (c.tree_depth > SoftTree::kMaxDepth) {
    throw ConfigError("must be at most " + std::to_string(SoftTree::kMaxDepth), r.child("tree_depth"));
  }
  validate_as_config(path, [&] { c.validate(); });
  return c;
}

Json synth_spec_to_json(const SynthSpec& s) {
  Json j;
  j["series"] = s.n_series;
  j["horizon"] = s.horizon;
  j["relevant"] = s.n_relevant;
  j["irrelevant"] = s.n_irrelevant;
  j["noise_std"] = s.noise_std;
  j["weight_low"] = s.weight_low;
  j["weight_high"] = s.weight_high;
  j["seed"] = s.seed;
  return j;
}

SynthSpec synth_spec_from_json(const Json& doc, const std::string& path, const SynthSpec& base) {
  SynthSpec s = base;
  FieldReader r(doc, path);
  s.n_series = r.count("series", s.n_series);
  s.horizon = r.count("horizon", s.horizon);
  s.n_relevant = r.count("relevant", s.n_relevant);
  s.n_irrelevant = r.count("irrelevant", s.n_irrelevant);
  s.noise_std = r.number("noise_std", s.noise_std);
  s.weight_low = r.number("weight_low", s.weight_low);
  s.weight_high = r.number("weight_high", s.weight_high);
  s.seed = r.count("seed");
  r.finish();
  validate_as_config(path, [&] { s.validate(); });
  return s;
}

Json split_spec_to_json(const SplitSpec& s) {
  Json j;
  j["test_len"] = s.test_len;
  j["train_samples"] = s.train_samples;
  j["seed"] = s.seed;
  j["mode"] = s.mode == SplitMode::ContiguousPrefix ? "prefix" : "random";
  return j;
}

SplitSpec split_spec_from_json(const Json& doc, const std::string& path, const SplitSpec& base) {
  SplitSpec s = base;
  FieldReader r(doc, path);
  s.test_len = r.count("test_len", s.test_len);
  s.train_samples = r.count("train_samples", s.train_samples);
  s.seed = r.count("seed", s.seed);
  const std::string mode = r.text("mode", s.mode == SplitMode::ContiguousPrefix ? "prefix" : "random");
  if (mode == "random") {
    s.mode = SplitMode::RandomSubset;
  } else if (mode == "prefix") {
    s.mode = SplitMode::ContiguousPrefix;
  } else {
    throw ConfigError("expected \"random\" or \"prefix\"", r.child("mode"));
  }
  r.finish();
  validate_as_config(path, [&] { s.validate(); });
  return s;
}

Json feature_config_to_json(const FeatureConfig& c) {
  Json j;
  j["lags"] = c.lags;
  j["windows"] = c.windows;
  Json stats = Json::array();
  for (RollingStat s : c.stats) stats.push_back(std::string(rolling_stat_name(s)));
  j["stats"] = std::move(stats);
  j["calendar_periods"] = c.calendar_periods;
  return j;
}

FeatureConfig feature_config_from_json(const Json& doc, const std::string& path) {
  FeatureConfig c = FeatureConfig::defaults();
  FieldReader r(doc, path);
  if (r.has("lags")) c.lags = counts(r.at("lags"), r.child("lags"));
  if (r.has("windows")) c.windows = counts(r.at("windows"), r.child("windows"));
  if (r.has("calendar_periods")) {
    c.calendar_periods = counts(r.at("calendar_periods"), r.child("calendar_periods"));
  }
  if (r.has("stats")) {
    const Json& v = r.at("stats");
    if (!v.is_array()) throw ConfigError("expected an array of names", r.child("stats"));
    c.stats.clear();
    for (const Json& e : v) {
      const auto stat = e.is_string() ? parse_rolling_stat(e.get<std::string>()) : std::nullopt;
      if (!stat) throw ConfigError("expected mean, std, min or max", r.child("stats"));
      c.stats.push_back(*stat);
    }
  }
  r.finish();
  validate_as_config(path, [&] { c.validate(); });
  return c;
}

// ---- Reports --------------------------------------------------------------

Json eval_report_to_json(const EvalReport& report) {
  Json j;
  j["model_tag"] = report.model_tag;
  j["in_sample"] = report.in_sample;
  j["aggregate_mse"] = report.aggregate_mse;
  j["final_cmse"] = report.cmse_t.empty() ? 0.0 : report.cmse_t.back();
  j["mse_t"] = report.mse_t;
  j["cmse_t"] = report.cmse_t;
  Json per = Json::object();
  for (const auto& [id, mse] : report.per_series_mse) per[std::to_string(id)] = mse;
  j["per_series_mse"] = std::move(per);
  return j;
}

Json weight_report_to_json(const WeightRecoveryReport& report) {
  Json j;
  j["runs"] = report.runs;
  j["training_rows"] = report.training_rows;
  j["true_weights_normalized"] = report.true_weights_normalized;
  j["mean_weights"] = report.mean_weights;
  j["mean_abs_weights"] = report.mean_abs_weights;
  j["std_weights"] = report.std_weights;
  return j;
}

Json gradcheck_to_json(const std::vector<GradCheckResult>& results, const GradCheckConfig& config) {
  Json j;
  j["trials"] = config.trials;
  j["min_depth"] = config.min_depth;
  j["max_depth"] = config.max_depth;
  j["max_input_dim"] = config.max_input_dim;
  j["max_output_dim"] = config.max_output_dim;
  j["step"] = config.step;
  j["tolerance"] = config.tolerance;
  j["seed"] = config.seed;
  bool all = true;
  Json rows = Json::array();
  for (const auto& r : results) {
    rows.push_back({{"gradient", std::string(gradient_kind_name(r.kind))},
                    {"checks", r.checks},
                    {"max_relative_error", r.max_relative_error},
                    {"passed", r.passed}});
    all = all && r.passed;
  }
  j["results"] = std::move(rows);
  j["passed"] = all;
  return j;
}

void write_curves_csv(const EvalReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto fmt = [](double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
  };
  out << "t,mse,cmse\n";
  for (std::size_t t = 0; t < report.mse_t.size(); ++t) {
    out << t + 1 << ',' << fmt(report.mse_t[t]) << ',' << fmt(report.cmse_t[t]) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace bsdtq
