#include "bsdtq/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "bsdtq/errors.hpp"
#include "bsdtq/random.hpp"

namespace bsdtq {

namespace {

std::string series_name(const SeriesDataset& ds, std::int64_t id) {
  auto it = ds.series_labels.find(id);
  return it != ds.series_labels.end() ? it->second : std::to_string(id);
}

}  // namespace

// ---- SeriesDataset --------------------------------------------------------

std::vector<std::pair<std::size_t, std::size_t>> SeriesDataset::series_ranges() const {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= rows(); ++i) {
    if (i == rows() || series_id[i] != series_id[begin]) {
      ranges.emplace_back(begin, i);
      begin = i;
    }
  }
  return ranges;
}

SeriesDataset SeriesDataset::select_rows(const std::vector<std::size_t>& rows) const {
  SeriesDataset out;
  out.features = features.select_rows(rows);
  out.target.reserve(rows.size());
  out.series_id.reserve(rows.size());
  out.time_index.reserve(rows.size());
  for (std::size_t r : rows) {
    out.target.push_back(target[r]);
    out.series_id.push_back(series_id[r]);
    out.time_index.push_back(time_index[r]);
  }
  out.feature_names = feature_names;
  out.scaling = scaling;
  out.series_labels = series_labels;
  return out;
}

void SeriesDataset::validate() const {
  const std::size_t n = rows();
  if (features.rows() != n || series_id.size() != n || time_index.size() != n) {
    throw DomainError("dataset columns have inconsistent lengths");
  }
  if (feature_names.size() != features.cols()) {
    throw DomainError("dataset has " + std::to_string(features.cols()) + " feature columns but " +
                      std::to_string(feature_names.size()) + " names");
  }
  std::set<std::string> names(feature_names.begin(), feature_names.end());
  if (names.size() != feature_names.size()) throw DomainError("duplicate feature names");
  std::set<std::int64_t> seen;
  for (const auto& [begin, end] : series_ranges()) {
    if (!seen.insert(series_id[begin]).second) {
      throw DomainError("rows of series " + series_name(*this, series_id[begin]) +
                        " are not contiguous");
    }
    for (std::size_t i = begin + 1; i < end; ++i) {
      if (time_index[i] <= time_index[i - 1]) {
        throw DomainError("time index not strictly increasing in series " +
                          series_name(*this, series_id[begin]));
      }
    }
  }
}

// ---- Synthetic data -------------------------------------------------------

void SynthSpec::validate() const {
  if (n_series == 0 || horizon == 0) throw DomainError("synthetic spec needs series and horizon");
  if (n_relevant == 0) throw DomainError("synthetic spec needs at least one relevant feature");
  if (!(noise_std >= 0.0)) throw DomainError("noise_std must be nonnegative");
  if (!(weight_low <= weight_high)) throw DomainError("weight_low must not exceed weight_high");
}

SyntheticData generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const std::size_t d = spec.n_relevant + spec.n_irrelevant;
  const std::size_t n = spec.n_series * spec.horizon;

  Vector weights(d, 0.0);
  Rng weight_rng(derive_seed(spec.seed, 0));
  for (std::size_t i = 0; i < spec.n_relevant; ++i) {
    weights[i] = weight_rng.uniform(spec.weight_low, spec.weight_high);
  }

  SeriesDataset ds;
  ds.features = Matrix(n, d);
  ds.target.resize(n);
  ds.series_id.resize(n);
  ds.time_index.resize(n);
  for (std::size_t i = 0; i < spec.n_relevant; ++i) ds.feature_names.push_back("rel_" + std::to_string(i + 1));
  for (std::size_t i = 0; i < spec.n_irrelevant; ++i) ds.feature_names.push_back("irr_" + std::to_string(i + 1));

  Rng feature_rng(derive_seed(spec.seed, 1));
  Rng noise_rng(derive_seed(spec.seed, 2));
  std::size_t row = 0;
  for (std::size_t s = 0; s < spec.n_series; ++s) {
    for (std::size_t t = 0; t < spec.horizon; ++t, ++row) {
      auto x = ds.features.row(row);
      for (double& v : x) v = feature_rng.normal();
      double y = 0.0;
      for (std::size_t i = 0; i < spec.n_relevant; ++i) y += weights[i] * x[i];
      ds.target[row] = y + spec.noise_std * noise_rng.normal();
      ds.series_id[row] = static_cast<std::int64_t>(s);
      ds.time_index[row] = static_cast<std::int64_t>(t);
    }
  }
  return {std::move(ds), std::move(weights)};
}

// ---- CSV ------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no);
  fields.push_back(std::move(field));
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  s = trim(s);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

// YYYY-MM-DD[(T| )HH:MM[:SS[.fff]]][Z] -> Unix seconds (fraction truncated).
std::optional<std::int64_t> parse_iso8601(std::string_view s) {
  s = trim(s);
  auto digits = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    if (pos + len > s.size()) return std::nullopt;
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (s[i] < '0' || s[i] > '9') return std::nullopt;
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  auto year = digits(0, 4);
  auto month = digits(5, 2);
  auto day = digits(8, 2);
  if (!year || !month || !day || s.size() < 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{*year},
                                        std::chrono::month{static_cast<unsigned>(*month)},
                                        std::chrono::day{static_cast<unsigned>(*day)}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t seconds = std::chrono::sys_days{ymd}.time_since_epoch().count() * 86400LL;
  std::size_t pos = 10;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    auto hh = digits(pos + 1, 2);
    auto mm = digits(pos + 4, 2);
    if (!hh || !mm || s[pos + 3] != ':' || *hh > 23 || *mm > 59) return std::nullopt;
    seconds += *hh * 3600LL + *mm * 60LL;
    pos += 6;
    if (pos < s.size() && s[pos] == ':') {
      auto ss = digits(pos + 1, 2);
      if (!ss || *ss > 60) return std::nullopt;
      seconds += *ss;
      pos += 3;
      if (pos < s.size() && s[pos] == '.') {
        ++pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
      }
    }
  }
  if (pos < s.size() && s[pos] == 'Z') ++pos;
  if (pos != s.size()) return std::nullopt;
  return seconds;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

SeriesDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line, line_no);
      break;
    }
  }
  if (header.empty()) throw ParseError("empty CSV file " + path.string(), 0);
  for (auto& h : header) h = std::string(trim(h));
  if (line_no == 1 && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);

  auto find_column = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto series_col = find_column(schema.series_column);
  const auto time_col = find_column(schema.time_column);
  const auto target_col = find_column(schema.target_column);
  if (!time_col) throw ParseError("missing time column '" + schema.time_column + "'", line_no);
  if (!target_col) throw ParseError("missing target column '" + schema.target_column + "'", line_no);

  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == *time_col || c == *target_col || (series_col && c == *series_col)) continue;
    feature_cols.push_back(c);
    feature_names.push_back(header[c]);
  }

  struct Row {
    std::int64_t series;
    std::int64_t time;
    double y;
    std::vector<double> x;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::unordered_map<std::string, std::int64_t> label_ids;
  std::map<std::int64_t, std::string> labels;
  std::vector<std::int64_t> series_order;
  std::set<std::int64_t> series_seen;
  bool textual_ids = false;
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> keys;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line, line_no);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()),
                       line_no);
    }
    Row row{0, 0, 0.0, {}, line_no};
    if (series_col) {
      const std::string label(trim(fields[*series_col]));
      if (label.empty()) throw ParseError("empty series id", line_no);
      auto as_int = parse_int(label);
      if (as_int && !textual_ids) {
        row.series = *as_int;
      } else {
        if (!textual_ids) {
          if (!rows.empty()) throw ParseError("series ids mix integers and text", line_no);
          textual_ids = true;
        }
        auto [it, inserted] = label_ids.emplace(label, static_cast<std::int64_t>(label_ids.size()));
        if (inserted) labels[it->second] = label;
        row.series = it->second;
      }
    }
    const auto& time_text = fields[*time_col];
    if (auto t = parse_int(time_text)) {
      row.time = *t;
    } else if (auto iso = parse_iso8601(time_text)) {
      row.time = *iso;
    } else {
      throw ParseError("unparseable time value '" + std::string(trim(time_text)) + "'", line_no);
    }
    auto y = parse_double(fields[*target_col]);
    if (!y) {
      throw ParseError("non-numeric target value '" + std::string(trim(fields[*target_col])) + "'",
                       line_no);
    }
    row.y = *y;
    row.x.reserve(feature_cols.size());
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      auto v = parse_double(fields[feature_cols[k]]);
      if (!v) {
        throw ParseError("non-numeric value in column '" + feature_names[k] + "'", line_no);
      }
      row.x.push_back(*v);
    }
    auto [it, inserted] = keys.emplace(std::make_pair(row.series, row.time), line_no);
    if (!inserted) {
      throw ParseError("duplicate (series, time) key, first seen on line " +
                           std::to_string(it->second),
                       line_no);
    }
    if (series_seen.insert(row.series).second) series_order.push_back(row.series);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("CSV file has no data rows", line_no);

  std::map<std::int64_t, std::size_t> rank;
  for (std::size_t i = 0; i < series_order.size(); ++i) rank[series_order[i]] = i;
  std::stable_sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) {
    if (a.series != b.series) return rank[a.series] < rank[b.series];
    return a.time < b.time;
  });

  SeriesDataset ds;
  ds.features = Matrix(rows.size(), feature_cols.size());
  ds.feature_names = std::move(feature_names);
  ds.series_labels = std::move(labels);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ds.target.push_back(rows[i].y);
    ds.series_id.push_back(rows[i].series);
    ds.time_index.push_back(rows[i].time);
    std::copy(rows[i].x.begin(), rows[i].x.end(), ds.features.row(i).begin());
  }
  try {
    ds.validate();
  } catch (const DomainError& e) {
    throw ParseError(e.what(), 0);
  }
  return ds;
}

void write_csv(const SeriesDataset& dataset, const std::filesystem::path& path,
               const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << schema.series_column << ',' << schema.time_column << ',' << schema.target_column;
  for (const auto& name : dataset.feature_names) out << ',' << quote_if_needed(name);
  out << '\n';
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    out << quote_if_needed(series_name(dataset, dataset.series_id[i])) << ','
        << dataset.time_index[i] << ',' << format_double(dataset.target[i]);
    for (double v : dataset.features.row(i)) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// ---- Scaling --------------------------------------------------------------

SeriesDataset minmax_scale(const SeriesDataset& dataset, std::size_t holdout) {
  SeriesDataset out = dataset;
  out.scaling.clear();
  for (const auto& [begin, end] : dataset.series_ranges()) {
    const std::int64_t id = dataset.series_id[begin];
    const std::size_t len = end - begin;
    if (len <= holdout) {
      throw DomainError("series " + series_name(dataset, id) + " has no rows outside the holdout");
    }
    const auto ref_begin = dataset.target.begin() + static_cast<std::ptrdiff_t>(begin);
    const auto ref_end = ref_begin + static_cast<std::ptrdiff_t>(len - holdout);
    const auto [lo, hi] = std::minmax_element(ref_begin, ref_end);
    if (!(*lo < *hi)) {
      throw DomainError("series " + series_name(dataset, id) + " is constant; cannot min-max scale");
    }
    const SeriesScaling sc{*lo, *hi};
    out.scaling[id] = sc;
    for (std::size_t i = begin; i < end; ++i) {
      out.target[i] = 2.0 * (dataset.target[i] - sc.min) / (sc.max - sc.min) - 1.0;
    }
  }
  return out;
}

Vector inverse_scale_values(const SeriesDataset& dataset, std::int64_t series,
                            const Vector& values) {
  auto it = dataset.scaling.find(series);
  if (it == dataset.scaling.end()) {
    throw DomainError("no scaling recorded for series " + series_name(dataset, series));
  }
  const SeriesScaling& sc = it->second;
  Vector out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = (values[i] + 1.0) * 0.5 * (sc.max - sc.min) + sc.min;
  }
  return out;
}

SeriesDataset inverse_scale(const SeriesDataset& dataset) {
  SeriesDataset out = dataset;
  for (const auto& [begin, end] : dataset.series_ranges()) {
    const std::int64_t id = dataset.series_id[begin];
    const Vector slice(dataset.target.begin() + static_cast<std::ptrdiff_t>(begin),
                       dataset.target.begin() + static_cast<std::ptrdiff_t>(end));
    const Vector restored = inverse_scale_values(dataset, id, slice);
    std::copy(restored.begin(), restored.end(), out.target.begin() + static_cast<std::ptrdiff_t>(begin));
  }
  out.scaling.clear();
  return out;
}

// ---- Feature engineering --------------------------------------------------

std::string_view rolling_stat_name(RollingStat stat) noexcept {
  switch (stat) {
    case RollingStat::Mean:
      return "mean";
    case RollingStat::Std:
      return "std";
    case RollingStat::Min:
      return "min";
    case RollingStat::Max:
      return "max";
  }
  return "?";
}

std::optional<RollingStat> parse_rolling_stat(std::string_view text) noexcept {
  for (RollingStat s : {RollingStat::Mean, RollingStat::Std, RollingStat::Min, RollingStat::Max}) {
    if (rolling_stat_name(s) == text) return s;
  }
  return std::nullopt;
}

namespace {

double rolling(RollingStat stat, std::span<const double> w) {
  switch (stat) {
    case RollingStat::Mean:
      return std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
    case RollingStat::Std: {
      const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
      double ss = 0.0;
      for (double v : w) ss += (v - mean) * (v - mean);
      return std::sqrt(ss / static_cast<double>(w.size() - 1));
    }
    case RollingStat::Min:
      return *std::min_element(w.begin(), w.end());
    case RollingStat::Max:
      return *std::max_element(w.begin(), w.end());
  }
  return 0.0;
}

}  // namespace

FeatureConfig FeatureConfig::defaults() {
  FeatureConfig cfg;
  for (std::size_t l = 1; l <= 24; ++l) cfg.lags.push_back(l);
  cfg.windows = {4, 8, 16, 24};
  cfg.stats = {RollingStat::Mean, RollingStat::Std, RollingStat::Min, RollingStat::Max};
  cfg.calendar_periods = {4, 7, 12, 24};
  return cfg;
}

std::size_t FeatureConfig::history() const {
  std::size_t h = 0;
  for (std::size_t l : lags) h = std::max(h, l);
  if (!stats.empty()) {
    for (std::size_t w : windows) h = std::max(h, w);
  }
  return h;
}

void FeatureConfig::validate() const {
  for (std::size_t l : lags) {
    if (l < 1) throw DomainError("lags must be >= 1");
  }
  for (std::size_t w : windows) {
    if (w < 2) throw DomainError("rolling windows must be >= 2");
  }
  for (std::size_t p : calendar_periods) {
    if (p < 2) throw DomainError("calendar periods must be >= 2");
  }
}

SeriesDataset engineer_features(const SeriesDataset& dataset, const FeatureConfig& config) {
  config.validate();
  const std::size_t history = config.history();
  const std::size_t n_stats = config.stats.empty() ? 0 : config.windows.size() * config.stats.size();
  const std::size_t n_engineered = config.lags.size() + n_stats + 2 * config.calendar_periods.size();
  const std::size_t d_exo = dataset.num_features();

  SeriesDataset out;
  out.scaling = dataset.scaling;
  out.series_labels = dataset.series_labels;
  for (std::size_t l : config.lags) out.feature_names.push_back("lag_" + std::to_string(l));
  if (!config.stats.empty()) {
    for (std::size_t w : config.windows) {
      for (RollingStat s : config.stats) {
        out.feature_names.push_back("roll_" + std::string(rolling_stat_name(s)) + "_" + std::to_string(w));
      }
    }
  }
  for (std::size_t p : config.calendar_periods) {
    out.feature_names.push_back("cal_sin_" + std::to_string(p));
    out.feature_names.push_back("cal_cos_" + std::to_string(p));
  }
  out.feature_names.insert(out.feature_names.end(), dataset.feature_names.begin(),
                           dataset.feature_names.end());

  std::size_t kept = 0;
  const auto ranges = dataset.series_ranges();
  for (const auto& [begin, end] : ranges) {
    if (end - begin < history + 1) {
      throw DomainError("series " + series_name(dataset, dataset.series_id[begin]) + " has " +
                        std::to_string(end - begin) + " rows; feature history needs " +
                        std::to_string(history + 1));
    }
    kept += end - begin - history;
  }

  out.features = Matrix(kept, n_engineered + d_exo);
  out.target.reserve(kept);
  out.series_id.reserve(kept);
  out.time_index.reserve(kept);
  std::size_t row = 0;
  for (const auto& [begin, end] : ranges) {
    const std::span<const double> y(dataset.target.data() + begin, end - begin);
    for (std::size_t j = history; j < y.size(); ++j, ++row) {
      auto x = out.features.row(row);
      std::size_t c = 0;
      for (std::size_t l : config.lags) x[c++] = y[j - l];
      if (!config.stats.empty()) {
        for (std::size_t w : config.windows) {
          const auto window = y.subspan(j - w, w);
          for (RollingStat s : config.stats) x[c++] = rolling(s, window);
        }
      }
      const auto t = static_cast<double>(dataset.time_index[begin + j]);
      for (std::size_t p : config.calendar_periods) {
        const double phase = 2.0 * std::numbers::pi * std::fmod(t, static_cast<double>(p)) /
                             static_cast<double>(p);
        x[c++] = std::sin(phase);
        x[c++] = std::cos(phase);
      }
      const auto exo = dataset.features.row(begin + j);
      std::copy(exo.begin(), exo.end(), x.begin() + static_cast<std::ptrdiff_t>(c));
      out.target.push_back(y[j]);
      out.series_id.push_back(dataset.series_id[begin + j]);
      out.time_index.push_back(dataset.time_index[begin + j]);
    }
  }
  return out;
}

// ---- Splitting ------------------------------------------------------------

void SplitSpec::validate() const {
  if (test_len < 1) throw DomainError("test_len must be >= 1");
  if (train_samples < 1) throw DomainError("train_samples must be >= 1");
}

TrainTestSplit split(const SeriesDataset& dataset, const SplitSpec& spec) {
  spec.validate();
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  const auto ranges = dataset.series_ranges();
  for (std::size_t s = 0; s < ranges.size(); ++s) {
    const auto [begin, end] = ranges[s];
    const std::size_t len = end - begin;
    if (len < spec.test_len + spec.train_samples) {
      throw DomainError("series " + series_name(dataset, dataset.series_id[begin]) + " has " +
                        std::to_string(len) + " rows; split needs " +
                        std::to_string(spec.test_len) + " test + " +
                        std::to_string(spec.train_samples) + " train");
    }
    const std::size_t pool = len - spec.test_len;
    std::vector<std::size_t> chosen;
    if (spec.mode == SplitMode::ContiguousPrefix) {
      chosen.resize(spec.train_samples);
      std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    } else {
      // partial Fisher-Yates over the pre-test rows
      std::vector<std::size_t> idx(pool);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      Rng rng(derive_seed(spec.seed, s));
      for (std::size_t k = 0; k < spec.train_samples; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng.below(pool - k));
        std::swap(idx[k], idx[j]);
      }
      chosen.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(spec.train_samples));
      std::sort(chosen.begin(), chosen.end());
    }
    for (std::size_t c : chosen) train_rows.push_back(begin + c);
    for (std::size_t i = begin + pool; i < end; ++i) test_rows.push_back(i);
  }
  return {dataset.select_rows(train_rows), dataset.select_rows(test_rows)};
}

}  // namespace bsdtq
