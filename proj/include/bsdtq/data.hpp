#pragma once

// Sequential-regression datasets: synthetic generation, CSV ingestion and
// export, per-series min-max scaling, causal lag/rolling features, and
// train/test splitting.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bsdtq/matrix.hpp"

namespace bsdtq {

struct SeriesScaling {
  double min = 0.0;
  double max = 0.0;

  friend bool operator==(const SeriesScaling&, const SeriesScaling&) = default;
};

// Row-per-observation dataset. Rows are grouped by series (in order of first
// appearance) and strictly increasing in time within a series.
struct SeriesDataset {
  Matrix features;
  Vector target;
  std::vector<std::int64_t> series_id;
  std::vector<std::int64_t> time_index;
  std::vector<std::string> feature_names;
  // Target scaling per series; empty when the target is in original units.
  std::map<std::int64_t, SeriesScaling> scaling;
  // Original text of non-numeric series ids, keyed by the assigned integer id.
  std::map<std::int64_t, std::string> series_labels;

  std::size_t rows() const noexcept { return target.size(); }
  std::size_t num_features() const noexcept { return features.cols(); }

  // [begin, end) row range of every series, in row order.
  std::vector<std::pair<std::size_t, std::size_t>> series_ranges() const;

  // Copy of the listed rows (feature names and metadata retained).
  SeriesDataset select_rows(const std::vector<std::size_t>& rows) const;

  // Throws DomainError if any structural invariant is violated.
  void validate() const;

  friend bool operator==(const SeriesDataset&, const SeriesDataset&) = default;
};

// ---- Synthetic data -------------------------------------------------------

struct SynthSpec {
  std::size_t n_series = 50;
  std::size_t horizon = 196;
  std::size_t n_relevant = 5;
  std::size_t n_irrelevant = 45;
  double noise_std = 0.1;
  double weight_low = 0.5;
  double weight_high = 1.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  SeriesDataset dataset;
  // One weight per feature column; zero for the irrelevant ones.
  Vector weights;
};

// Features x ~ N(0, 1) iid; target y = sum_i w_i x_rel_i + N(0, noise_std^2)
// with w_i ~ U(weight_low, weight_high) drawn once for all series. Relevant
// columns come first and are named rel_1.., irrelevant ones irr_1...
SyntheticData generate_synthetic(const SynthSpec& spec);

// ---- CSV ------------------------------------------------------------------

struct CsvSchema {
  // Column holding the series identifier; if absent from the header the file
  // is treated as a single series with id 0.
  std::string series_column = "series_id";
  // Integer index or ISO-8601 date/datetime (converted to Unix seconds).
  std::string time_column = "time";
  std::string target_column = "y";
};

// Every other column is read as a numeric exogenous feature. Throws
// ParseError (with the 1-based line) for missing columns, unparseable numbers,
// and duplicate (series, time) keys.
SeriesDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

// Writes series_id,time,y,<features...> using shortest round-trip decimals.
void write_csv(const SeriesDataset& dataset, const std::filesystem::path& path,
               const CsvSchema& schema = {});

// ---- Scaling --------------------------------------------------------------

// Per series, maps the target to 2 (y - min) / (max - min) - 1 with min/max
// taken over all rows except the last `holdout` rows of that series. Throws
// DomainError for a series whose reference range is constant or empty.
SeriesDataset minmax_scale(const SeriesDataset& dataset, std::size_t holdout = 0);

// Undo minmax_scale on the target; clears the stored scaling.
SeriesDataset inverse_scale(const SeriesDataset& dataset);

// Undo the target scaling of one series on arbitrary values (e.g. predictions).
Vector inverse_scale_values(const SeriesDataset& dataset, std::int64_t series,
                            const Vector& values);

// ---- Feature engineering --------------------------------------------------

enum class RollingStat { Mean, Std, Min, Max };

// "mean", "std", "min", "max".
std::string_view rolling_stat_name(RollingStat stat) noexcept;
std::optional<RollingStat> parse_rolling_stat(std::string_view text) noexcept;

struct FeatureConfig {
  std::vector<std::size_t> lags;
  std::vector<std::size_t> windows;
  std::vector<RollingStat> stats;
  // sin/cos of 2 pi t / period for each period, t = time index.
  std::vector<std::size_t> calendar_periods;

  // Lags 1..24, windows {4, 8, 16, 24} x {mean, std, min, max}, calendar
  // periods {4, 7, 12, 24}: 24 + 16 + 8 = 48 engineered columns.
  static FeatureConfig defaults();
  std::size_t history() const;
  void validate() const;
};

// Engineered columns come first, then the original exogenous columns.
// Rolling windows cover y_{t-w}..y_{t-1} (never y_t); std is the sample
// standard deviation (divisor w - 1). The first history() rows of every
// series are dropped. Throws DomainError naming a series that is too short.
SeriesDataset engineer_features(const SeriesDataset& dataset, const FeatureConfig& config);

// ---- Splitting ------------------------------------------------------------

enum class SplitMode { RandomSubset, ContiguousPrefix };

struct SplitSpec {
  std::size_t test_len = 96;
  std::size_t train_samples = 100;
  std::uint64_t seed = 0;
  SplitMode mode = SplitMode::RandomSubset;

  void validate() const;
};

struct TrainTestSplit {
  SeriesDataset train;
  SeriesDataset test;
};

// Per series: the last test_len rows form the test set; train_samples rows
// are taken from the rest (uniformly without replacement, or the first ones
// in ContiguousPrefix mode) and kept in time order. Throws DomainError naming
// the series when it has fewer than test_len + train_samples rows.
TrainTestSplit split(const SeriesDataset& dataset, const SplitSpec& spec);

}  // namespace bsdtq
