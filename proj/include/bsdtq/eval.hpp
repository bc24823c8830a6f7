#pragma once

// Evaluation: per-step and cumulative MSE curves, the finite-difference
// gradient oracle, the randomized gradient-check suite, and the repeated-run
// transform weight-recovery experiment.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bsdtq/boosting.hpp"
#include "bsdtq/data.hpp"
#include "bsdtq/matrix.hpp"

namespace bsdtq {

struct SeriesForecast {
  std::int64_t series_id = 0;
  Vector predictions;
  Vector truths;
};

struct EvalReport {
  // mse_t[t] averages (y - yhat)^2 over the series that have step t.
  Vector mse_t;
  // cmse_t[t] = mean(mse_t[0..t]).
  Vector cmse_t;
  // Mean over every per-series, per-step loss.
  double aggregate_mse = 0.0;
  std::map<std::int64_t, double> per_series_mse;
  std::string model_tag = "other";
  bool in_sample = false;
};

// Throws DomainError on no series, an empty series, or prediction/truth
// length mismatch within a series.
EvalReport mse_curves(const std::vector<SeriesForecast>& forecasts, std::string model_tag = "other");

// Groups per-row predictions by the dataset's series, in row order.
std::vector<SeriesForecast> forecasts_by_series(const SeriesDataset& dataset,
                                                std::span<const double> predictions);

// Central differences (f(x + h e_j) - f(x - h e_j)) / 2h. Throws DomainError
// for h <= 0 and OracleError (coordinate j) on a non-finite evaluation.
Vector fd_gradient(const std::function<double(std::span<const double>)>& f,
                   std::span<const double> point, double h = 1e-5);

// |a - b| / (|a| + |b| + 1e-12) in the Euclidean norm.
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

// ---- Gradient-check suite -------------------------------------------------

enum class GradientKind { Input, Params, Linear, LossLinear, Mlp };

std::string_view gradient_kind_name(GradientKind kind) noexcept;

struct GradCheckConfig {
  std::size_t trials = 100;
  unsigned min_depth = 1;
  unsigned max_depth = 4;
  std::size_t max_input_dim = 16;
  std::size_t max_output_dim = 8;
  double step = 1e-5;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
  // Test hook: negate every analytic gradient to confirm the oracle notices.
  bool inject_sign_flip = false;
};

struct GradCheckResult {
  GradientKind kind;
  std::size_t checks = 0;
  double max_relative_error = 0.0;
  bool passed = false;
};

// One result per GradientKind. Each trial draws a random tree depth, d_in,
// d_out, parameters and inputs, and compares every analytic gradient against
// fd_gradient.
std::vector<GradCheckResult> run_gradient_checks(const GradCheckConfig& config);

// ---- Weight recovery ------------------------------------------------------

struct WeightRecoveryReport {
  std::size_t runs = 0;
  std::size_t training_rows = 0;
  Vector mean_weights;
  Vector mean_abs_weights;
  Vector std_weights;
  Vector true_weights_normalized;
};

// Unit L1 norm with the largest-magnitude entry made positive.
Vector normalize_weights(std::span<const double> weights);

// Generates one dataset from `spec` (fixed ground truth), takes the
// contiguous first `train_rows_per_series` rows of each series, and trains
// BSDT-Q `runs` times with seeds derive_seed(config.seed, run). The final
// stage's one-row linear transform is normalized per run, then averaged.
// Requires config.transform.kind == Linear and output_dim == 1. Training
// errors are rethrown with the run index. Runs may execute on `threads`
// workers; aggregation order is fixed.
WeightRecoveryReport weight_recovery_experiment(const SynthSpec& spec, std::size_t runs,
                                                const BoostConfig& config,
                                                std::size_t train_rows_per_series = 100,
                                                std::size_t threads = 1);

}  // namespace bsdtq
