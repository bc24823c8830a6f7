#include "bsdtq/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "bsdtq/errors.hpp"
#include "bsdtq/random.hpp"

namespace bsdtq {

// ---- Metrics --------------------------------------------------------------

EvalReport mse_curves(const std::vector<SeriesForecast>& forecasts, std::string model_tag) {
  if (forecasts.empty()) throw DomainError("mse_curves needs at least one series");
  std::size_t horizon = 0;
  for (const auto& f : forecasts) {
    if (f.predictions.size() != f.truths.size()) {
      throw DomainError("series " + std::to_string(f.series_id) + " has " +
                        std::to_string(f.predictions.size()) + " predictions but " +
                        std::to_string(f.truths.size()) + " truths");
    }
    if (f.truths.empty()) throw DomainError("series " + std::to_string(f.series_id) + " is empty");
    horizon = std::max(horizon, f.truths.size());
  }

  EvalReport report;
  report.model_tag = std::move(model_tag);
  Vector sum(horizon, 0.0);
  std::vector<std::size_t> count(horizon, 0);
  double total = 0.0;
  std::size_t total_count = 0;
  for (const auto& f : forecasts) {
    double series_sum = 0.0;
    for (std::size_t t = 0; t < f.truths.size(); ++t) {
      const double e = f.truths[t] - f.predictions[t];
      const double loss = e * e;
      sum[t] += loss;
      ++count[t];
      series_sum += loss;
    }
    total += series_sum;
    total_count += f.truths.size();
    report.per_series_mse[f.series_id] = series_sum / static_cast<double>(f.truths.size());
  }
  report.mse_t.resize(horizon);
  report.cmse_t.resize(horizon);
  double running = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    report.mse_t[t] = sum[t] / static_cast<double>(count[t]);
    running += report.mse_t[t];
    report.cmse_t[t] = running / static_cast<double>(t + 1);
  }
  report.aggregate_mse = total / static_cast<double>(total_count);
  return report;
}

std::vector<SeriesForecast> forecasts_by_series(const SeriesDataset& dataset,
                                                std::span<const double> predictions) {
  if (predictions.size() != dataset.rows()) {
    throw DomainError("got " + std::to_string(predictions.size()) + " predictions for " +
                      std::to_string(dataset.rows()) + " rows");
  }
  std::vector<SeriesForecast> out;
  for (const auto& [begin, end] : dataset.series_ranges()) {
    SeriesForecast f;
    f.series_id = dataset.series_id[begin];
    f.predictions.assign(predictions.begin() + static_cast<std::ptrdiff_t>(begin),
                         predictions.begin() + static_cast<std::ptrdiff_t>(end));
    f.truths.assign(dataset.target.begin() + static_cast<std::ptrdiff_t>(begin),
                    dataset.target.begin() + static_cast<std::ptrdiff_t>(end));
    out.push_back(std::move(f));
  }
  return out;
}

// ---- Finite differences ---------------------------------------------------

Vector fd_gradient(const std::function<double(std::span<const double>)>& f,
                   std::span<const double> point, double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step must be positive");
  Vector x(point.begin(), point.end());
  Vector grad(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double saved = x[j];
    x[j] = saved + h;
    const double plus = f(x);
    x[j] = saved - h;
    const double minus = f(x);
    x[j] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw OracleError("non-finite function value at coordinate " + std::to_string(j), j);
    }
    grad[j] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw DomainError("gradient length mismatch");
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nb += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / (std::sqrt(na) + std::sqrt(nb) + 1e-12);
}

// ---- Gradient-check suite -------------------------------------------------

std::string_view gradient_kind_name(GradientKind kind) noexcept {
  switch (kind) {
    case GradientKind::Input:
      return "grad_input";
    case GradientKind::Params:
      return "grad_params";
    case GradientKind::Linear:
      return "grad_linear";
    case GradientKind::LossLinear:
      return "grad_loss_linear";
    case GradientKind::Mlp:
      return "grad_mlp";
  }
  return "unknown";
}

namespace {

std::size_t draw_between(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

Vector normals(Rng& rng, std::size_t n, double scale) {
  Vector v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

SoftTree tree_from_flat(unsigned depth, std::size_t dim, std::span<const double> flat) {
  const std::size_t nodes = (std::size_t{1} << depth) - 1;
  const std::size_t weights = nodes * dim;
  return SoftTree(depth, Matrix(nodes, dim, Vector(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(weights))),
                  Vector(flat.begin() + static_cast<std::ptrdiff_t>(weights),
                         flat.begin() + static_cast<std::ptrdiff_t>(weights + nodes)),
                  Vector(flat.begin() + static_cast<std::ptrdiff_t>(weights + nodes), flat.end()));
}

MlpTransform mlp_from_flat(std::size_t d_in, std::size_t hidden, std::size_t d_out,
                           std::span<const double> flat) {
  auto take = [&](std::size_t& pos, std::size_t n) {
    Vector v(flat.begin() + static_cast<std::ptrdiff_t>(pos),
             flat.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    return v;
  };
  std::size_t pos = 0;
  Matrix w1(hidden, d_in, take(pos, hidden * d_in));
  Vector b1 = take(pos, hidden);
  Matrix w2(d_out, hidden, take(pos, d_out * hidden));
  Vector b2 = take(pos, d_out);
  return MlpTransform(std::move(w1), std::move(b1), std::move(w2), std::move(b2));
}

Vector flatten_mlp(const MlpTransform& m) {
  Vector out(m.layer1_weights().data().begin(), m.layer1_weights().data().end());
  out.insert(out.end(), m.layer1_biases().begin(), m.layer1_biases().end());
  out.insert(out.end(), m.layer2_weights().data().begin(), m.layer2_weights().data().end());
  out.insert(out.end(), m.layer2_biases().begin(), m.layer2_biases().end());
  return out;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_checks(const GradCheckConfig& config) {
  if (config.min_depth < 1 || config.max_depth < config.min_depth) {
    throw DomainError("gradient check depth range is invalid");
  }
  if (config.max_input_dim < 1 || config.max_output_dim < 1) {
    throw DomainError("gradient check dimensions must be positive");
  }
  std::vector<GradCheckResult> results;
  for (GradientKind kind : {GradientKind::Input, GradientKind::Params, GradientKind::Linear,
                            GradientKind::LossLinear, GradientKind::Mlp}) {
    results.push_back({kind, 0, 0.0, false});
  }
  const double sign = config.inject_sign_flip ? -1.0 : 1.0;
  auto record = [&](GradientKind kind, Vector analytic, const Vector& numeric) {
    for (double& v : analytic) v *= sign;
    auto& r = results[static_cast<std::size_t>(kind)];
    r.max_relative_error = std::max(r.max_relative_error, relative_error(analytic, numeric));
    ++r.checks;
  };

  for (std::size_t trial = 0; trial < config.trials; ++trial) {
    Rng rng(derive_seed(config.seed, trial));
    const auto depth = static_cast<unsigned>(draw_between(rng, config.min_depth, config.max_depth));
    const std::size_t d_in = draw_between(rng, 1, config.max_input_dim);
    const std::size_t d_out = draw_between(rng, 1, config.max_output_dim);
    const std::size_t nodes = (std::size_t{1} << depth) - 1;
    const double wscale = 1.0 / std::sqrt(static_cast<double>(d_out));

    const SoftTree tree(depth, Matrix(nodes, d_out, normals(rng, nodes * d_out, wscale)),
                        normals(rng, nodes, 0.5), normals(rng, nodes + 1, 1.0));
    const Vector z = normals(rng, d_out, 1.0);
    const double h = config.step;

    record(GradientKind::Input, tree.grad_input(z),
           fd_gradient([&](std::span<const double> p) { return tree.forward(p); }, z, h));

    const Vector flat = tree.grad_params(z, 1.0).flatten();
    Vector params(tree.node_weights().data().begin(), tree.node_weights().data().end());
    params.insert(params.end(), tree.node_biases().begin(), tree.node_biases().end());
    params.insert(params.end(), tree.leaf_values().begin(), tree.leaf_values().end());
    record(GradientKind::Params, flat,
           fd_gradient([&](std::span<const double> p) {
             return tree_from_flat(depth, d_out, p).forward(z);
           }, params, h));

    const double qscale = 1.0 / std::sqrt(static_cast<double>(d_in));
    const LinearMap q(Matrix(d_out, d_in, normals(rng, d_out * d_in, qscale)));
    const Vector x = normals(rng, d_in, 1.0);
    const Vector q_flat(q.matrix().data().begin(), q.matrix().data().end());
    auto forward_q = [&](std::span<const double> p) {
      const LinearMap m(Matrix(d_out, d_in, Vector(p.begin(), p.end())));
      Vector zz(d_out);
      m.apply_row(x, zz);
      return tree.forward(zz);
    };
    const Matrix gl = grad_linear(tree, q, x);
    record(GradientKind::Linear, Vector(gl.data().begin(), gl.data().end()),
           fd_gradient(forward_q, q_flat, h));

    const std::size_t batch = draw_between(rng, 2, 6);
    const Matrix xs(batch, d_in, normals(rng, batch * d_in, 1.0));
    const Vector ys = normals(rng, batch, 1.0);
    const Matrix gll = grad_loss_linear(tree, q, xs, ys);
    record(GradientKind::LossLinear, Vector(gll.data().begin(), gll.data().end()),
           fd_gradient([&](std::span<const double> p) {
             const Transform m = LinearMap(Matrix(d_out, d_in, Vector(p.begin(), p.end())));
             return transform_loss(tree, m, xs, ys);
           }, q_flat, h));

    const std::size_t hidden = draw_between(rng, 1, 6);
    Rng mlp_rng(rng.next_u64());
    const MlpTransform mlp0 = MlpTransform::random(d_in, hidden, d_out, mlp_rng);
    const MlpTransform mlp(mlp0.layer1_weights(), normals(rng, hidden, 0.5), mlp0.layer2_weights(),
                           normals(rng, d_out, 0.5));
    record(GradientKind::Mlp, grad_mlp(tree, mlp, x).flatten(),
           fd_gradient([&](std::span<const double> p) {
             MlpActivations act;
             mlp_from_flat(d_in, hidden, d_out, p).forward_row(x, act);
             return tree.forward(act.output);
           }, flatten_mlp(mlp), h));
  }

  for (auto& r : results) r.passed = r.max_relative_error < config.tolerance;
  return results;
}

// ---- Weight recovery ------------------------------------------------------

Vector normalize_weights(std::span<const double> weights) {
  double l1 = 0.0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    l1 += std::fabs(weights[i]);
    if (std::fabs(weights[i]) > std::fabs(weights[arg])) arg = i;
  }
  if (!(l1 > 0.0)) throw DomainError("cannot normalize an all-zero weight vector");
  const double s = (weights[arg] < 0.0 ? -1.0 : 1.0) / l1;
  Vector out(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) out[i] = s * weights[i];
  return out;
}

WeightRecoveryReport weight_recovery_experiment(const SynthSpec& spec, std::size_t runs,
                                                const BoostConfig& config,
                                                std::size_t train_rows_per_series,
                                                std::size_t threads) {
  if (runs == 0) throw DomainError("weight recovery needs at least one run");
  if (config.transform.kind != TransformKind::Linear || config.transform.output_dim != 1) {
    throw DomainError("weight recovery needs a linear transform with d_out = 1");
  }
  const SyntheticData synth = generate_synthetic(spec);
  SplitSpec prefix;
  prefix.mode = SplitMode::ContiguousPrefix;
  prefix.train_samples = train_rows_per_series;
  // split() always holds out a suffix; one row is the least it accepts.
  prefix.test_len = 1;
  const SeriesDataset train_set = split(synth.dataset, prefix).train;

  std::vector<Vector> learned(runs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t run = next++; run < runs; run = next++) {
      try {
        BoostConfig cfg = config;
        cfg.seed = derive_seed(config.seed, run);
        const TrainResult result = train(train_set.features, train_set.target, cfg, Variant::BSDTQ);
        const auto& q = std::get<LinearMap>(result.model.stages().back().transform).matrix();
        learned[run] = normalize_weights(q.row(0));
      } catch (const TrainingError& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::make_exception_ptr(
              TrainingError("weight recovery run " + std::to_string(run) + ": " + e.what(), run));
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, runs);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  const std::size_t d = synth.weights.size();
  WeightRecoveryReport report;
  report.runs = runs;
  report.training_rows = train_set.rows();
  report.mean_weights.assign(d, 0.0);
  report.mean_abs_weights.assign(d, 0.0);
  report.std_weights.assign(d, 0.0);
  for (const Vector& w : learned) {
    for (std::size_t i = 0; i < d; ++i) {
      report.mean_weights[i] += w[i];
      report.mean_abs_weights[i] += std::fabs(w[i]);
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    report.mean_weights[i] /= static_cast<double>(runs);
    report.mean_abs_weights[i] /= static_cast<double>(runs);
  }
  for (const Vector& w : learned) {
    for (std::size_t i = 0; i < d; ++i) {
      const double e = w[i] - report.mean_weights[i];
      report.std_weights[i] += e * e;
    }
  }
  for (double& s : report.std_weights) s = std::sqrt(s / static_cast<double>(runs));
  report.true_weights_normalized = normalize_weights(synth.weights);
  return report;
}

}  // namespace bsdtq
