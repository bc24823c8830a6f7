#include "bsdtq/transform.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "bsdtq/errors.hpp"
#include "bsdtq/simd.hpp"

namespace bsdtq {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw DomainError(message);
}

void check_rows(const Matrix& inputs, std::size_t expected_cols, const char* what) {
  require(inputs.cols() == expected_cols, std::string(what) + " expects " +
                                              std::to_string(expected_cols) +
                                              " input columns, got " +
                                              std::to_string(inputs.cols()));
}

void check_batch(const SoftTree& tree, std::size_t in_dim, std::size_t out_dim,
                 const Matrix& inputs, std::span<const double> targets) {
  require(inputs.rows() > 0, "transform gradient needs a non-empty batch");
  require(inputs.rows() == targets.size(), "transform batch has " +
                                               std::to_string(inputs.rows()) + " rows but " +
                                               std::to_string(targets.size()) + " targets");
  check_rows(inputs, in_dim, "transform");
  require(tree.input_dim() == out_dim, "tree input dimension " +
                                           std::to_string(tree.input_dim()) +
                                           " does not match transform output dimension " +
                                           std::to_string(out_dim));
}

// Loss and gradient of the summed half squared error in one pass.
double loss_and_grad(const SoftTree& tree, const LinearMap& map, const Matrix& inputs,
                     std::span<const double> targets, Matrix* grad) {
  const std::size_t d_out = map.output_dim();
  Vector z(d_out);
  Vector g(d_out);
  TreeWorkspace ws;
  double sum = 0.0;
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    const auto x = inputs.row(i);
    map.apply_row(x, z);
    const double e = tree.evaluate(z, ws) - targets[i];
    sum += e * e;
    if (grad == nullptr) continue;
    tree.backpropagate(ws);
    std::fill(g.begin(), g.end(), 0.0);
    tree.accumulate_grad_input(ws, g);
    for (std::size_t r = 0; r < d_out; ++r) simd::axpy(e * g[r], x, grad->row(r));
  }
  return 0.5 * sum;
}

double loss_and_grad(const SoftTree& tree, const MlpTransform& mlp, const Matrix& inputs,
                     std::span<const double> targets, MlpGradient* grad) {
  MlpActivations act;
  Vector g(mlp.output_dim());
  TreeWorkspace ws;
  double sum = 0.0;
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    const auto x = inputs.row(i);
    mlp.forward_row(x, act);
    const double e = tree.evaluate(act.output, ws) - targets[i];
    sum += e * e;
    if (grad == nullptr) continue;
    tree.backpropagate(ws);
    std::fill(g.begin(), g.end(), 0.0);
    tree.accumulate_grad_input(ws, g);
    mlp.accumulate_backward(x, act, g, e, *grad);
  }
  return 0.5 * sum;
}

}  // namespace

// ---- LinearMap ------------------------------------------------------------

LinearMap::LinearMap(Matrix matrix) : matrix_(std::move(matrix)) {
  require(matrix_.rows() > 0 && matrix_.cols() > 0, "linear map must be non-empty");
  require(matrix_.all_finite(), "linear map entries must be finite");
}

LinearMap LinearMap::identity(std::size_t dim) { return LinearMap(Matrix::identity(dim)); }

LinearMap LinearMap::truncated_identity(std::size_t output_dim, std::size_t input_dim) {
  require(output_dim >= 1 && output_dim <= input_dim,
          "truncated identity needs 1 <= d_out <= d_in");
  Matrix m(output_dim, input_dim);
  for (std::size_t i = 0; i < output_dim; ++i) m(i, i) = 1.0;
  return LinearMap(std::move(m));
}

Matrix LinearMap::apply(const Matrix& inputs) const {
  check_rows(inputs, input_dim(), "linear map");
  Matrix out(inputs.rows(), output_dim());
  for (std::size_t i = 0; i < inputs.rows(); ++i) apply_row(inputs.row(i), out.row(i));
  return out;
}

void LinearMap::apply_row(std::span<const double> x, std::span<double> z) const {
  simd::gemv(matrix_.data(), x, z);
}

void LinearMap::apply_update(const Matrix& update, double step) {
  simd::axpy(-step, update.data(), matrix_.data());
  if (!matrix_.all_finite()) throw TrainingError("linear map became non-finite", 0);
}

// ---- MlpTransform ---------------------------------------------------------

MlpGradient& MlpGradient::operator+=(const MlpGradient& other) {
  simd::axpy(1.0, other.layer1_weights.data(), layer1_weights.data());
  simd::axpy(1.0, other.layer1_biases, layer1_biases);
  simd::axpy(1.0, other.layer2_weights.data(), layer2_weights.data());
  simd::axpy(1.0, other.layer2_biases, layer2_biases);
  return *this;
}

Vector MlpGradient::flatten() const {
  Vector out(layer1_weights.data().begin(), layer1_weights.data().end());
  out.insert(out.end(), layer1_biases.begin(), layer1_biases.end());
  out.insert(out.end(), layer2_weights.data().begin(), layer2_weights.data().end());
  out.insert(out.end(), layer2_biases.begin(), layer2_biases.end());
  return out;
}

MlpTransform::MlpTransform(Matrix layer1_weights, Vector layer1_biases, Matrix layer2_weights,
                           Vector layer2_biases)
    : w1_(std::move(layer1_weights)),
      b1_(std::move(layer1_biases)),
      w2_(std::move(layer2_weights)),
      b2_(std::move(layer2_biases)) {
  require(w1_.rows() > 0 && w1_.cols() > 0 && w2_.rows() > 0, "MLP layers must be non-empty");
  require(b1_.size() == w1_.rows(), "MLP layer-1 bias length must equal hidden width");
  require(w2_.cols() == w1_.rows(), "MLP layer-2 input width must equal hidden width");
  require(b2_.size() == w2_.rows(), "MLP layer-2 bias length must equal output width");
  require(w1_.all_finite() && all_finite(b1_) && w2_.all_finite() && all_finite(b2_),
          "MLP parameters must be finite");
}

MlpTransform MlpTransform::random(std::size_t input_dim, std::size_t hidden,
                                  std::size_t output_dim, Rng& rng) {
  require(input_dim > 0 && hidden > 0 && output_dim > 0, "MLP dimensions must be positive");
  Matrix w1(hidden, input_dim);
  Matrix w2(output_dim, hidden);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& w : w1.data()) w = s1 * rng.normal();
  for (double& w : w2.data()) w = s2 * rng.normal();
  return MlpTransform(std::move(w1), Vector(hidden, 0.0), std::move(w2), Vector(output_dim, 0.0));
}

void MlpTransform::forward_row(std::span<const double> x, MlpActivations& act) const {
  act.hidden.resize(hidden_dim());
  act.output.resize(output_dim());
  simd::gemv(w1_.data(), x, act.hidden);
  for (std::size_t j = 0; j < hidden_dim(); ++j) act.hidden[j] = sigmoid(act.hidden[j] + b1_[j]);
  simd::gemv(w2_.data(), act.hidden, act.output);
  for (std::size_t k = 0; k < output_dim(); ++k) act.output[k] += b2_[k];
}

Matrix MlpTransform::apply(const Matrix& inputs) const {
  check_rows(inputs, input_dim(), "MLP transform");
  Matrix out(inputs.rows(), output_dim());
  MlpActivations act;
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    forward_row(inputs.row(i), act);
    std::copy(act.output.begin(), act.output.end(), out.row(i).begin());
  }
  return out;
}

void MlpTransform::accumulate_backward(std::span<const double> x, const MlpActivations& act,
                                       std::span<const double> dz, double scale,
                                       MlpGradient& grad) const {
  const std::size_t h = hidden_dim();
  Vector delta(h, 0.0);
  for (std::size_t k = 0; k < output_dim(); ++k) {
    const double s = scale * dz[k];
    grad.layer2_biases[k] += s;
    simd::axpy(s, act.hidden, grad.layer2_weights.row(k));
    simd::axpy(s, w2_.row(k), delta);
  }
  for (std::size_t j = 0; j < h; ++j) {
    const double d = delta[j] * act.hidden[j] * (1.0 - act.hidden[j]);
    grad.layer1_biases[j] += d;
    simd::axpy(d, x, grad.layer1_weights.row(j));
  }
}

MlpGradient MlpTransform::zero_gradient() const {
  return {Matrix(w1_.rows(), w1_.cols()), Vector(b1_.size(), 0.0), Matrix(w2_.rows(), w2_.cols()),
          Vector(b2_.size(), 0.0)};
}

void MlpTransform::apply_update(const MlpGradient& update, double step) {
  simd::axpy(-step, update.layer1_weights.data(), w1_.data());
  simd::axpy(-step, update.layer1_biases, b1_);
  simd::axpy(-step, update.layer2_weights.data(), w2_.data());
  simd::axpy(-step, update.layer2_biases, b2_);
  if (!w1_.all_finite() || !all_finite(b1_) || !w2_.all_finite() || !all_finite(b2_)) {
    throw TrainingError("MLP transform became non-finite", 0);
  }
}

// ---- Transform variant ----------------------------------------------------

std::size_t input_dim(const Transform& transform) noexcept {
  return std::visit([](const auto& t) { return t.input_dim(); }, transform);
}

std::size_t output_dim(const Transform& transform) noexcept {
  return std::visit([](const auto& t) { return t.output_dim(); }, transform);
}

Matrix apply(const Transform& transform, const Matrix& inputs) {
  return std::visit([&](const auto& t) { return t.apply(inputs); }, transform);
}

// ---- Gradients ------------------------------------------------------------

Matrix grad_linear(const SoftTree& tree, const LinearMap& map, std::span<const double> x) {
  require(x.size() == map.input_dim(), "input length " + std::to_string(x.size()) +
                                           " does not match linear map d_in " +
                                           std::to_string(map.input_dim()));
  require(tree.input_dim() == map.output_dim(), "tree input dimension does not match d_out");
  Vector z(map.output_dim());
  map.apply_row(x, z);
  const Vector g = tree.grad_input(z);
  Matrix out(map.output_dim(), map.input_dim());
  for (std::size_t r = 0; r < g.size(); ++r) {
    for (std::size_t c = 0; c < x.size(); ++c) out(r, c) = g[r] * x[c];
  }
  return out;
}

Matrix grad_loss_linear(const SoftTree& tree, const LinearMap& map, const Matrix& inputs,
                        std::span<const double> targets) {
  check_batch(tree, map.input_dim(), map.output_dim(), inputs, targets);
  Matrix grad = map.zero_gradient();
  loss_and_grad(tree, map, inputs, targets, &grad);
  return grad;
}

MlpGradient grad_mlp(const SoftTree& tree, const MlpTransform& mlp, std::span<const double> x) {
  require(x.size() == mlp.input_dim(), "input length does not match MLP d_in");
  require(tree.input_dim() == mlp.output_dim(), "tree input dimension does not match MLP d_out");
  MlpActivations act;
  mlp.forward_row(x, act);
  const Vector g = tree.grad_input(act.output);
  MlpGradient grad = mlp.zero_gradient();
  mlp.accumulate_backward(x, act, g, 1.0, grad);
  return grad;
}

MlpGradient grad_loss_mlp(const SoftTree& tree, const MlpTransform& mlp, const Matrix& inputs,
                          std::span<const double> targets) {
  check_batch(tree, mlp.input_dim(), mlp.output_dim(), inputs, targets);
  MlpGradient grad = mlp.zero_gradient();
  loss_and_grad(tree, mlp, inputs, targets, &grad);
  return grad;
}

double transform_loss(const SoftTree& tree, const Transform& transform, const Matrix& inputs,
                      std::span<const double> targets) {
  return std::visit(
      [&](const auto& t) {
        check_batch(tree, t.input_dim(), t.output_dim(), inputs, targets);
        using Grad = std::conditional_t<std::is_same_v<std::decay_t<decltype(t)>, LinearMap>,
                                        Matrix, MlpGradient>;
        return loss_and_grad(tree, t, inputs, targets, static_cast<Grad*>(nullptr));
      },
      transform);
}

// ---- Fitting --------------------------------------------------------------

void TransformFitConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate),
          "transform learning rate must be positive");
  require(kind == TransformKind::Linear || hidden_units >= 1, "MLP needs at least one hidden unit");
}

namespace {

template <class Map, class Grad>
Vector descend(const SoftTree& tree, Map& map, const Matrix& inputs,
               std::span<const double> targets, const TransformFitConfig& config,
               Grad (Map::*zero)() const) {
  Vector trace;
  trace.reserve(config.steps + 1);
  for (std::size_t step = 0; step < config.steps; ++step) {
    Grad grad = (map.*zero)();
    const double loss = loss_and_grad(tree, map, inputs, targets, &grad);
    if (!std::isfinite(loss)) {
      throw TrainingError("transform fit diverged at step " + std::to_string(step), step);
    }
    trace.push_back(loss);
    try {
      map.apply_update(grad, config.learning_rate);
    } catch (const TrainingError&) {
      throw TrainingError("transform fit diverged at step " + std::to_string(step), step);
    }
  }
  const double final_loss = loss_and_grad(tree, map, inputs, targets, static_cast<Grad*>(nullptr));
  if (!std::isfinite(final_loss)) {
    throw TrainingError("transform fit diverged at step " + std::to_string(config.steps),
                        config.steps);
  }
  trace.push_back(final_loss);
  return trace;
}

}  // namespace

TransformFitResult fit_transform(const SoftTree& tree, Transform transform, const Matrix& inputs,
                                 std::span<const double> targets,
                                 const TransformFitConfig& config) {
  config.validate();
  check_batch(tree, bsdtq::input_dim(transform), bsdtq::output_dim(transform), inputs, targets);
  Vector trace;
  if (auto* linear = std::get_if<LinearMap>(&transform)) {
    trace = descend(tree, *linear, inputs, targets, config, &LinearMap::zero_gradient);
  } else {
    auto& mlp = std::get<MlpTransform>(transform);
    trace = descend(tree, mlp, inputs, targets, config, &MlpTransform::zero_gradient);
  }
  return {std::move(transform), std::move(trace)};
}

}  // namespace bsdtq
