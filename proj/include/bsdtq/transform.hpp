#pragma once

// Learnable input transforms placed in front of a soft tree.
//
// LinearMap is z = Q x with Q of shape d_out x d_in. MlpTransform is a single
// hidden layer, z = W2 sigmoid(W1 x + b1) + b2. Both are trained by plain
// gradient descent on the summed loss 0.5 * sum_i (f(phi(x_i)) - y_i)^2 with
// the tree held fixed.

#include <cstddef>
#include <span>
#include <variant>

#include "bsdtq/matrix.hpp"
#include "bsdtq/random.hpp"
#include "bsdtq/sdt.hpp"

namespace bsdtq {

class LinearMap {
 public:
  // Throws DomainError for an empty or non-finite matrix.
  explicit LinearMap(Matrix matrix);

  static LinearMap identity(std::size_t dim);
  // [I | 0] when d_out < d_in; the first d_out inputs pass through.
  static LinearMap truncated_identity(std::size_t output_dim, std::size_t input_dim);

  std::size_t input_dim() const noexcept { return matrix_.cols(); }
  std::size_t output_dim() const noexcept { return matrix_.rows(); }
  const Matrix& matrix() const noexcept { return matrix_; }

  // Rows of the result are Q x_i, i.e. X Q^T.
  Matrix apply(const Matrix& inputs) const;
  void apply_row(std::span<const double> x, std::span<double> z) const;

  Matrix zero_gradient() const { return Matrix(output_dim(), input_dim()); }

  // Q -= step * update. Throws TrainingError(0) if Q stops being finite.
  void apply_update(const Matrix& update, double step);

  friend bool operator==(const LinearMap&, const LinearMap&) = default;

 private:
  Matrix matrix_;
};

struct MlpGradient {
  Matrix layer1_weights;
  Vector layer1_biases;
  Matrix layer2_weights;
  Vector layer2_biases;

  MlpGradient& operator+=(const MlpGradient& other);
  // Flattened as [W1 | b1 | W2 | b2], matrices row-major.
  Vector flatten() const;
};

// Intermediate values of one forward pass, kept for backpropagation.
struct MlpActivations {
  Vector hidden;  // sigmoid(W1 x + b1)
  Vector output;  // z
};

class MlpTransform {
 public:
  // Throws DomainError on inconsistent shapes or non-finite entries.
  MlpTransform(Matrix layer1_weights, Vector layer1_biases, Matrix layer2_weights,
               Vector layer2_biases);

  // W1 ~ N(0, 1/d_in), W2 ~ N(0, 1/hidden), zero biases.
  static MlpTransform random(std::size_t input_dim, std::size_t hidden, std::size_t output_dim,
                             Rng& rng);

  std::size_t input_dim() const noexcept { return w1_.cols(); }
  std::size_t hidden_dim() const noexcept { return w1_.rows(); }
  std::size_t output_dim() const noexcept { return w2_.rows(); }

  const Matrix& layer1_weights() const noexcept { return w1_; }
  const Vector& layer1_biases() const noexcept { return b1_; }
  const Matrix& layer2_weights() const noexcept { return w2_; }
  const Vector& layer2_biases() const noexcept { return b2_; }

  Matrix apply(const Matrix& inputs) const;
  void forward_row(std::span<const double> x, MlpActivations& act) const;

  // grad += d z / d(params) contracted with dz (= df/dz), given act from forward_row(x).
  void accumulate_backward(std::span<const double> x, const MlpActivations& act,
                           std::span<const double> dz, double scale, MlpGradient& grad) const;

  MlpGradient zero_gradient() const;
  void apply_update(const MlpGradient& update, double step);

  friend bool operator==(const MlpTransform&, const MlpTransform&) = default;

 private:
  Matrix w1_;
  Vector b1_;
  Matrix w2_;
  Vector b2_;
};

using Transform = std::variant<LinearMap, MlpTransform>;

std::size_t input_dim(const Transform& transform) noexcept;
std::size_t output_dim(const Transform& transform) noexcept;
// Throws DomainError if inputs.cols() != input_dim(transform).
Matrix apply(const Transform& transform, const Matrix& inputs);

// d f(Q x) / dQ = outer(grad_input(Q x), x).
Matrix grad_linear(const SoftTree& tree, const LinearMap& map, std::span<const double> x);

// Gradient of 0.5 * sum_i (f(Q x_i) - y_i)^2 with respect to Q.
Matrix grad_loss_linear(const SoftTree& tree, const LinearMap& map, const Matrix& inputs,
                        std::span<const double> targets);

// d f(phi(x)) / d(theta) for every MLP parameter.
MlpGradient grad_mlp(const SoftTree& tree, const MlpTransform& mlp, std::span<const double> x);

// Gradient of 0.5 * sum_i (f(phi(x_i)) - y_i)^2 with respect to the MLP parameters.
MlpGradient grad_loss_mlp(const SoftTree& tree, const MlpTransform& mlp, const Matrix& inputs,
                          std::span<const double> targets);

// 0.5 * sum_i (f(phi(x_i)) - y_i)^2
double transform_loss(const SoftTree& tree, const Transform& transform, const Matrix& inputs,
                      std::span<const double> targets);

enum class TransformKind { Linear, Mlp };

struct TransformFitConfig {
  std::size_t steps = 20;
  double learning_rate = 1e-4;
  // Start round k from the round k-1 transform instead of the initial one.
  bool warm_start = true;
  TransformKind kind = TransformKind::Linear;
  // 0 means square (d_out = d_in); otherwise the tree sees this many inputs.
  std::size_t output_dim = 0;
  std::size_t hidden_units = 8;
  // After the transform steps, run `steps` more simultaneous updates of tree and transform.
  bool joint_finetune = false;

  void validate() const;
};

struct TransformFitResult {
  Transform transform;
  // loss_trace[k] is the loss before step k; the last entry is the final loss.
  Vector loss_trace;
};

// Gradient descent on the transform with the tree fixed. steps == 0 returns
// the transform unchanged. Throws TrainingError with the step index if the
// loss becomes non-finite.
TransformFitResult fit_transform(const SoftTree& tree, Transform transform, const Matrix& inputs,
                                 std::span<const double> targets, const TransformFitConfig& config);

}  // namespace bsdtq
