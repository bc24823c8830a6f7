#pragma once

// Soft decision tree base learner.
//
// A perfect binary tree of depth D stored in heap layout: internal node m has
// children 2m+1 (left) and 2m+2 (right); leaf l sits at heap slot 2^D - 1 + l,
// so leaves are numbered left to right and the bits of l, most significant
// first, spell the root-to-leaf directions (1 = right). Node m routes right
// with probability p_m(z) = sigmoid(w_m . z + b_m), and the tree output is
//
//   f(z) = sum_l gamma_l * prod_{m on path(l)} p_m^v (1 - p_m)^(1 - v).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bsdtq/matrix.hpp"
#include "bsdtq/random.hpp"

namespace bsdtq {

struct PathStep {
  std::size_t node;
  int direction;  // 1 = right child, 0 = left child

  friend bool operator==(const PathStep&, const PathStep&) = default;
};

// Nodes visited from the root to `leaf`, with the direction taken at each.
// Throws DomainError unless depth >= 1 and leaf < 2^depth.
std::vector<PathStep> leaf_path(unsigned depth, std::size_t leaf);

// Logistic function; exact for |a| large in either direction (no overflow).
double sigmoid(double a) noexcept;

// Parameter-shaped gradient (or update) for a SoftTree.
struct TreeGradient {
  Matrix node_weights;
  Vector node_biases;
  Vector leaf_values;

  TreeGradient() = default;
  TreeGradient(std::size_t nodes, std::size_t leaves, std::size_t input_dim)
      : node_weights(nodes, input_dim), node_biases(nodes, 0.0), leaf_values(leaves, 0.0) {}

  TreeGradient& operator+=(const TreeGradient& other);
  TreeGradient& operator*=(double scale);

  // Flattened as [weights row-major | biases | leaf values].
  Vector flatten() const;
};

// Scratch buffers for one tree evaluation; reuse across samples to avoid
// reallocating in tight loops.
struct TreeWorkspace {
  Vector gate;         // p_m per internal node
  Vector reach;        // probability of reaching each heap slot (nodes and leaves)
  Vector mass;         // sum of gamma_l * p*_l over the subtree of each heap slot
  Vector sensitivity;  // df/d(w_m . z + b_m) per internal node
};

class SoftTree {
 public:
  static constexpr unsigned kMaxDepth = 20;

  // All parameters zero.
  SoftTree(unsigned depth, std::size_t input_dim);
  // Throws DomainError on shape mismatch or non-finite parameters.
  SoftTree(unsigned depth, Matrix node_weights, Vector node_biases, Vector leaf_values);

  // Gate weights drawn N(0, weight_scale^2); biases and leaf values zero.
  static SoftTree random(unsigned depth, std::size_t input_dim, double weight_scale, Rng& rng);

  unsigned depth() const noexcept { return depth_; }
  std::size_t input_dim() const noexcept { return node_weights_.cols(); }
  std::size_t num_nodes() const noexcept { return node_biases_.size(); }
  std::size_t num_leaves() const noexcept { return leaf_values_.size(); }

  const Matrix& node_weights() const noexcept { return node_weights_; }
  const Vector& node_biases() const noexcept { return node_biases_; }
  const Vector& leaf_values() const noexcept { return leaf_values_; }

  double forward(std::span<const double> z) const;
  Vector leaf_probabilities(std::span<const double> z) const;
  Vector grad_input(std::span<const double> z) const;
  // upstream * d f(z) / d(parameters).
  TreeGradient grad_params(std::span<const double> z, double upstream) const;

  // Evaluates f(z), filling ws.gate and ws.reach. No dimension checks.
  double evaluate(std::span<const double> z, TreeWorkspace& ws) const;
  // After evaluate(): fills ws.mass and ws.sensitivity.
  void backpropagate(TreeWorkspace& ws) const;
  // After backpropagate(): out += sum_m sensitivity_m * w_m.
  void accumulate_grad_input(const TreeWorkspace& ws, std::span<double> out) const;
  // After backpropagate(): grad += upstream * d f / d(parameters).
  void accumulate_grad_params(std::span<const double> z, const TreeWorkspace& ws, double upstream,
                              TreeGradient& grad) const;

  // params -= step * update. Throws TrainingError(0) if the result is not finite.
  void apply_update(const TreeGradient& update, double step);

  TreeGradient zero_gradient() const {
    return TreeGradient(num_nodes(), num_leaves(), input_dim());
  }

  friend bool operator==(const SoftTree&, const SoftTree&) = default;

 private:
  void check_input(std::span<const double> z) const;

  unsigned depth_;
  Matrix node_weights_;
  Vector node_biases_;
  Vector leaf_values_;
};

struct TreeFitConfig {
  std::size_t steps = 50;
  double learning_rate = 1.0;
  double init_weight_scale = 0.1;

  // Throws DomainError when steps == 0, learning_rate <= 0, or scale < 0.
  void validate() const;
};

struct TreeFitResult {
  SoftTree tree;
  // loss_trace[k] is the loss before step k; the last entry is the final loss.
  Vector loss_trace;
  double final_loss = 0.0;
};

// Full-batch gradient descent on 0.5 * mean_i (f(z_i) - r_i)^2 over all tree
// parameters, starting from `tree`.
// Throws DomainError on empty or mismatched data, TrainingError with the
// step index if the loss becomes non-finite.
TreeFitResult fit_tree(SoftTree tree, const Matrix& inputs, std::span<const double> targets,
                       const TreeFitConfig& config);

// Mean 0.5 * squared error of the tree over a batch.
double tree_loss(const SoftTree& tree, const Matrix& inputs, std::span<const double> targets);

}  // namespace bsdtq
