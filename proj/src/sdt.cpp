#include "bsdtq/sdt.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bsdtq/errors.hpp"
#include "bsdtq/simd.hpp"

namespace bsdtq {

namespace {

std::size_t leaf_count(unsigned depth) { return std::size_t{1} << depth; }

void check_depth(unsigned depth) {
  if (depth == 0 || depth > SoftTree::kMaxDepth) {
    throw DomainError("tree depth must be in [1, " + std::to_string(SoftTree::kMaxDepth) + "], got " +
                      std::to_string(depth));
  }
}

}  // namespace

std::vector<PathStep> leaf_path(unsigned depth, std::size_t leaf) {
  check_depth(depth);
  if (leaf >= leaf_count(depth)) {
    throw DomainError("leaf index " + std::to_string(leaf) + " out of range for depth " +
                      std::to_string(depth));
  }
  std::vector<PathStep> path;
  path.reserve(depth);
  std::size_t node = 0;
  for (unsigned level = 0; level < depth; ++level) {
    const int dir = static_cast<int>((leaf >> (depth - 1 - level)) & 1U);
    path.push_back({node, dir});
    node = 2 * node + 1 + static_cast<std::size_t>(dir);
  }
  return path;
}

double sigmoid(double a) noexcept {
  const double e = std::exp(-std::fabs(a));
  const double inv = 1.0 / (1.0 + e);
  return a >= 0.0 ? inv : e * inv;
}

TreeGradient& TreeGradient::operator+=(const TreeGradient& other) {
  simd::axpy(1.0, other.node_weights.data(), node_weights.data());
  simd::axpy(1.0, other.node_biases, node_biases);
  simd::axpy(1.0, other.leaf_values, leaf_values);
  return *this;
}

TreeGradient& TreeGradient::operator*=(double scale) {
  for (double& v : node_weights.data()) v *= scale;
  for (double& v : node_biases) v *= scale;
  for (double& v : leaf_values) v *= scale;
  return *this;
}

Vector TreeGradient::flatten() const {
  Vector out(node_weights.data().begin(), node_weights.data().end());
  out.insert(out.end(), node_biases.begin(), node_biases.end());
  out.insert(out.end(), leaf_values.begin(), leaf_values.end());
  return out;
}

SoftTree::SoftTree(unsigned depth, std::size_t input_dim)
    : depth_(depth),
      node_weights_(leaf_count(std::min(depth, SoftTree::kMaxDepth)) - 1, input_dim),
      node_biases_(leaf_count(std::min(depth, SoftTree::kMaxDepth)) - 1, 0.0),
      leaf_values_(leaf_count(std::min(depth, SoftTree::kMaxDepth)), 0.0) {
  check_depth(depth);
  if (input_dim == 0) throw DomainError("tree input dimension must be positive");
}

SoftTree::SoftTree(unsigned depth, Matrix node_weights, Vector node_biases, Vector leaf_values)
    : depth_(depth),
      node_weights_(std::move(node_weights)),
      node_biases_(std::move(node_biases)),
      leaf_values_(std::move(leaf_values)) {
  check_depth(depth);
  const std::size_t leaves = leaf_count(depth);
  if (node_weights_.rows() != leaves - 1 || node_biases_.size() != leaves - 1 ||
      leaf_values_.size() != leaves) {
    throw DomainError("soft tree of depth " + std::to_string(depth) + " needs " +
                      std::to_string(leaves - 1) + " nodes and " + std::to_string(leaves) +
                      " leaves");
  }
  if (node_weights_.cols() == 0) throw DomainError("tree input dimension must be positive");
  if (!node_weights_.all_finite() || !all_finite(node_biases_) || !all_finite(leaf_values_)) {
    throw DomainError("soft tree parameters must be finite");
  }
}

SoftTree SoftTree::random(unsigned depth, std::size_t input_dim, double weight_scale, Rng& rng) {
  SoftTree tree(depth, input_dim);
  for (double& w : tree.node_weights_.data()) w = weight_scale * rng.normal();
  return tree;
}

void SoftTree::check_input(std::span<const double> z) const {
  if (z.size() != input_dim()) {
    throw DomainError("tree expects input of length " + std::to_string(input_dim()) + ", got " +
                      std::to_string(z.size()));
  }
}

double SoftTree::evaluate(std::span<const double> z, TreeWorkspace& ws) const {
  const std::size_t nodes = num_nodes();
  const std::size_t leaves = num_leaves();
  const std::size_t dim = z.size();
  if (ws.gate.size() != nodes) ws.gate.resize(nodes);
  if (ws.reach.size() != nodes + leaves) ws.reach.resize(nodes + leaves);
  double* gate = ws.gate.data();
  double* reach = ws.reach.data();
  const double* w = node_weights_.data().data();
  reach[0] = 1.0;
  for (std::size_t m = 0; m < nodes; ++m) {
    const double p = sigmoid(simd::dot({w + m * dim, dim}, z) + node_biases_[m]);
    gate[m] = p;
    reach[2 * m + 1] = reach[m] * (1.0 - p);
    reach[2 * m + 2] = reach[m] * p;
  }
  return simd::dot({reach + nodes, leaves}, leaf_values_);
}

void SoftTree::backpropagate(TreeWorkspace& ws) const {
  const std::size_t nodes = num_nodes();
  const std::size_t leaves = num_leaves();
  if (ws.mass.size() != nodes + leaves) ws.mass.resize(nodes + leaves);
  if (ws.sensitivity.size() != nodes) ws.sensitivity.resize(nodes);
  double* mass = ws.mass.data();
  double* sens = ws.sensitivity.data();
  const double* gate = ws.gate.data();
  const double* reach = ws.reach.data();
  for (std::size_t l = 0; l < leaves; ++l) mass[nodes + l] = reach[nodes + l] * leaf_values_[l];
  for (std::size_t m = nodes; m-- > 0;) {
    const double left = mass[2 * m + 1];
    const double right = mass[2 * m + 2];
    mass[m] = left + right;
    // leaves below the right child carry (1 - p_m), below the left child (-p_m)
    sens[m] = (1.0 - gate[m]) * right - gate[m] * left;
  }
}

void SoftTree::accumulate_grad_input(const TreeWorkspace& ws, std::span<double> out) const {
  for (std::size_t m = 0; m < num_nodes(); ++m) {
    simd::axpy(ws.sensitivity[m], node_weights_.row(m), out);
  }
}

void SoftTree::accumulate_grad_params(std::span<const double> z, const TreeWorkspace& ws,
                                      double upstream, TreeGradient& grad) const {
  const std::size_t nodes = num_nodes();
  const std::size_t dim = z.size();
  double* gw = grad.node_weights.data().data();
  for (std::size_t m = 0; m < nodes; ++m) {
    const double s = upstream * ws.sensitivity[m];
    simd::axpy(s, z, {gw + m * dim, dim});
    grad.node_biases[m] += s;
  }
  simd::axpy(upstream, std::span<const double>(ws.reach).subspan(nodes), grad.leaf_values);
}

double SoftTree::forward(std::span<const double> z) const {
  check_input(z);
  TreeWorkspace ws;
  return evaluate(z, ws);
}

Vector SoftTree::leaf_probabilities(std::span<const double> z) const {
  check_input(z);
  TreeWorkspace ws;
  evaluate(z, ws);
  return Vector(ws.reach.begin() + static_cast<std::ptrdiff_t>(num_nodes()), ws.reach.end());
}

Vector SoftTree::grad_input(std::span<const double> z) const {
  check_input(z);
  TreeWorkspace ws;
  evaluate(z, ws);
  backpropagate(ws);
  Vector out(input_dim(), 0.0);
  accumulate_grad_input(ws, out);
  return out;
}

TreeGradient SoftTree::grad_params(std::span<const double> z, double upstream) const {
  check_input(z);
  TreeWorkspace ws;
  evaluate(z, ws);
  backpropagate(ws);
  TreeGradient grad = zero_gradient();
  accumulate_grad_params(z, ws, upstream, grad);
  return grad;
}

void SoftTree::apply_update(const TreeGradient& update, double step) {
  simd::axpy(-step, update.node_weights.data(), node_weights_.data());
  simd::axpy(-step, update.node_biases, node_biases_);
  simd::axpy(-step, update.leaf_values, leaf_values_);
  if (!node_weights_.all_finite() || !all_finite(node_biases_) || !all_finite(leaf_values_)) {
    throw TrainingError("soft tree parameters became non-finite", 0);
  }
}

void TreeFitConfig::validate() const {
  if (steps == 0) throw DomainError("tree fit steps must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw DomainError("tree learning rate must be positive");
  }
  if (!(init_weight_scale >= 0.0) || !std::isfinite(init_weight_scale)) {
    throw DomainError("tree init weight scale must be nonnegative");
  }
}

namespace {

void check_batch(const SoftTree& tree, const Matrix& inputs, std::span<const double> targets) {
  if (inputs.rows() == 0) throw DomainError("cannot fit a tree on an empty dataset");
  if (inputs.rows() != targets.size()) {
    throw DomainError("tree inputs have " + std::to_string(inputs.rows()) + " rows but " +
                      std::to_string(targets.size()) + " targets");
  }
  if (inputs.cols() != tree.input_dim()) {
    throw DomainError("tree expects inputs with " + std::to_string(tree.input_dim()) +
                      " columns, got " + std::to_string(inputs.cols()));
  }
}

}  // namespace

double tree_loss(const SoftTree& tree, const Matrix& inputs, std::span<const double> targets) {
  check_batch(tree, inputs, targets);
  TreeWorkspace ws;
  double sum = 0.0;
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    const double e = tree.evaluate(inputs.row(i), ws) - targets[i];
    sum += e * e;
  }
  return 0.5 * sum / static_cast<double>(inputs.rows());
}

TreeFitResult fit_tree(SoftTree tree, const Matrix& inputs, std::span<const double> targets,
                       const TreeFitConfig& config) {
  config.validate();
  check_batch(tree, inputs, targets);
  if (!inputs.all_finite() || !all_finite(targets)) {
    throw DomainError("tree fit data must be finite");
  }

  const std::size_t n = inputs.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  TreeWorkspace ws;
  TreeGradient grad = tree.zero_gradient();
  Vector trace;
  trace.reserve(config.steps + 1);

  for (std::size_t step = 0; step < config.steps; ++step) {
    grad *= 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto z = inputs.row(i);
      const double e = tree.evaluate(z, ws) - targets[i];
      sum += e * e;
      tree.backpropagate(ws);
      tree.accumulate_grad_params(z, ws, e * inv_n, grad);
    }
    const double loss = 0.5 * sum * inv_n;
    if (!std::isfinite(loss)) throw TrainingError("tree fit diverged at step " + std::to_string(step), step);
    trace.push_back(loss);
    try {
      tree.apply_update(grad, config.learning_rate);
    } catch (const TrainingError&) {
      throw TrainingError("tree fit diverged at step " + std::to_string(step), step);
    }
  }

  const double final_loss = tree_loss(tree, inputs, targets);
  if (!std::isfinite(final_loss)) {
    throw TrainingError("tree fit diverged at step " + std::to_string(config.steps), config.steps);
  }
  trace.push_back(final_loss);
  return {std::move(tree), std::move(trace), final_loss};
}

}  // namespace bsdtq
