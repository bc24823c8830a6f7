#pragma once

// Helpers shared by the unit tests: random instances and oracles written
// independently of the library's recursive implementations.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "bsdtq/matrix.hpp"
#include "bsdtq/sdt.hpp"

namespace testing_support {

using bsdtq::Matrix;
using bsdtq::Vector;

inline Vector gaussian(std::mt19937_64& gen, std::size_t n, double sd = 1.0) {
  std::normal_distribution<double> dist(0.0, sd);
  Vector v(n);
  for (double& x : v) x = dist(gen);
  return v;
}

inline Matrix gaussian_matrix(std::mt19937_64& gen, std::size_t rows, std::size_t cols, double sd = 1.0) {
  return Matrix(rows, cols, gaussian(gen, rows * cols, sd));
}

inline bsdtq::SoftTree random_tree(std::mt19937_64& gen, unsigned depth, std::size_t dim,
                                   double weight_sd = 1.0) {
  const std::size_t nodes = (std::size_t{1} << depth) - 1;
  return bsdtq::SoftTree(depth, gaussian_matrix(gen, nodes, dim, weight_sd), gaussian(gen, nodes, 0.5),
                         gaussian(gen, nodes + 1));
}

inline double naive_sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// Product of gate probabilities along each root-to-leaf path, found by
// walking the heap indices directly.
inline Vector brute_leaf_probabilities(const bsdtq::SoftTree& tree, const Vector& z) {
  const unsigned depth = tree.depth();
  const std::size_t leaves = std::size_t{1} << depth;
  Vector out(leaves);
  for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
    double prob = 1.0;
    std::size_t node = 0;
    for (unsigned level = 0; level < depth; ++level) {
      const int right = static_cast<int>((leaf >> (depth - 1 - level)) & 1U);
      double a = tree.node_biases()[node];
      for (std::size_t k = 0; k < z.size(); ++k) a += tree.node_weights()(node, k) * z[k];
      const double p = naive_sigmoid(a);
      prob *= right ? p : 1.0 - p;
      node = 2 * node + 1 + static_cast<std::size_t>(right);
    }
    out[leaf] = prob;
  }
  return out;
}

inline double brute_forward(const bsdtq::SoftTree& tree, const Vector& z) {
  const Vector probs = brute_leaf_probabilities(tree, z);
  double f = 0.0;
  for (std::size_t l = 0; l < probs.size(); ++l) f += probs[l] * tree.leaf_values()[l];
  return f;
}

inline Vector central_difference(const std::function<double(const Vector&)>& f, Vector x, double h = 1e-5) {
  Vector g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double keep = x[j];
    x[j] = keep + h;
    const double up = f(x);
    x[j] = keep - h;
    const double down = f(x);
    x[j] = keep;
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double rel_err(const Vector& a, const Vector& b) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(d) / (std::sqrt(na) + std::sqrt(nb) + 1e-12);
}

inline Vector flat(const Matrix& m) { return Vector(m.data().begin(), m.data().end()); }

}  // namespace testing_support
