#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bsdtq/errors.hpp"
#include "bsdtq/sdt.hpp"
#include "support.hpp"

using namespace bsdtq;
namespace ts = testing_support;

TEST(LeafPath, DepthOneLeftLeaf) {
  EXPECT_EQ(leaf_path(1, 0), (std::vector<PathStep>{{0, 0}}));
}

TEST(LeafPath, DepthTwoRightmost) {
  EXPECT_EQ(leaf_path(2, 3), (std::vector<PathStep>{{0, 1}, {2, 1}}));
}

TEST(LeafPath, DepthThreeLeafFive) {
  // 5 = 0b101: right to node 2, left to node 5 (= 2*2+1), right to leaf slot 12.
  EXPECT_EQ(leaf_path(3, 5), (std::vector<PathStep>{{0, 1}, {2, 0}, {5, 1}}));
}

TEST(LeafPath, EveryPathEndsAtItsHeapSlot) {
  for (unsigned depth = 1; depth <= 6; ++depth) {
    const std::size_t leaves = std::size_t{1} << depth;
    for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
      const auto path = leaf_path(depth, leaf);
      ASSERT_EQ(path.size(), depth);
      EXPECT_EQ(path.front().node, 0u);
      const auto& last = path.back();
      EXPECT_EQ(2 * last.node + 1 + static_cast<std::size_t>(last.direction), leaves - 1 + leaf);
    }
  }
}

TEST(LeafPath, RejectsBadArguments) {
  EXPECT_THROW(leaf_path(0, 0), DomainError);
  EXPECT_THROW(leaf_path(2, 4), DomainError);
  EXPECT_THROW(leaf_path(SoftTree::kMaxDepth + 1, 0), DomainError);
}

TEST(Sigmoid, StableAtExtremes) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_NEAR(sigmoid(2.0) + sigmoid(-2.0), 1.0, 2.3e-16);
  EXPECT_NEAR(sigmoid(-30.0), std::exp(-30.0) / (1.0 + std::exp(-30.0)), 1e-28);
}

TEST(SoftTree, SymmetricLeavesCancelAtHalf) {
  const SoftTree tree(1, Matrix(1, 2, {2.0, 0.0}), {0.0}, {-1.0, 1.0});
  EXPECT_EQ(tree.forward(Vector{0.0, 0.0}), 0.0);
  EXPECT_EQ(tree.leaf_probabilities(Vector{0.0, 0.0}), (Vector{0.5, 0.5}));
}

TEST(SoftTree, SaturatedGateRoutesRight) {
  const SoftTree tree(1, Matrix(1, 2, {1.0, 0.0}), {0.0}, {0.0, 1.0});
  EXPECT_NEAR(tree.forward(Vector{50.0, 0.0}), 1.0, 1e-9);
}

TEST(SoftTree, ForwardMatchesLeafProductOracle) {
  std::mt19937_64 gen(1);
  for (unsigned depth = 1; depth <= 5; ++depth) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t dim = 1 + gen() % 7;
      const SoftTree tree = ts::random_tree(gen, depth, dim);
      const Vector z = ts::gaussian(gen, dim);
      EXPECT_NEAR(tree.forward(z), ts::brute_forward(tree, z), 1e-12);
      const Vector probs = tree.leaf_probabilities(z);
      const Vector oracle = ts::brute_leaf_probabilities(tree, z);
      for (std::size_t l = 0; l < probs.size(); ++l) EXPECT_NEAR(probs[l], oracle[l], 1e-13);
    }
  }
}

TEST(SoftTree, LeafProbabilitiesSumToOne) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 200; ++trial) {
    const unsigned depth = 1 + static_cast<unsigned>(gen() % 8);
    const std::size_t dim = 1 + gen() % 10;
    const SoftTree tree = ts::random_tree(gen, depth, dim, 3.0);
    const Vector z = ts::gaussian(gen, dim, 2.0);
    double sum = 0.0;
    for (double p : tree.leaf_probabilities(z)) {
      EXPECT_GE(p, 0.0);
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(SoftTree, GradInputHandCase) {
  // p(1 - p)(gamma_1 - gamma_0) w with p = 1/2.
  const SoftTree tree(1, Matrix(1, 2, {1.0, 0.0}), {0.0}, {0.0, 1.0});
  EXPECT_EQ(tree.grad_input(Vector{0.0, 0.0}), (Vector{0.25, 0.0}));
}

TEST(SoftTree, GradInputZeroWithoutWeights) {
  std::mt19937_64 gen(3);
  SoftTree random = ts::random_tree(gen, 3, 4);
  const SoftTree tree(3, Matrix(7, 4), random.node_biases(), random.leaf_values());
  EXPECT_EQ(tree.grad_input(ts::gaussian(gen, 4)), Vector(4, 0.0));
}

TEST(SoftTree, GradInputMatchesFiniteDifferences) {
  std::mt19937_64 gen(4);
  for (unsigned depth = 1; depth <= 4; ++depth) {
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t dim = 1 + gen() % 8;
      const SoftTree tree = ts::random_tree(gen, depth, dim);
      const Vector z = ts::gaussian(gen, dim);
      const Vector fd = ts::central_difference([&](const Vector& v) { return ts::brute_forward(tree, v); }, z);
      EXPECT_LT(ts::rel_err(tree.grad_input(z), fd), 1e-6);
    }
  }
}

TEST(SoftTree, GradParamsZeroInputKillsWeightGradient) {
  std::mt19937_64 gen(5);
  const SoftTree tree = ts::random_tree(gen, 3, 3);
  const TreeGradient g = tree.grad_params(Vector(3, 0.0), 1.0);
  for (double v : g.node_weights.data()) EXPECT_EQ(v, 0.0);
  double bias_norm = 0.0;
  for (double v : g.node_biases) bias_norm += std::fabs(v);
  EXPECT_GT(bias_norm, 0.0);
}

TEST(SoftTree, GradParamsMatchesFiniteDifferences) {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 20; ++trial) {
    const unsigned depth = 1 + static_cast<unsigned>(trial % 4);
    const std::size_t dim = 1 + gen() % 5;
    const SoftTree tree = ts::random_tree(gen, depth, dim);
    const Vector z = ts::gaussian(gen, dim);
    const std::size_t nodes = tree.num_nodes();
    Vector params = ts::flat(tree.node_weights());
    params.insert(params.end(), tree.node_biases().begin(), tree.node_biases().end());
    params.insert(params.end(), tree.leaf_values().begin(), tree.leaf_values().end());
    auto rebuild = [&](const Vector& p) {
      return SoftTree(depth, Matrix(nodes, dim, Vector(p.begin(), p.begin() + nodes * dim)),
                      Vector(p.begin() + nodes * dim, p.begin() + nodes * dim + nodes),
                      Vector(p.begin() + nodes * dim + nodes, p.end()));
    };
    const Vector fd = ts::central_difference([&](const Vector& p) { return ts::brute_forward(rebuild(p), z); }, params);
    EXPECT_LT(ts::rel_err(tree.grad_params(z, 1.0).flatten(), fd), 1e-6);

    // Leaf gradient is exactly the leaf probability vector; upstream scales linearly.
    const TreeGradient g = tree.grad_params(z, 2.5);
    const Vector probs = tree.leaf_probabilities(z);
    for (std::size_t l = 0; l < probs.size(); ++l) EXPECT_DOUBLE_EQ(g.leaf_values[l], 2.5 * probs[l]);
  }
}

TEST(SoftTree, ConstructorValidatesShapes) {
  EXPECT_THROW(SoftTree(2, Matrix(2, 3), Vector(3), Vector(4)), DomainError);
  EXPECT_THROW(SoftTree(2, Matrix(3, 3), Vector(3), Vector(3)), DomainError);
  EXPECT_THROW(SoftTree(1, Matrix(1, 1, {NAN}), Vector(1), Vector(2)), DomainError);
  EXPECT_THROW(SoftTree(0, 3), DomainError);
  EXPECT_THROW(SoftTree(2, 0), DomainError);
  const SoftTree tree(2, 3);
  EXPECT_THROW(tree.forward(Vector(2)), DomainError);
}

TEST(SoftTree, RandomInitIsSeeded) {
  Rng a(7);
  Rng b(7);
  EXPECT_EQ(SoftTree::random(3, 4, 0.1, a), SoftTree::random(3, 4, 0.1, b));
  Rng c(7);
  const SoftTree zero = SoftTree::random(3, 4, 0.0, c);
  EXPECT_EQ(zero, SoftTree(3, 4));
}

TEST(FitTree, ConstantTargetConverges) {
  std::mt19937_64 gen(8);
  const Matrix x = ts::gaussian_matrix(gen, 64, 2);
  const Vector y(64, 0.7);
  TreeFitConfig cfg;
  cfg.steps = 400;
  Rng rng(1);
  const TreeFitResult r = fit_tree(SoftTree::random(1, 2, 0.1, rng), x, y, cfg);
  EXPECT_LT(2.0 * r.final_loss, 1e-3);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(r.tree.forward(x.row(i)), 0.7, 0.05);
}

TEST(FitTree, DefaultConfigLossIsNonincreasing) {
  std::mt19937_64 gen(9);
  const Matrix x = ts::gaussian_matrix(gen, 300, 5);
  Vector y(300);
  for (std::size_t i = 0; i < 300; ++i) y[i] = std::tanh(x(i, 0) - 0.5 * x(i, 3));
  Rng rng(2);
  const TreeFitConfig cfg;
  const TreeFitResult r = fit_tree(SoftTree::random(3, 5, cfg.init_weight_scale, rng), x, y, cfg);
  ASSERT_EQ(r.loss_trace.size(), cfg.steps + 1);
  for (std::size_t k = 1; k < r.loss_trace.size(); ++k) EXPECT_LE(r.loss_trace[k], r.loss_trace[k - 1]);
  EXPECT_EQ(r.loss_trace.back(), r.final_loss);
  EXPECT_EQ(r.final_loss, tree_loss(r.tree, x, y));
}

TEST(FitTree, RejectsBadConfigAndData) {
  const Matrix x(4, 2);
  const Vector y(4, 0.0);
  TreeFitConfig cfg;
  cfg.steps = 0;
  EXPECT_THROW(fit_tree(SoftTree(1, 2), x, y, cfg), DomainError);
  cfg = {};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(fit_tree(SoftTree(1, 2), x, y, cfg), DomainError);
  cfg = {};
  EXPECT_THROW(fit_tree(SoftTree(1, 3), x, y, cfg), DomainError);
  EXPECT_THROW(fit_tree(SoftTree(1, 2), x, Vector(3), cfg), DomainError);
  EXPECT_THROW(fit_tree(SoftTree(1, 2), Matrix(0, 2), Vector{}, cfg), DomainError);
  EXPECT_THROW(fit_tree(SoftTree(1, 2), x, Vector{0.0, 0.0, INFINITY, 0.0}, cfg), DomainError);
}

TEST(FitTree, DivergenceIsATrainingError) {
  std::mt19937_64 gen(10);
  const Matrix x = ts::gaussian_matrix(gen, 20, 2);
  const Vector y(20, 1e300);
  TreeFitConfig cfg;
  cfg.learning_rate = 1e300;
  EXPECT_THROW(fit_tree(SoftTree(2, 2), x, y, cfg), TrainingError);
}
