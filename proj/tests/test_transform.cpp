#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bsdtq/data.hpp"
#include "bsdtq/errors.hpp"
#include "bsdtq/transform.hpp"
#include "support.hpp"

using namespace bsdtq;
namespace ts = testing_support;

namespace {

double f_of_q(const SoftTree& tree, const Vector& q, std::size_t rows, std::size_t cols, const Vector& x) {
  Vector z(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) z[r] += q[r * cols + c] * x[c];
  }
  return ts::brute_forward(tree, z);
}

}  // namespace

TEST(LinearMap, IdentityIsExact) {
  std::mt19937_64 gen(1);
  const Matrix x = ts::gaussian_matrix(gen, 9, 6);
  EXPECT_EQ(LinearMap::identity(6).apply(x), x);
}

TEST(LinearMap, Scaling) {
  const LinearMap q(Matrix(2, 2, {2.0, 0.0, 0.0, 2.0}));
  EXPECT_EQ(q.apply(Matrix(1, 2, {1.0, -1.0})), Matrix(1, 2, {2.0, -2.0}));
}

TEST(LinearMap, ApplyMatchesTripleLoop) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t in = 1 + gen() % 20;
    const std::size_t out = 1 + gen() % 9;
    const LinearMap q(ts::gaussian_matrix(gen, out, in));
    const Matrix x = ts::gaussian_matrix(gen, 7, in);
    const Matrix z = q.apply(x);
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::size_t r = 0; r < out; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < in; ++c) acc += q.matrix()(r, c) * x(i, c);
        EXPECT_NEAR(z(i, r), acc, 1e-12);
      }
    }
  }
}

TEST(LinearMap, TruncatedIdentityPassesLeadingInputs) {
  const LinearMap q = LinearMap::truncated_identity(2, 4);
  EXPECT_EQ(q.apply(Matrix(1, 4, {1.0, 2.0, 3.0, 4.0})), Matrix(1, 2, {1.0, 2.0}));
  EXPECT_THROW(LinearMap::truncated_identity(5, 4), DomainError);
  EXPECT_THROW(LinearMap(Matrix(0, 0)), DomainError);
  EXPECT_THROW(LinearMap(Matrix(1, 1, {NAN})), DomainError);
  EXPECT_THROW(q.apply(Matrix(1, 3)), DomainError);
}

TEST(GradLinear, ZeroInputOrZeroTreeWeights) {
  std::mt19937_64 gen(3);
  const SoftTree tree = ts::random_tree(gen, 2, 3);
  const LinearMap q(ts::gaussian_matrix(gen, 3, 4));
  EXPECT_EQ(grad_linear(tree, q, Vector(4, 0.0)), Matrix(3, 4));
  const SoftTree flat(2, Matrix(3, 3), tree.node_biases(), tree.leaf_values());
  EXPECT_EQ(grad_linear(flat, q, ts::gaussian(gen, 4)), Matrix(3, 4));
}

TEST(GradLinear, MatchesFiniteDifferences) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 40; ++trial) {
    const unsigned depth = 1 + static_cast<unsigned>(trial % 4);
    const std::size_t in = 1 + gen() % 16;
    const std::size_t out = 1 + gen() % 8;
    const SoftTree tree = ts::random_tree(gen, depth, out, 1.0 / std::sqrt(static_cast<double>(out)));
    const LinearMap q(ts::gaussian_matrix(gen, out, in, 1.0 / std::sqrt(static_cast<double>(in))));
    const Vector x = ts::gaussian(gen, in);
    const Vector fd = ts::central_difference(
        [&](const Vector& p) { return f_of_q(tree, p, out, in, x); }, ts::flat(q.matrix()));
    EXPECT_LT(ts::rel_err(ts::flat(grad_linear(tree, q, x)), fd), 1e-6);
  }
}

TEST(GradLossLinear, ZeroAtPerfectFit) {
  std::mt19937_64 gen(5);
  const SoftTree tree = ts::random_tree(gen, 2, 2);
  const LinearMap q(ts::gaussian_matrix(gen, 2, 3));
  const Matrix x = ts::gaussian_matrix(gen, 6, 3);
  Vector y(6);
  for (std::size_t i = 0; i < 6; ++i) y[i] = tree.forward(q.apply(x).row(i));
  EXPECT_EQ(grad_loss_linear(tree, q, x, y), Matrix(2, 3));
  EXPECT_EQ(transform_loss(tree, q, x, y), 0.0);
}

TEST(GradLossLinear, MatchesFiniteDifferencesOfSummedLoss) {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t in = 1 + gen() % 10;
    const std::size_t out = 1 + gen() % 5;
    const SoftTree tree = ts::random_tree(gen, 1 + static_cast<unsigned>(trial % 4), out, 0.5);
    const LinearMap q(ts::gaussian_matrix(gen, out, in, 0.5));
    const Matrix x = ts::gaussian_matrix(gen, 8, in);
    const Vector y = ts::gaussian(gen, 8);
    auto loss = [&](const Vector& p) {
      double s = 0.0;
      for (std::size_t i = 0; i < 8; ++i) {
        const Vector xi(x.row(i).begin(), x.row(i).end());
        const double e = f_of_q(tree, p, out, in, xi) - y[i];
        s += 0.5 * e * e;
      }
      return s;
    };
    const Vector fd = ts::central_difference(loss, ts::flat(q.matrix()));
    EXPECT_LT(ts::rel_err(ts::flat(grad_loss_linear(tree, q, x, y)), fd), 1e-6);
  }
}

TEST(GradMlp, OneHiddenUnitByHand) {
  const double x = 1.0, w1 = 0.5, w2 = 2.0;
  const MlpTransform mlp(Matrix(1, 1, {w1}), {0.0}, Matrix(1, 1, {w2}), {0.0});
  const SoftTree tree(1, Matrix(1, 1, {1.0}), {0.0}, {0.0, 1.0});
  // f = s(z), z = w2 s(w1 x); s' = s (1 - s)
  const double h = 1.0 / (1.0 + std::exp(-w1 * x));
  const double z = w2 * h;
  const double s = 1.0 / (1.0 + std::exp(-z));
  const double df_dz = s * (1.0 - s);
  const double df_da = df_dz * w2 * h * (1.0 - h);
  const MlpGradient g = grad_mlp(tree, mlp, Vector{x});
  EXPECT_NEAR(g.layer2_weights(0, 0), df_dz * h, 1e-15);
  EXPECT_NEAR(g.layer2_biases[0], df_dz, 1e-15);
  EXPECT_NEAR(g.layer1_weights(0, 0), df_da * x, 1e-15);
  EXPECT_NEAR(g.layer1_biases[0], df_da, 1e-15);
}

TEST(GradMlp, ZeroSecondLayerLeavesOnlyOutputPath) {
  std::mt19937_64 gen(7);
  const std::size_t in = 3, hidden = 4, out = 2;
  const MlpTransform mlp(ts::gaussian_matrix(gen, hidden, in), ts::gaussian(gen, hidden), Matrix(out, hidden),
                         ts::gaussian(gen, out));
  const SoftTree tree = ts::random_tree(gen, 2, out);
  const Vector x = ts::gaussian(gen, in);
  const MlpGradient g = grad_mlp(tree, mlp, x);
  for (double v : g.layer1_weights.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.layer1_biases) EXPECT_EQ(v, 0.0);
  MlpActivations act;
  mlp.forward_row(x, act);
  const Vector gz = tree.grad_input(act.output);
  for (std::size_t r = 0; r < out; ++r) {
    EXPECT_DOUBLE_EQ(g.layer2_biases[r], gz[r]);
    for (std::size_t j = 0; j < hidden; ++j) EXPECT_DOUBLE_EQ(g.layer2_weights(r, j), gz[r] * act.hidden[j]);
  }
  // with flat tree gates nothing flows back at all
  const SoftTree flat(2, Matrix(3, out), tree.node_biases(), tree.leaf_values());
  for (double v : grad_mlp(flat, mlp, x).flatten()) EXPECT_EQ(v, 0.0);
}

TEST(GradMlp, MatchesFiniteDifferences) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t in = 1 + gen() % 8;
    const std::size_t hidden = 1 + gen() % 6;
    const std::size_t out = 1 + gen() % 4;
    const SoftTree tree = ts::random_tree(gen, 1 + static_cast<unsigned>(trial % 4), out, 0.7);
    const MlpTransform mlp(ts::gaussian_matrix(gen, hidden, in, 0.5), ts::gaussian(gen, hidden, 0.5),
                           ts::gaussian_matrix(gen, out, hidden, 0.5), ts::gaussian(gen, out, 0.5));
    const Vector x = ts::gaussian(gen, in);
    auto rebuild = [&](const Vector& p) {
      std::size_t pos = 0;
      auto take = [&](std::size_t n) {
        Vector v(p.begin() + pos, p.begin() + pos + n);
        pos += n;
        return v;
      };
      Matrix w1(hidden, in, take(hidden * in));
      Vector b1 = take(hidden);
      Matrix w2(out, hidden, take(out * hidden));
      Vector b2 = take(out);
      return MlpTransform(std::move(w1), std::move(b1), std::move(w2), std::move(b2));
    };
    auto f = [&](const Vector& p) {
      const MlpTransform m = rebuild(p);
      // independent forward pass
      Vector h(hidden), z(out);
      for (std::size_t j = 0; j < hidden; ++j) {
        double a = m.layer1_biases()[j];
        for (std::size_t c = 0; c < in; ++c) a += m.layer1_weights()(j, c) * x[c];
        h[j] = ts::naive_sigmoid(a);
      }
      for (std::size_t r = 0; r < out; ++r) {
        z[r] = m.layer2_biases()[r];
        for (std::size_t j = 0; j < hidden; ++j) z[r] += m.layer2_weights()(r, j) * h[j];
      }
      return ts::brute_forward(tree, z);
    };
    Vector params = ts::flat(mlp.layer1_weights());
    params.insert(params.end(), mlp.layer1_biases().begin(), mlp.layer1_biases().end());
    const Vector w2 = ts::flat(mlp.layer2_weights());
    params.insert(params.end(), w2.begin(), w2.end());
    params.insert(params.end(), mlp.layer2_biases().begin(), mlp.layer2_biases().end());
    EXPECT_LT(ts::rel_err(grad_mlp(tree, mlp, x).flatten(), ts::central_difference(f, params)), 1e-6);
  }
}

TEST(GradLossMlp, IsSumOfPerRowGradients) {
  std::mt19937_64 gen(9);
  Rng rng(1);
  const MlpTransform mlp = MlpTransform::random(4, 3, 2, rng);
  const SoftTree tree = ts::random_tree(gen, 2, 2);
  const Matrix x = ts::gaussian_matrix(gen, 5, 4);
  const Vector y = ts::gaussian(gen, 5);
  MlpGradient sum = mlp.zero_gradient();
  for (std::size_t i = 0; i < 5; ++i) {
    MlpActivations act;
    mlp.forward_row(x.row(i), act);
    const double e = tree.forward(act.output) - y[i];
    MlpGradient gi = grad_mlp(tree, mlp, x.row(i));
    for (double& v : gi.layer1_weights.data()) v *= e;
    for (double& v : gi.layer1_biases) v *= e;
    for (double& v : gi.layer2_weights.data()) v *= e;
    for (double& v : gi.layer2_biases) v *= e;
    sum += gi;
  }
  EXPECT_LT(ts::rel_err(grad_loss_mlp(tree, mlp, x, y).flatten(), sum.flatten()), 1e-14);
}

TEST(FitTransform, ZeroStepsReturnsTransformUnchanged) {
  std::mt19937_64 gen(10);
  const SoftTree tree = ts::random_tree(gen, 2, 3);
  const LinearMap q(ts::gaussian_matrix(gen, 3, 5));
  TransformFitConfig cfg;
  cfg.steps = 0;
  const TransformFitResult r = fit_transform(tree, q, ts::gaussian_matrix(gen, 10, 5), ts::gaussian(gen, 10), cfg);
  EXPECT_EQ(std::get<LinearMap>(r.transform), q);
  EXPECT_EQ(r.loss_trace.size(), 1u);
}

TEST(FitTransform, QuadraticRegimeStrictlyDecreases) {
  std::mt19937_64 gen(11);
  const SoftTree tree(1, Matrix(1, 3, {0.01, -0.02, 0.015}), {0.0}, {-5.0, 5.0});
  const Matrix x = ts::gaussian_matrix(gen, 30, 4);
  const Vector y = ts::gaussian(gen, 30, 0.1);
  TransformFitConfig cfg;
  cfg.steps = 50;
  cfg.learning_rate = 1e-3;
  const auto r = fit_transform(tree, LinearMap(ts::gaussian_matrix(gen, 3, 4)), x, y, cfg);
  ASSERT_EQ(r.loss_trace.size(), 51u);
  for (std::size_t k = 1; k < r.loss_trace.size(); ++k) EXPECT_LT(r.loss_trace[k], r.loss_trace[k - 1]);
  EXPECT_EQ(r.loss_trace.back(), transform_loss(tree, r.transform, x, y));
}

TEST(FitTransform, MlpLossDecreases) {
  std::mt19937_64 gen(12);
  Rng rng(3);
  const SoftTree tree = ts::random_tree(gen, 2, 2, 0.5);
  const Matrix x = ts::gaussian_matrix(gen, 40, 3);
  Vector y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = 0.5 * x(i, 0);
  TransformFitConfig cfg;
  cfg.kind = TransformKind::Mlp;
  cfg.steps = 30;
  cfg.learning_rate = 1e-2;
  const auto r = fit_transform(tree, MlpTransform::random(3, 4, 2, rng), x, y, cfg);
  EXPECT_LT(r.loss_trace.back(), r.loss_trace.front());
}

TEST(FitTransform, IrrelevantColumnsShrinkOnSyntheticData) {
  SynthSpec spec;
  spec.n_series = 10;
  spec.horizon = 100;
  spec.seed = 4;
  const SyntheticData data = generate_synthetic(spec);
  const auto& x = data.dataset.features;
  // A tree that is already a monotone function of its first input.
  const std::size_t d = x.cols();
  Matrix w(1, 1, {1.0});
  const SoftTree tree(1, w, {0.0}, {-5.0, 5.0});
  TransformFitConfig cfg;
  cfg.steps = 200;
  cfg.learning_rate = 1e-4;
  const auto r = fit_transform(tree, LinearMap(Matrix(1, d, 0.01)), x, data.dataset.target, cfg);
  const Matrix& q = std::get<LinearMap>(r.transform).matrix();
  double rel = 0.0, irr = 0.0;
  for (std::size_t c = 0; c < d; ++c) (c < spec.n_relevant ? rel : irr) += std::fabs(q(0, c));
  rel /= static_cast<double>(spec.n_relevant);
  irr /= static_cast<double>(spec.n_irrelevant);
  EXPECT_LT(irr, 0.1 * rel);
}

TEST(FitTransform, RejectsBadConfig) {
  TransformFitConfig cfg;
  cfg.learning_rate = -1.0;
  const SoftTree tree(1, 2);
  EXPECT_THROW(fit_transform(tree, LinearMap::identity(2), Matrix(3, 2), Vector(3), cfg), DomainError);
  cfg = {};
  EXPECT_THROW(fit_transform(tree, LinearMap::identity(3), Matrix(3, 3), Vector(3), cfg), DomainError);
  EXPECT_THROW(fit_transform(tree, LinearMap::identity(2), Matrix(3, 2), Vector(2), cfg), DomainError);
}
