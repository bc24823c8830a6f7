#include "bsdtq/boosting.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>
#include <type_traits>

#include "bsdtq/errors.hpp"
#include "bsdtq/random.hpp"
#include "bsdtq/simd.hpp"

namespace bsdtq {

namespace {

// Round k draws from stream k; the MLP initialization uses a stream no round reaches.
constexpr std::uint64_t kMlpInitStream = ~std::uint64_t{0};

std::string round_message(std::size_t round, const std::string& what) {
  return "boosting round " + std::to_string(round) + ": " + what;
}

template <class Map>
void joint_finetune(SoftTree& tree, Map& map, const Matrix& inputs, std::span<const double> r,
                    const BoostConfig& config) {
  const std::size_t n = inputs.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  TreeWorkspace ws;
  Vector g(tree.input_dim());
  for (std::size_t step = 0; step < config.transform.steps; ++step) {
    TreeGradient tree_grad = tree.zero_gradient();
    auto map_grad = map.zero_gradient();
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = inputs.row(i);
      double e = 0.0;
      if constexpr (std::is_same_v<Map, LinearMap>) {
        Vector z(map.output_dim());
        map.apply_row(x, z);
        e = tree.evaluate(z, ws) - r[i];
        tree.backpropagate(ws);
        tree.accumulate_grad_params(z, ws, e * inv_n, tree_grad);
        std::fill(g.begin(), g.end(), 0.0);
        tree.accumulate_grad_input(ws, g);
        for (std::size_t row = 0; row < g.size(); ++row) simd::axpy(e * g[row], x, map_grad.row(row));
      } else {
        MlpActivations act;
        map.forward_row(x, act);
        e = tree.evaluate(act.output, ws) - r[i];
        tree.backpropagate(ws);
        tree.accumulate_grad_params(act.output, ws, e * inv_n, tree_grad);
        std::fill(g.begin(), g.end(), 0.0);
        tree.accumulate_grad_input(ws, g);
        map.accumulate_backward(x, act, g, e, map_grad);
      }
      if (!std::isfinite(e)) throw TrainingError("joint fine-tune diverged", step);
    }
    tree.apply_update(tree_grad, config.tree.learning_rate);
    map.apply_update(map_grad, config.transform.learning_rate);
  }
}

}  // namespace

std::string_view variant_name(Variant variant) noexcept {
  return variant == Variant::BSDTQ ? "BSDTQ" : "BSDT";
}

std::optional<Variant> parse_variant(std::string_view text) noexcept {
  std::string upper;
  for (char c : text) {
    if (c != '-' && c != '_') upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (upper == "BSDTQ") return Variant::BSDTQ;
  if (upper == "BSDT") return Variant::BSDT;
  return std::nullopt;
}

Ensemble::Ensemble(Variant variant, double shrinkage, std::size_t input_dim)
    : variant_(variant), shrinkage_(shrinkage), input_dim_(input_dim) {
  if (!(shrinkage > 0.0 && shrinkage <= 1.0)) throw DomainError("shrinkage must be in (0, 1]");
  if (input_dim == 0) throw DomainError("ensemble input dimension must be positive");
}

void Ensemble::add_stage(Transform transform, SoftTree tree) {
  if (bsdtq::input_dim(transform) != input_dim_) {
    throw DomainError("stage transform takes " + std::to_string(bsdtq::input_dim(transform)) +
                      " inputs, ensemble has " + std::to_string(input_dim_));
  }
  if (bsdtq::output_dim(transform) != tree.input_dim()) {
    throw DomainError("stage tree input dimension does not match transform output");
  }
  if (variant_ == Variant::BSDT) {
    const auto* linear = std::get_if<LinearMap>(&transform);
    if (linear == nullptr || linear->matrix() != Matrix::identity(input_dim_)) {
      throw DomainError("BSDT stages must use the identity transform");
    }
  }
  stages_.push_back({std::move(transform), std::move(tree)});
}

void Ensemble::check_inputs(const Matrix& inputs) const {
  if (inputs.cols() != input_dim_) {
    throw DomainError("model expects " + std::to_string(input_dim_) + " features, got " +
                      std::to_string(inputs.cols()));
  }
}

Vector Ensemble::stage_output(std::size_t stage, const Matrix& inputs) const {
  check_inputs(inputs);
  if (stage >= stages_.size()) throw DomainError("stage index out of range");
  const Stage& s = stages_[stage];
  const Matrix z = bsdtq::apply(s.transform, inputs);
  Vector out(inputs.rows());
  TreeWorkspace ws;
  for (std::size_t i = 0; i < inputs.rows(); ++i) out[i] = s.tree.evaluate(z.row(i), ws);
  return out;
}

Vector Ensemble::predict(const Matrix& inputs) const {
  check_inputs(inputs);
  Vector pred(inputs.rows(), 0.0);
  for (std::size_t k = 0; k < stages_.size(); ++k) {
    const Vector f = stage_output(k, inputs);
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] += shrinkage_ * f[i];
  }
  return pred;
}

Matrix Ensemble::staged_predict(const Matrix& inputs) const {
  check_inputs(inputs);
  Matrix out(inputs.rows(), stages_.size());
  Vector pred(inputs.rows(), 0.0);
  for (std::size_t k = 0; k < stages_.size(); ++k) {
    const Vector f = stage_output(k, inputs);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] += shrinkage_ * f[i];
      out(i, k) = pred[i];
    }
  }
  return out;
}

void BoostConfig::validate() const {
  if (rounds == 0) throw DomainError("boosting rounds must be >= 1");
  if (!(shrinkage > 0.0 && shrinkage <= 1.0)) throw DomainError("shrinkage must be in (0, 1]");
  if (tree_depth == 0) throw DomainError("tree depth must be >= 1");
  tree.validate();
  transform.validate();
}

Transform initial_transform(std::size_t input_dim, const BoostConfig& config, Variant variant) {
  if (variant == Variant::BSDT) return LinearMap::identity(input_dim);
  const std::size_t out = config.transform.output_dim == 0 ? input_dim : config.transform.output_dim;
  if (config.transform.kind == TransformKind::Mlp) {
    Rng rng(derive_seed(config.seed, kMlpInitStream));
    return MlpTransform::random(input_dim, config.transform.hidden_units, out, rng);
  }
  if (out == input_dim) return LinearMap::identity(input_dim);
  return LinearMap::truncated_identity(out, input_dim);
}

TrainResult train(const Matrix& inputs, std::span<const double> targets, const BoostConfig& config,
                  Variant variant) {
  config.validate();
  const std::size_t n = inputs.rows();
  if (n == 0 || inputs.cols() == 0) throw DomainError("training data is empty");
  if (targets.size() != n) {
    throw DomainError("training data has " + std::to_string(n) + " rows but " +
                      std::to_string(targets.size()) + " targets");
  }
  if (!inputs.all_finite() || !all_finite(targets)) {
    throw DomainError("training data must be finite");
  }

  const Transform start = initial_transform(inputs.cols(), config, variant);
  Transform current = start;
  Ensemble model(variant, config.shrinkage, inputs.cols());
  Vector pred(n, 0.0);
  Vector residual(n);
  Vector trace;
  trace.reserve(config.rounds);

  for (std::size_t round = 1; round <= config.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = targets[i] - pred[i];
    Transform base = config.transform.warm_start ? current : start;
    Rng rng(derive_seed(config.seed, round));

    try {
      const Matrix z = bsdtq::apply(base, inputs);
      SoftTree tree = SoftTree::random(config.tree_depth, output_dim(base),
                                       config.tree.init_weight_scale, rng);
      tree = fit_tree(std::move(tree), z, residual, config.tree).tree;

      Transform next = std::move(base);
      if (variant == Variant::BSDTQ) {
        next = fit_transform(tree, std::move(next), inputs, residual, config.transform).transform;
        if (config.transform.joint_finetune) {
          std::visit([&](auto& map) { joint_finetune(tree, map, inputs, residual, config); }, next);
        }
      }

      const Matrix z_next = bsdtq::apply(next, inputs);
      TreeWorkspace ws;
      double sse = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        pred[i] += config.shrinkage * tree.evaluate(z_next.row(i), ws);
        const double e = targets[i] - pred[i];
        sse += e * e;
      }
      const double mse = sse / static_cast<double>(n);
      if (!std::isfinite(mse)) throw TrainingError("training loss is not finite", round);
      trace.push_back(mse);
      current = next;
      model.add_stage(std::move(next), std::move(tree));
    } catch (const TrainingError& e) {
      throw TrainingError(round_message(round, e.what()), round);
    }
  }
  return {std::move(model), std::move(trace)};
}

}  // namespace bsdtq
