#pragma once

// Boosted soft decision trees with a per-round learnable input transform.
//
// Round k fits a soft tree to the residual r_k = y - yhat^(k-1) on the
// inputs seen through the previous transform, then (BSDTQ only) refines the
// transform with the tree held fixed, and finally accumulates
// yhat^(k) = yhat^(k-1) + shrinkage * SDT_k(Q_k X). The BSDT baseline keeps
// every transform at the identity.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bsdtq/matrix.hpp"
#include "bsdtq/sdt.hpp"
#include "bsdtq/transform.hpp"

namespace bsdtq {

enum class Variant { BSDTQ, BSDT };

std::string_view variant_name(Variant variant) noexcept;
// Accepts "BSDTQ", "BSDT-Q" and "BSDT" (case-insensitive).
std::optional<Variant> parse_variant(std::string_view text) noexcept;

struct Stage {
  Transform transform;
  SoftTree tree;

  friend bool operator==(const Stage&, const Stage&) = default;
};

class Ensemble {
 public:
  // Throws DomainError unless 0 < shrinkage <= 1 and input_dim >= 1.
  Ensemble(Variant variant, double shrinkage, std::size_t input_dim);

  // Throws DomainError if the transform does not take input_dim() inputs or
  // the tree does not take the transform's outputs.
  void add_stage(Transform transform, SoftTree tree);

  Variant variant() const noexcept { return variant_; }
  double shrinkage() const noexcept { return shrinkage_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t num_stages() const noexcept { return stages_.size(); }
  const std::vector<Stage>& stages() const noexcept { return stages_; }

  // sum_k shrinkage * SDT_k(Q_k x) per row. Throws DomainError on a column mismatch.
  Vector predict(const Matrix& inputs) const;
  // Column k holds the prediction after k+1 stages; the last column equals predict().
  Matrix staged_predict(const Matrix& inputs) const;
  // SDT_k(Q_k x) per row, without shrinkage.
  Vector stage_output(std::size_t stage, const Matrix& inputs) const;

  friend bool operator==(const Ensemble&, const Ensemble&) = default;

 private:
  void check_inputs(const Matrix& inputs) const;

  Variant variant_;
  double shrinkage_;
  std::size_t input_dim_;
  std::vector<Stage> stages_;
};

struct BoostConfig {
  std::size_t rounds = 100;
  double shrinkage = 0.1;
  unsigned tree_depth = 3;
  TreeFitConfig tree;
  TransformFitConfig transform;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  Ensemble model;
  // Training MSE of yhat^(k) after each round; length == rounds.
  Vector loss_trace;
};

// Throws DomainError for empty, mismatched, or non-finite data and
// TrainingError (index = 1-based round) if any round diverges.
TrainResult train(const Matrix& inputs, std::span<const double> targets, const BoostConfig& config,
                  Variant variant);

// The transform round 1 starts from: identity for BSDT; for BSDTQ the
// identity, [I | 0], or a seeded random MLP depending on config.transform.
Transform initial_transform(std::size_t input_dim, const BoostConfig& config, Variant variant);

}  // namespace bsdtq
