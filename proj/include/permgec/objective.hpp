#pragma once

#include <optional>
#include <random>
#include <span>
#include <vector>

#include "permgec/model.hpp"
#include "permgec/sundae.hpp"

namespace permgec::nn {

struct LossConfig {
  double lambda_per = 5.0;
  SundaeConfig sundae;
};

/// Second-pass decoder input drawn from the first pass. Kept outside the loss
/// so that a draw can be frozen (finite-difference checks, replay).
struct PassTwoInput {
  TokenIds tokens;
};

struct ExampleLoss {
  double total = 0.0;
  double permutation = 0.0;  // -log p(pi | x), unweighted
  double decoder = 0.0;      // lambda0 * CE1 + (1 - lambda0) * CE2
  std::size_t msk_count = 0;
};

/// Loss of one example; accumulates d(total)/d(params) into ctx.grads when
/// set. When `pass_two` holds a value it is used as the second-pass input;
/// otherwise a draw is made from ctx.rng (or the argmax without one) and
/// stored there.
ExampleLoss example_loss(const Model& model, const TrainingExample& ex, const LossConfig& cfg,
                         const ForwardContext& ctx, std::optional<PassTwoInput>* pass_two);

struct BatchLoss {
  double total = 0.0;
  double permutation = 0.0;
  double decoder = 0.0;
  Gradients grads;
};

/// Mean loss over the batch and its gradient. Per-example gradients are
/// summed in batch order, so results do not depend on `jobs`. Throws
/// Errc::numerical_divergence naming the offending example.
BatchLoss total_loss(const Model& model, std::span<const TrainingExample> batch,
                     const LossConfig& cfg, bool training, std::uint64_t seed, int jobs = 1,
                     std::vector<std::optional<PassTwoInput>>* pass_two = nullptr);

}  // namespace permgec::nn
