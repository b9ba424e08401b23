#pragma once

#include <cstdint>

#include "permgec/model.hpp"

namespace permgec::nn {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// First/second moments per parameter plus the step counter.
struct OptimizerState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  std::int64_t step = 0;

  static OptimizerState for_model(const Model& model);
};

/// Bias-corrected adaptive-moment update with weight decay applied to the
/// parameter directly rather than through the gradient:
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p
/// `lr` overrides cfg.lr (schedules pass the scheduled value).
void adamw_step(Model& model, const Gradients& grads, OptimizerState& state,
                const AdamWConfig& cfg, double lr);

}  // namespace permgec::nn
