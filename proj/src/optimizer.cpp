#include "permgec/optimizer.hpp"

#include <cmath>

namespace permgec::nn {

OptimizerState OptimizerState::for_model(const Model& model) {
  OptimizerState st;
  for (const auto& p : model.params()) {
    st.m.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    st.v.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  }
  return st;
}

void adamw_step(Model& model, const Gradients& grads, OptimizerState& state,
                const AdamWConfig& cfg, double lr) {
  auto& params = model.params();
  if (grads.tensors.size() != params.size() || state.m.size() != params.size()) {
    throw Error(Errc::format_error, "optimizer state does not match the model");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(cfg.beta1, t);
  const double correct2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Mat& p = params[i].value;
    const Mat& g = grads.tensors[i];
    Mat& m = state.m[i];
    Mat& v = state.v[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const Mat before = p;
    const Mat update =
        (m.array() / correct1) / ((v.array() / correct2).sqrt() + cfg.eps);
    p = (before - lr * update) - lr * cfg.weight_decay * before;
  }
}

}  // namespace permgec::nn
