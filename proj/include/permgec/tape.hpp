#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "permgec/core.hpp"
#include "permgec/sundae.hpp"

namespace permgec::nn {

using Mat = RowMatrix;

/// Handle to a node recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const noexcept { return id >= 0; }
};

/// Reverse-mode tape over dense row-major matrices. Every op records its
/// value and a closure that pushes the output gradient to its inputs.
/// Parameter leaves reference the caller's storage and accumulate their
/// gradient into a caller-provided sink when backward() runs.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value);
  /// `value` must outlive the tape; `grad_sink` may be null (no gradient).
  Var param(const Mat& value, Mat* grad_sink);

  const Mat& value(Var v) const;
  double scalar(Var v) const { return value(v)(0, 0); }

  Var matmul(Var a, Var b);     // a * b
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // broadcast a 1 x c row over every row of a
  Var scale(Var a, double factor);
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
  Var gelu(Var x);
  Var softmax_rows(Var x);
  Var gather_rows(Var table, std::span<const TokenId> ids);
  Var slice_rows(Var a, int row0, int count);
  Var slice_cols(Var a, int col0, int count);
  Var concat_cols(std::span<const Var> parts);
  /// Inverted dropout; identity when rate == 0.
  Var dropout(Var x, double rate, std::mt19937_64& rng);

  /// Masked pointer negative log-likelihood of `pi` under score matrix `a`
  /// (n + s square), summed over steps and multiplied by `weight`.
  Var pointer_nll(Var a, std::span<const int> pi, int n, int s, double weight);

  /// Scalar node whose value is `loss` and whose gradient with respect to
  /// `input` is `grad` (scaled by the upstream gradient).
  Var external_loss(Var input, double loss, Mat grad);

  Var sum(std::span<const Var> scalars);

  void backward(Var loss);
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Mat owned;
    const Mat* view = nullptr;
    Mat grad;
    Mat* sink = nullptr;
    bool needs_grad = false;
    std::function<void(Tape&, int)> backward;

    const Mat& value() const { return view != nullptr ? *view : owned; }
  };

  Var push(Mat value, bool needs_grad, std::function<void(Tape&, int)> backward);
  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  Mat& grad_of(Var v);
  const Mat& grad_at(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  std::vector<Node> nodes_;
};

}  // namespace permgec::nn
