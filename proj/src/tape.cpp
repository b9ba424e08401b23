#include "permgec/tape.hpp"

#include <cmath>
#include <limits>

#include "permgec/perm_search.hpp"

namespace permgec::nn {

Var Tape::push(Mat value, bool needs_grad, std::function<void(Tape&, int)> backward) {
  Node node;
  node.owned = std::move(value);
  node.needs_grad = needs_grad;
  if (needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Mat value) { return push(std::move(value), false, nullptr); }

Var Tape::param(const Mat& value, Mat* grad_sink) {
  Node node;
  node.view = &value;
  node.sink = grad_sink;
  node.needs_grad = grad_sink != nullptr;
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Mat& Tape::value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value(); }

Mat& Tape::grad_of(Var v) {
  Node& node = nodes_[static_cast<std::size_t>(v.id)];
  if (node.grad.size() == 0) node.grad = Mat::Zero(node.value().rows(), node.value().cols());
  return node.grad;
}

Var Tape::matmul(Var a, Var b) {
  Mat out = value(a) * value(b);
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, int self) {
    const Mat& g = t.grad_at(self);
    if (t.needs(a)) t.grad_of(a).noalias() += g * t.value(b).transpose();
    if (t.needs(b)) t.grad_of(b).noalias() += t.value(a).transpose() * g;
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  Mat out = value(a) * value(b).transpose();
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, int self) {
    const Mat& g = t.grad_at(self);
    if (t.needs(a)) t.grad_of(a).noalias() += g * t.value(b);
    if (t.needs(b)) t.grad_of(b).noalias() += g.transpose() * t.value(a);
  });
}

Var Tape::add(Var a, Var b) {
  Mat out = value(a) + value(b);
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, int self) {
    const Mat& g = t.grad_at(self);
    if (t.needs(a)) t.grad_of(a) += g;
    if (t.needs(b)) t.grad_of(b) += g;
  });
}

Var Tape::add_row(Var a, Var row) {
  Mat out = value(a);
  out.rowwise() += value(row).row(0);
  return push(std::move(out), needs(a) || needs(row), [a, row](Tape& t, int self) {
    const Mat& g = t.grad_at(self);
    if (t.needs(a)) t.grad_of(a) += g;
    if (t.needs(row)) t.grad_of(row) += g.colwise().sum();
  });
}

Var Tape::scale(Var a, double factor) {
  Mat out = value(a) * factor;
  return push(std::move(out), needs(a), [a, factor](Tape& t, int self) {
    t.grad_of(a) += t.grad_at(self) * factor;
  });
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Mat& in = value(x);
  const Eigen::Index rows = in.rows();
  const Eigen::Index cols = in.cols();
  Mat xhat(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double mean = in.row(i).mean();
    const double var = (in.row(i).array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (in.row(i).array() - mean) * inv_std(i);
  }
  Mat out = xhat.array().rowwise() * value(gain).row(0).array();
  out.rowwise() += value(bias).row(0);
  const bool ng = needs(x) || needs(gain) || needs(bias);
  return push(std::move(out), ng,
              [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t,
                                                                                    int self) {
                const Mat& g = t.grad_at(self);
                if (t.needs(gain)) {
                  t.grad_of(gain) += (g.array() * xhat.array()).colwise().sum().matrix();
                }
                if (t.needs(bias)) t.grad_of(bias) += g.colwise().sum();
                if (t.needs(x)) {
                  const Mat dxhat = g.array().rowwise() * t.value(gain).row(0).array();
                  Mat& dx = t.grad_of(x);
                  const double inv_cols = 1.0 / static_cast<double>(dxhat.cols());
                  for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
                    const double m1 = dxhat.row(i).sum() * inv_cols;
                    const double m2 = dxhat.row(i).dot(xhat.row(i)) * inv_cols;
                    dx.row(i).array() +=
                        inv_std(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
                  }
                }
              });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var Tape::gelu(Var x) {
  const Mat& in = value(x);
  Mat out = in.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  });
  return push(std::move(out), needs(x), [x](Tape& t, int self) {
    const Mat& in = t.value(x);
    const Mat deriv = in.unaryExpr([](double v) {
      const double th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      return 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
    });
    t.grad_of(x).array() += t.grad_at(self).array() * deriv.array();
  });
}

Var Tape::softmax_rows(Var x) {
  Mat out = permgec::softmax_rows(value(x));
  return push(std::move(out), needs(x), [x](Tape& t, int self) {
    const Mat& y = t.nodes_[static_cast<std::size_t>(self)].value();
    const Mat& g = t.grad_at(self);
    const Eigen::VectorXd dots = (g.array() * y.array()).rowwise().sum();
    Mat& dx = t.grad_of(x);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      dx.row(i).array() += y.row(i).array() * (g.row(i).array() - dots(i));
    }
  });
}

Var Tape::gather_rows(Var table, std::span<const TokenId> ids) {
  const Mat& tab = value(table);
  Mat out(static_cast<Eigen::Index>(ids.size()), tab.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tab.rows()) {
      throw Error(Errc::format_error, "row id out of range in gather");
    }
    out.row(static_cast<Eigen::Index>(i)) = tab.row(ids[i]);
  }
  std::vector<TokenId> keep(ids.begin(), ids.end());
  return push(std::move(out), needs(table), [table, keep = std::move(keep)](Tape& t, int self) {
    const Mat& g = t.grad_at(self);
    Mat& dt = t.grad_of(table);
    for (std::size_t i = 0; i < keep.size(); ++i) dt.row(keep[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var Tape::slice_rows(Var a, int row0, int count) {
  Mat out = value(a).middleRows(row0, count);
  return push(std::move(out), needs(a), [a, row0, count](Tape& t, int self) {
    t.grad_of(a).middleRows(row0, count) += t.grad_at(self);
  });
}

Var Tape::slice_cols(Var a, int col0, int count) {
  Mat out = value(a).middleCols(col0, count);
  return push(std::move(out), needs(a), [a, col0, count](Tape& t, int self) {
    t.grad_of(a).middleCols(col0, count) += t.grad_at(self);
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  Eigen::Index cols = 0;
  const Eigen::Index rows = value(parts.front()).rows();
  bool ng = false;
  for (Var p : parts) {
    cols += value(p).cols();
    ng = ng || needs(p);
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return push(std::move(out), ng, [keep = std::move(keep)](Tape& t, int self) {
    const Mat& g = t.grad_at(self);
    Eigen::Index at = 0;
    for (Var p : keep) {
      const Eigen::Index w = t.value(p).cols();
      if (t.needs(p)) t.grad_of(p) += g.middleCols(at, w);
      at += w;
    }
  });
}

Var Tape::dropout(Var x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const Mat& in = value(x);
  Mat mask(in.rows(), in.cols());
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : 0.0;
  Mat out = in.array() * mask.array();
  return push(std::move(out), needs(x), [x, mask = std::move(mask)](Tape& t, int self) {
    t.grad_of(x).array() += t.grad_at(self).array() * mask.array();
  });
}

Var Tape::pointer_nll(Var a, std::span<const int> pi, int n, int s, double weight) {
  const Mat& scores = value(a);
  if (scores.rows() != n + s || scores.cols() != n + s) {
    throw Error(Errc::format_error, "pointer scores are not (n+s) square");
  }
  // Per-step softmax over the allowed columns; stored for the backward pass.
  struct Step {
    int row;
    int target;
    Eigen::VectorXd p;
  };
  std::vector<Step> steps;
  PrefixState state(n, s);
  double nll = 0.0;
  for (std::size_t i = 1; i < pi.size(); ++i) {
    const int row = state.last();
    const int target = pi[i];
    if (!state.allowed(target)) {
      throw Error(Errc::invalid_permutation, "teacher permutation takes a masked step");
    }
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n + s);
    double hi = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n + s; ++j) {
      if (state.allowed(j)) hi = std::max(hi, scores(row, j));
    }
    double sum = 0.0;
    for (int j = 0; j < n + s; ++j) {
      if (!state.allowed(j)) continue;
      p(j) = std::exp(scores(row, j) - hi);
      sum += p(j);
    }
    p /= sum;
    nll -= std::log(p(target));
    steps.push_back({row, target, std::move(p)});
    state.push(target);
  }
  Mat out(1, 1);
  out(0, 0) = weight * nll;
  return push(std::move(out), needs(a),
              [a, weight, steps = std::move(steps)](Tape& t, int self) {
                const double up = t.grad_at(self)(0, 0) * weight;
                Mat& da = t.grad_of(a);
                for (const auto& st : steps) {
                  da.row(st.row) += up * st.p.transpose();
                  da(st.row, st.target) -= up;
                }
              });
}

Var Tape::external_loss(Var input, double loss, Mat grad) {
  Mat out(1, 1);
  out(0, 0) = loss;
  return push(std::move(out), needs(input), [input, grad = std::move(grad)](Tape& t, int self) {
    t.grad_of(input) += t.grad_at(self)(0, 0) * grad;
  });
}

Var Tape::sum(std::span<const Var> scalars) {
  Mat out = Mat::Zero(1, 1);
  bool ng = false;
  for (Var v : scalars) {
    out(0, 0) += scalar(v);
    ng = ng || needs(v);
  }
  std::vector<Var> keep(scalars.begin(), scalars.end());
  return push(std::move(out), ng, [keep = std::move(keep)](Tape& t, int self) {
    const double g = t.grad_at(self)(0, 0);
    for (Var v : keep) {
      if (t.needs(v)) t.grad_of(v)(0, 0) += g;
    }
  });
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1) throw Error(Errc::format_error, "backward needs a scalar");
  grad_of(loss)(0, 0) = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.needs_grad || node.grad.size() == 0) continue;
    if (node.backward) node.backward(*this, id);
    if (node.sink != nullptr) *node.sink += node.grad;
  }
}

}  // namespace permgec::nn
