#include "permgec/sundae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace permgec {

std::string_view mode_name(DecoderMode mode) noexcept {
  return mode == DecoderMode::vanilla ? "vanilla" : "sundae";
}

DecoderMode parse_mode(std::string_view name) {
  if (name == "vanilla") return DecoderMode::vanilla;
  if (name == "sundae") return DecoderMode::sundae;
  throw Error(Errc::config_error, "unknown decoder mode '" + std::string(name) + "'");
}

SundaeConfig SundaeConfig::resolved() const {
  SundaeConfig out = *this;
  if (mode == DecoderMode::vanilla) {
    out.lambda0 = 1.0;
    out.steps = 1;
  }
  return out;
}

void SundaeConfig::validate() const {
  if (!(lambda0 >= 0.0 && lambda0 <= 1.0)) throw Error(Errc::config_error, "lambda0 outside [0,1]");
  if (steps < 1) throw Error(Errc::config_error, "steps must be >= 1");
  if (!(temperature > 0.0)) throw Error(Errc::config_error, "temperature must be positive");
}

DecodeState::DecodeState(TokenIds tokens, std::vector<int> msk_positions)
    : tokens_(std::move(tokens)), msk_positions_(std::move(msk_positions)) {
  for (int p : msk_positions_) {
    if (p < 0 || p >= static_cast<int>(tokens_.size())) {
      throw Error(Errc::format_error, "msk position out of range");
    }
  }
}

DecodeState DecodeState::from_masked(TokenIds tokens) {
  std::vector<int> pos;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == Vocab::msk()) pos.push_back(static_cast<int>(i));
  }
  return DecodeState(std::move(tokens), std::move(pos));
}

void DecodeState::assign(std::span<const TokenId> values) {
  if (values.size() != msk_positions_.size()) {
    throw Error(Errc::format_error, "one value per msk position expected");
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    tokens_[static_cast<std::size_t>(msk_positions_[k])] = values[k];
  }
  ++step_;
}

RefineResult refine(DecodeState& state, const ScoreFn& score_fn, int steps,
                    std::span<const TokenId> forbidden) {
  if (steps < 1) throw Error(Errc::config_error, "refine needs at least one step");
  RefineResult result;
  const auto& positions = state.msk_positions();
  if (positions.empty()) {
    result.tokens = state.tokens();
    return result;
  }
  for (int step = 0; step < steps; ++step) {
    const RowMatrix probs = score_fn(state.tokens());
    ++result.decoder_calls;
    if (probs.rows() != static_cast<Eigen::Index>(state.tokens().size())) {
      throw Error(Errc::format_error, "decoder returned the wrong number of rows");
    }
    TokenIds chosen;
    double logp = 0.0;
    for (int pos : positions) {
      auto row = probs.row(pos);
      TokenId best = -1;
      double best_p = -1.0;
      for (Eigen::Index v = 0; v < row.size(); ++v) {
        const auto id = static_cast<TokenId>(v);
        if (std::find(forbidden.begin(), forbidden.end(), id) != forbidden.end()) continue;
        if (row(v) > best_p) {
          best_p = row(v);
          best = id;
        }
      }
      chosen.push_back(best);
      logp += std::log(best_p);
    }
    state.assign(chosen);
    result.logp = logp;
  }
  result.tokens = state.tokens();
  return result;
}

RowMatrix softmax_rows(const RowMatrix& logits) {
  RowMatrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double hi = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - hi).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

namespace {

// Cross-entropy at the msk positions plus its logit gradient, scaled by weight.
double masked_ce(const RowMatrix& logits, std::span<const TokenId> target,
                 std::span<const int> positions, double weight, RowMatrix& grad) {
  grad = RowMatrix::Zero(logits.rows(), logits.cols());
  double ce = 0.0;
  for (int pos : positions) {
    const auto row = logits.row(pos);
    const double hi = row.maxCoeff();
    const double lse = hi + std::log((row.array() - hi).exp().sum());
    const TokenId t = target[static_cast<std::size_t>(pos)];
    ce += lse - row(t);
    grad.row(pos) = weight * (row.array() - lse).exp();
    grad(pos, t) -= weight;
  }
  return ce;
}

}  // namespace

UnrolledLoss unrolled_loss(const RowMatrix& logits_pass1, const RowMatrix& logits_pass2,
                           std::span<const TokenId> target, std::span<const int> msk_positions,
                           double lambda0) {
  if (!(lambda0 >= 0.0 && lambda0 <= 1.0)) throw Error(Errc::config_error, "lambda0 outside [0,1]");
  UnrolledLoss out;
  out.ce_pass1 = masked_ce(logits_pass1, target, msk_positions, lambda0, out.grad_pass1);
  if (lambda0 < 1.0) {
    if (logits_pass2.rows() != logits_pass1.rows()) {
      throw Error(Errc::format_error, "second pass logits missing");
    }
    out.ce_pass2 = masked_ce(logits_pass2, target, msk_positions, 1.0 - lambda0, out.grad_pass2);
  } else {
    out.grad_pass2 = RowMatrix::Zero(logits_pass2.rows(), logits_pass2.cols());
  }
  out.loss = lambda0 * out.ce_pass1 + (1.0 - lambda0) * out.ce_pass2;
  return out;
}

std::string finalize(std::span<const TokenId> tokens, const Vocab& vocab) {
  std::string out;
  for (TokenId t : tokens) {
    if (vocab.is_special(t) && t != Vocab::unk()) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(t);
  }
  return out;
}

}  // namespace permgec
