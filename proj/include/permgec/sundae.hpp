#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "permgec/core.hpp"

namespace permgec {

/// Row-major matrix used for per-position token scores.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class DecoderMode { vanilla, sundae };

std::string_view mode_name(DecoderMode mode) noexcept;
DecoderMode parse_mode(std::string_view name);

struct SundaeConfig {
  DecoderMode mode = DecoderMode::sundae;
  double lambda0 = 0.25;
  int steps = 2;
  /// Temperature of the pass-1 draws at training time.
  double temperature = 1.0;

  /// Vanilla forces a single step with lambda0 = 1.
  SundaeConfig resolved() const;
  void validate() const;
};

/// Tokens being refined. Positions outside msk_positions never change.
class DecodeState {
 public:
  DecodeState(TokenIds tokens, std::vector<int> msk_positions);
  /// Freezes every <msk> position of `tokens`.
  static DecodeState from_masked(TokenIds tokens);

  const TokenIds& tokens() const noexcept { return tokens_; }
  const std::vector<int>& msk_positions() const noexcept { return msk_positions_; }
  int step() const noexcept { return step_; }

  void assign(std::span<const TokenId> values);  // one value per msk position

 private:
  TokenIds tokens_;
  std::vector<int> msk_positions_;
  int step_ = 0;
};

/// Per-position probability distributions (rows sum to one) for a full
/// decoder input sequence.
using ScoreFn = std::function<RowMatrix(std::span<const TokenId>)>;

struct RefineResult {
  TokenIds tokens;
  /// Sum of log-probabilities of the chosen tokens under the last pass.
  double logp = 0.0;
  int decoder_calls = 0;
};

/// Argmax refinement of the <msk> slots: every step rescores the previous
/// step's full sequence and rewrites only the frozen slots. No decoder call is
/// made when there is nothing to fill. `forbidden` lists token ids that are
/// never emitted.
RefineResult refine(DecodeState& state, const ScoreFn& score_fn, int steps,
                    std::span<const TokenId> forbidden = {});

struct UnrolledLoss {
  double loss = 0.0;
  double ce_pass1 = 0.0;
  double ce_pass2 = 0.0;
  /// d loss / d logits for each pass (zero rows outside msk positions).
  RowMatrix grad_pass1;
  RowMatrix grad_pass2;
};

/// lambda0 * CE(pass1) + (1 - lambda0) * CE(pass2), cross-entropy summed over
/// the msk positions only. Inputs are unnormalised logits; pass2 may be empty
/// when lambda0 == 1.
UnrolledLoss unrolled_loss(const RowMatrix& logits_pass1, const RowMatrix& logits_pass2,
                           std::span<const TokenId> target, std::span<const int> msk_positions,
                           double lambda0);

/// Row-wise softmax.
RowMatrix softmax_rows(const RowMatrix& logits);

/// Drops <pad>, surviving <msk>, sentinels and <ins>; joins with spaces.
std::string finalize(std::span<const TokenId> tokens, const Vocab& vocab);

}  // namespace permgec
