#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "permgec/core.hpp"
#include "permgec/perm_search.hpp"
#include "permgec/tape.hpp"

namespace permgec::nn {

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 32;
  int heads = 2;
  int enc_layers = 2;
  int dec_layers = 2;
  int max_len = 128;
  int ffn_mult = 4;
  double dropout = 0.1;
  double init_std = 0.02;
  /// Start the (trainable) position table from sine/cosine waves instead of
  /// random values.
  bool sinusoidal_positions = true;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Param {
  std::string name;
  Mat value;
};

/// One gradient buffer per parameter, in declaration order.
struct Gradients {
  std::vector<Mat> tensors;

  void zero();
  void add(const Gradients& other);
  void scale(double factor);
  double norm() const;
};

struct ForwardCounters {
  std::size_t encoder = 0;
  std::size_t pointer = 0;
  std::size_t decoder = 0;
};

/// Per-forward options: training toggles dropout; `grads` (optional) receives
/// parameter gradients on backward.
struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;
  Gradients* grads = nullptr;
  ForwardCounters* counters = nullptr;
};

/// Shared encoder, permutation head (linear key layer + one transformer query
/// layer) and a non-causal decoder with cross-attention to the encoder states.
/// Pre-norm blocks with GELU feed-forward layers.
class Model {
 public:
  Model() = default;
  /// Random normal initialisation (layer-norm gains one, biases zero).
  Model(const ModelConfig& cfg, std::uint64_t seed);
  /// Every parameter zero.
  static Model zeros(const ModelConfig& cfg);

  const ModelConfig& config() const noexcept { return cfg_; }
  std::vector<Param>& params() noexcept { return params_; }
  const std::vector<Param>& params() const noexcept { return params_; }
  Gradients zero_grads() const;
  std::size_t parameter_count() const;

  /// Binds parameters to a tape once per forward so that shared tensors
  /// accumulate a single gradient.
  class Binding {
   public:
    Binding(const Model& model, Tape& tape, const ForwardContext& ctx);
    Var get(int index);
    Tape& tape() noexcept { return tape_; }
    const ForwardContext& ctx() const noexcept { return ctx_; }
    const Model& model() const noexcept { return model_; }

   private:
    const Model& model_;
    Tape& tape_;
    const ForwardContext& ctx_;
    std::vector<Var> vars_;
  };

  /// H: (n+s) x d encoder states.
  Var encode(Binding& b, const SourceSentence& src) const;
  /// A: (n+s) x (n+s) pointer scores from H.
  Var pointer_scores(Binding& b, Var h) const;
  /// Unnormalised decoder logits (len x V) for a permuted sequence.
  Var decoder_logits(Binding& b, Var h, std::span<const TokenId> tokens) const;

  // Tape-free conveniences for inference and tests.
  Mat encode(const SourceSentence& src, ForwardCounters* counters = nullptr) const;
  PointerMatrix pointer_matrix(const Mat& h, int n, int s,
                               ForwardCounters* counters = nullptr) const;
  /// Row-softmaxed decoder distributions.
  Mat decode_probs(const Mat& h, std::span<const TokenId> tokens,
                   ForwardCounters* counters = nullptr) const;

 private:
  struct LayerNormIdx {
    int gain, bias;
  };
  struct AttentionIdx {
    int wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct FeedForwardIdx {
    int w1, b1, w2, b2;
  };
  struct EncoderBlock {
    LayerNormIdx ln1;
    AttentionIdx attn;
    LayerNormIdx ln2;
    FeedForwardIdx ffn;
  };
  struct DecoderBlock {
    LayerNormIdx ln1;
    AttentionIdx self_attn;
    LayerNormIdx ln_cross;
    AttentionIdx cross_attn;
    LayerNormIdx ln2;
    FeedForwardIdx ffn;
  };

  int add_param(std::string name, int rows, int cols);
  LayerNormIdx add_layer_norm(const std::string& prefix);
  AttentionIdx add_attention(const std::string& prefix);
  FeedForwardIdx add_ffn(const std::string& prefix);
  EncoderBlock add_encoder_block(const std::string& prefix);
  void declare();

  Var layer_norm(Binding& b, Var x, const LayerNormIdx& ln) const;
  Var attention(Binding& b, const AttentionIdx& idx, Var query_in, Var kv_in) const;
  Var feed_forward(Binding& b, const FeedForwardIdx& idx, Var x) const;
  Var encoder_block(Binding& b, const EncoderBlock& blk, Var x) const;
  Var embed(Binding& b, std::span<const TokenId> tokens) const;
  Var drop(Binding& b, Var x) const;

  ModelConfig cfg_;
  std::vector<Param> params_;
  int tok_emb_ = -1;
  int pos_emb_ = -1;
  std::vector<EncoderBlock> encoder_;
  LayerNormIdx enc_ln_{};
  int key_w_ = -1;
  int key_b_ = -1;
  EncoderBlock query_{};
  std::vector<DecoderBlock> decoder_;
  LayerNormIdx dec_ln_{};
  int out_w_ = -1;
  int out_b_ = -1;
};

}  // namespace permgec::nn
