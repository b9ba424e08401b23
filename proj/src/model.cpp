#include "permgec/model.hpp"

#include <cmath>

namespace permgec::nn {

void ModelConfig::validate() const {
  if (vocab_size < 1) throw Error(Errc::config_error, "vocab_size must be positive");
  if (d_model < 1 || heads < 1 || d_model % heads != 0) {
    throw Error(Errc::config_error, "d_model must be a positive multiple of heads");
  }
  if (enc_layers < 0 || dec_layers < 0) throw Error(Errc::config_error, "negative layer count");
  if (max_len < 2) throw Error(Errc::config_error, "max_len must be >= 2");
  if (ffn_mult < 1) throw Error(Errc::config_error, "ffn_mult must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::config_error, "dropout outside [0,1)");
}

void Gradients::zero() {
  for (auto& t : tensors) t.setZero();
}

void Gradients::add(const Gradients& other) {
  for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i] += other.tensors[i];
}

void Gradients::scale(double factor) {
  for (auto& t : tensors) t *= factor;
}

double Gradients::norm() const {
  double sq = 0.0;
  for (const auto& t : tensors) sq += t.squaredNorm();
  return std::sqrt(sq);
}

int Model::add_param(std::string name, int rows, int cols) {
  params_.push_back({std::move(name), Mat::Zero(rows, cols)});
  return static_cast<int>(params_.size()) - 1;
}

Model::LayerNormIdx Model::add_layer_norm(const std::string& prefix) {
  const int gain = add_param(prefix + ".gain", 1, cfg_.d_model);
  params_[static_cast<std::size_t>(gain)].value.setOnes();
  return {gain, add_param(prefix + ".bias", 1, cfg_.d_model)};
}

Model::AttentionIdx Model::add_attention(const std::string& prefix) {
  const int d = cfg_.d_model;
  AttentionIdx idx{};
  idx.wq = add_param(prefix + ".wq", d, d);
  idx.bq = add_param(prefix + ".bq", 1, d);
  idx.wk = add_param(prefix + ".wk", d, d);
  idx.bk = add_param(prefix + ".bk", 1, d);
  idx.wv = add_param(prefix + ".wv", d, d);
  idx.bv = add_param(prefix + ".bv", 1, d);
  idx.wo = add_param(prefix + ".wo", d, d);
  idx.bo = add_param(prefix + ".bo", 1, d);
  return idx;
}

Model::FeedForwardIdx Model::add_ffn(const std::string& prefix) {
  const int d = cfg_.d_model;
  const int hidden = d * cfg_.ffn_mult;
  FeedForwardIdx idx{};
  idx.w1 = add_param(prefix + ".w1", d, hidden);
  idx.b1 = add_param(prefix + ".b1", 1, hidden);
  idx.w2 = add_param(prefix + ".w2", hidden, d);
  idx.b2 = add_param(prefix + ".b2", 1, d);
  return idx;
}

Model::EncoderBlock Model::add_encoder_block(const std::string& prefix) {
  EncoderBlock blk{};
  blk.ln1 = add_layer_norm(prefix + ".ln1");
  blk.attn = add_attention(prefix + ".attn");
  blk.ln2 = add_layer_norm(prefix + ".ln2");
  blk.ffn = add_ffn(prefix + ".ffn");
  return blk;
}

// Declaration order here is the checkpoint tensor order.
void Model::declare() {
  cfg_.validate();
  const int d = cfg_.d_model;
  tok_emb_ = add_param("tok_emb", cfg_.vocab_size, d);
  pos_emb_ = add_param("pos_emb", cfg_.max_len, d);
  for (int l = 0; l < cfg_.enc_layers; ++l) {
    encoder_.push_back(add_encoder_block("enc." + std::to_string(l)));
  }
  enc_ln_ = add_layer_norm("enc.ln");
  key_w_ = add_param("perm.key.w", d, d);
  key_b_ = add_param("perm.key.b", 1, d);
  query_ = add_encoder_block("perm.query");
  for (int l = 0; l < cfg_.dec_layers; ++l) {
    const std::string prefix = "dec." + std::to_string(l);
    DecoderBlock blk{};
    blk.ln1 = add_layer_norm(prefix + ".ln1");
    blk.self_attn = add_attention(prefix + ".self");
    blk.ln_cross = add_layer_norm(prefix + ".ln_cross");
    blk.cross_attn = add_attention(prefix + ".cross");
    blk.ln2 = add_layer_norm(prefix + ".ln2");
    blk.ffn = add_ffn(prefix + ".ffn");
    decoder_.push_back(blk);
  }
  dec_ln_ = add_layer_norm("dec.ln");
  out_w_ = add_param("out.w", d, cfg_.vocab_size);
  out_b_ = add_param("out.b", 1, cfg_.vocab_size);
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  declare();
  std::mt19937_64 rng(seed);
  for (auto& p : params_) {
    const bool is_norm_or_bias =
        p.value.rows() == 1 || p.name.ends_with(".gain") || p.name.ends_with(".bias");
    if (is_norm_or_bias) continue;
    const bool is_embedding = p.name == "tok_emb" || p.name == "pos_emb";
    const double stddev =
        is_embedding ? cfg_.init_std : 1.0 / std::sqrt(static_cast<double>(p.value.rows()));
    std::normal_distribution<double> normal(0.0, stddev);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = normal(rng);
  }
  if (cfg_.sinusoidal_positions) {
    Mat& pos = params_[static_cast<std::size_t>(pos_emb_)].value;
    for (Eigen::Index r = 0; r < pos.rows(); ++r) {
      for (Eigen::Index c = 0; c < pos.cols(); ++c) {
        const double rate =
            std::pow(10000.0, -static_cast<double>(c - c % 2) / static_cast<double>(pos.cols()));
        const double angle = static_cast<double>(r) * rate;
        pos(r, c) = c % 2 == 0 ? std::sin(angle) : std::cos(angle);
      }
    }
  }
}

Model Model::zeros(const ModelConfig& cfg) {
  Model m;
  m.cfg_ = cfg;
  m.declare();
  for (auto& p : m.params_) p.value.setZero();
  return m;
}

Gradients Model::zero_grads() const {
  Gradients g;
  g.tensors.reserve(params_.size());
  for (const auto& p : params_) g.tensors.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  return g;
}

std::size_t Model::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += static_cast<std::size_t>(p.value.size());
  return total;
}

Model::Binding::Binding(const Model& model, Tape& tape, const ForwardContext& ctx)
    : model_(model), tape_(tape), ctx_(ctx), vars_(model.params_.size()) {}

Var Model::Binding::get(int index) {
  Var& v = vars_[static_cast<std::size_t>(index)];
  if (!v.valid()) {
    Mat* sink = ctx_.grads != nullptr ? &ctx_.grads->tensors[static_cast<std::size_t>(index)]
                                      : nullptr;
    v = tape_.param(model_.params_[static_cast<std::size_t>(index)].value, sink);
  }
  return v;
}

Var Model::drop(Binding& b, Var x) const {
  if (!b.ctx().training || cfg_.dropout <= 0.0 || b.ctx().rng == nullptr) return x;
  return b.tape().dropout(x, cfg_.dropout, *b.ctx().rng);
}

Var Model::layer_norm(Binding& b, Var x, const LayerNormIdx& ln) const {
  return b.tape().layer_norm(x, b.get(ln.gain), b.get(ln.bias));
}

Var Model::attention(Binding& b, const AttentionIdx& idx, Var query_in, Var kv_in) const {
  Tape& t = b.tape();
  const Var q = t.add_row(t.matmul(query_in, b.get(idx.wq)), b.get(idx.bq));
  const Var k = t.add_row(t.matmul(kv_in, b.get(idx.wk)), b.get(idx.bk));
  const Var v = t.add_row(t.matmul(kv_in, b.get(idx.wv)), b.get(idx.bv));
  const int head_dim = cfg_.d_model / cfg_.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Var> heads;
  for (int h = 0; h < cfg_.heads; ++h) {
    const Var qh = t.slice_cols(q, h * head_dim, head_dim);
    const Var kh = t.slice_cols(k, h * head_dim, head_dim);
    const Var vh = t.slice_cols(v, h * head_dim, head_dim);
    const Var weights = t.softmax_rows(t.scale(t.matmul_nt(qh, kh), inv_sqrt));
    heads.push_back(t.matmul(weights, vh));
  }
  const Var merged = cfg_.heads == 1 ? heads.front() : t.concat_cols(heads);
  return t.add_row(t.matmul(merged, b.get(idx.wo)), b.get(idx.bo));
}

Var Model::feed_forward(Binding& b, const FeedForwardIdx& idx, Var x) const {
  Tape& t = b.tape();
  const Var hidden = t.gelu(t.add_row(t.matmul(x, b.get(idx.w1)), b.get(idx.b1)));
  return t.add_row(t.matmul(hidden, b.get(idx.w2)), b.get(idx.b2));
}

Var Model::encoder_block(Binding& b, const EncoderBlock& blk, Var x) const {
  Tape& t = b.tape();
  const Var normed = layer_norm(b, x, blk.ln1);
  x = t.add(x, drop(b, attention(b, blk.attn, normed, normed)));
  x = t.add(x, drop(b, feed_forward(b, blk.ffn, layer_norm(b, x, blk.ln2))));
  return x;
}

Var Model::embed(Binding& b, std::span<const TokenId> tokens) const {
  const int len = static_cast<int>(tokens.size());
  if (len > cfg_.max_len) {
    throw Error(Errc::length_exceeded, "sequence of " + std::to_string(len) +
                                           " tokens exceeds max_len " +
                                           std::to_string(cfg_.max_len));
  }
  Tape& t = b.tape();
  const Var tok = t.gather_rows(b.get(tok_emb_), tokens);
  const Var pos = t.slice_rows(b.get(pos_emb_), 0, len);
  return drop(b, t.add(tok, pos));
}

Var Model::encode(Binding& b, const SourceSentence& src) const {
  if (b.ctx().counters != nullptr) ++b.ctx().counters->encoder;
  Var x = embed(b, src.ids);
  for (const auto& blk : encoder_) x = encoder_block(b, blk, x);
  return layer_norm(b, x, enc_ln_);
}

Var Model::pointer_scores(Binding& b, Var h) const {
  if (b.ctx().counters != nullptr) ++b.ctx().counters->pointer;
  Tape& t = b.tape();
  const Var keys = t.add_row(t.matmul(h, b.get(key_w_)), b.get(key_b_));
  const Var queries = encoder_block(b, query_, h);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(cfg_.d_model));
  return t.scale(t.matmul_nt(queries, keys), inv_sqrt);
}

Var Model::decoder_logits(Binding& b, Var h, std::span<const TokenId> tokens) const {
  if (b.ctx().counters != nullptr) ++b.ctx().counters->decoder;
  Tape& t = b.tape();
  Var x = embed(b, tokens);
  for (const auto& blk : decoder_) {
    const Var normed = layer_norm(b, x, blk.ln1);
    x = t.add(x, drop(b, attention(b, blk.self_attn, normed, normed)));
    x = t.add(x, drop(b, attention(b, blk.cross_attn, layer_norm(b, x, blk.ln_cross), h)));
    x = t.add(x, drop(b, feed_forward(b, blk.ffn, layer_norm(b, x, blk.ln2))));
  }
  const Var normed = layer_norm(b, x, dec_ln_);
  return t.add_row(t.matmul(normed, b.get(out_w_)), b.get(out_b_));
}

Mat Model::encode(const SourceSentence& src, ForwardCounters* counters) const {
  Tape tape;
  ForwardContext ctx;
  ctx.counters = counters;
  Binding b(*this, tape, ctx);
  return tape.value(encode(b, src));
}

PointerMatrix Model::pointer_matrix(const Mat& h, int n, int s, ForwardCounters* counters) const {
  Tape tape;
  ForwardContext ctx;
  ctx.counters = counters;
  Binding b(*this, tape, ctx);
  const Mat& a = tape.value(pointer_scores(b, tape.constant(h)));
  if (a.rows() != n + s) throw Error(Errc::format_error, "encoder states do not match n + s");
  return PointerMatrix(n, s, std::vector<double>(a.data(), a.data() + a.size()));
}

Mat Model::decode_probs(const Mat& h, std::span<const TokenId> tokens,
                        ForwardCounters* counters) const {
  Tape tape;
  ForwardContext ctx;
  ctx.counters = counters;
  Binding b(*this, tape, ctx);
  return permgec::softmax_rows(tape.value(decoder_logits(b, tape.constant(h), tokens)));
}

}  // namespace permgec::nn
