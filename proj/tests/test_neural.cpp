#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "permgec/eval.hpp"
#include "permgec/objective.hpp"
#include "permgec/optimizer.hpp"
#include "permgec/oracle.hpp"
#include "permgec/pipeline.hpp"

using namespace permgec;
using namespace permgec::nn;

namespace {

ModelConfig small_config(int vocab, int d = 8) {
  ModelConfig mc;
  mc.vocab_size = vocab;
  mc.d_model = d;
  mc.heads = 2;
  mc.enc_layers = 1;
  mc.dec_layers = 1;
  mc.dropout = 0.0;
  mc.init_std = 0.5;
  return mc;
}

std::vector<TrainingExample> example_batch(const Vocab& v) {
  const std::vector<SentencePair> pairs{{"i be busy", "i am busy"}, {"we were friends", "we had been friends"}};
  DataOptions o;
  o.oracle.s = v.s_count();
  return build_examples(pairs, v, o);
}

double max_abs_diff(const Mat& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("forward pass matches a straight-line reimplementation") {
  const Vocab v = fixture::example_vocab(2);
  ModelConfig mc = small_config(static_cast<int>(v.size()));
  mc.enc_layers = 2;
  mc.dec_layers = 2;
  const Model model(mc, 42);
  const oracle::PlainForward plain(model);
  const SourceSentence src = tokenize("we were friends", v);
  REQUIRE(src.size() == 7);
  const Mat h = model.encode(src);
  const Eigen::MatrixXd h_ref = plain.encode(src.ids);
  CHECK(max_abs_diff(h, h_ref) < 1e-12);

  const PointerMatrix a = model.pointer_matrix(h, src.n, src.s);
  const Eigen::MatrixXd a_ref = plain.pointer(h_ref);
  for (int i = 0; i < a.dim(); ++i) {
    for (int j = 0; j < a.dim(); ++j) CHECK(std::abs(a(i, j) - a_ref(i, j)) < 1e-12);
  }

  const TokenIds dec{Vocab::bos(), v.id("we"), Vocab::msk(), Vocab::msk(), Vocab::msk(), v.id("friends"), Vocab::eos()};
  const Mat probs = model.decode_probs(h, dec);
  Eigen::MatrixXd logits = plain.decoder_logits(h_ref, dec);
  for (int i = 0; i < logits.rows(); ++i) {
    logits.row(i) = (logits.row(i).array() - logits.row(i).maxCoeff()).exp().matrix();
    logits.row(i) /= logits.row(i).sum();
  }
  CHECK(max_abs_diff(probs, logits) < 1e-12);
  for (int i = 0; i < probs.rows(); ++i) CHECK(std::abs(probs.row(i).sum() - 1.0) < 1e-9);
}

TEST_CASE("degenerate parameters and determinism") {
  const Vocab v = fixture::example_vocab(2);
  const ModelConfig mc = small_config(static_cast<int>(v.size()));
  const Model zero = Model::zeros(mc);
  const SourceSentence src = tokenize("we were friends since", v);
  const Mat h = zero.encode(src);
  for (int i = 1; i < h.rows(); ++i) CHECK((h.row(i) - h.row(0)).norm() == 0.0);

  const Model model(mc, 7);
  const PointerMatrix a0 = model.pointer_matrix(Mat::Zero(src.size(), mc.d_model), src.n, src.s);
  // Zero states leave only bias terms; the key bias is zero at init.
  for (double x : a0.data()) CHECK(x == 0.0);
  Mat same(src.size(), mc.d_model);
  for (int i = 0; i < same.rows(); ++i) same.row(i) = Eigen::RowVectorXd::LinSpaced(mc.d_model, -1.0, 1.0);
  const PointerMatrix a1 = model.pointer_matrix(same, src.n, src.s);
  for (int i = 1; i < a1.dim(); ++i) {
    for (int j = 0; j < a1.dim(); ++j) CHECK(a1(i, j) == doctest::Approx(a1(0, j)).epsilon(1e-12));
  }

  const Model again(mc, 7);
  CHECK(again.encode(src) == model.encode(src));

  // Swapping two distant tokens changes the decoder output.
  const Mat hm = model.encode(src);
  const TokenIds d1{Vocab::bos(), v.id("we"), v.id("were"), v.id("friends"), v.id("since"), Vocab::eos()};
  const TokenIds d2{Vocab::bos(), v.id("since"), v.id("were"), v.id("friends"), v.id("we"), Vocab::eos()};
  CHECK((model.decode_probs(hm, d1).row(2) - model.decode_probs(hm, d2).row(2)).norm() > 1e-9);

  ModelConfig tiny = mc;
  tiny.max_len = 4;
  const Model short_model(tiny, 1);
  try {
    short_model.encode(src);
    FAIL("expected length_exceeded");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::length_exceeded);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  const Vocab v = fixture::example_vocab(2);
  std::vector<std::string> words(v.tokens().begin() + 7, v.tokens().begin() + 20);
  const Vocab small(words, 2);  // V = 20
  REQUIRE(small.size() == 20);
  const auto batch = example_batch(small);
  REQUIRE(batch.size() == 2);
  Model model(small_config(20), 42);
  for (double l0 : {0.25, 1.0}) {
    LossConfig cfg;
    cfg.sundae.lambda0 = l0;
    const auto r = gradcheck::check(model, batch, cfg);
    INFO("lambda0=" << l0 << " worst at " << r.where);
    CHECK(r.worst <= 1e-4);
  }
}

TEST_CASE("loss decomposition and batch parallelism") {
  const Vocab v = fixture::example_vocab(2);
  const auto batch = example_batch(v);
  const Model model(small_config(static_cast<int>(v.size())), 3);
  LossConfig cfg;
  cfg.sundae.lambda0 = 1.0;
  const BatchLoss full = total_loss(model, batch, cfg, false, 1);
  cfg.lambda_per = 0.0;
  const BatchLoss dec_only = total_loss(model, batch, cfg, false, 1);
  CHECK(dec_only.total == doctest::Approx(dec_only.decoder).epsilon(1e-14));
  CHECK(full.total == doctest::Approx(5.0 * full.permutation + full.decoder).epsilon(1e-12));

  LossConfig sundae;
  const BatchLoss one = total_loss(model, batch, sundae, true, 9, 1);
  const BatchLoss two = total_loss(model, batch, sundae, true, 9, 2);
  CHECK(one.total == two.total);
  for (std::size_t i = 0; i < one.grads.tensors.size(); ++i) CHECK(one.grads.tensors[i] == two.grads.tensors[i]);
}

TEST_CASE("optimizer arithmetic") {
  ModelConfig mc = small_config(12, 2);
  mc.heads = 1;
  Model model = Model::zeros(mc);
  OptimizerState state = OptimizerState::for_model(model);
  Gradients g = model.zero_grads();
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  model.params()[0].value(0, 0) = 1.0;
  const Model before = model;
  adamw_step(model, g, state, cfg, 0.1);
  for (std::size_t i = 0; i < model.params().size(); ++i) CHECK(model.params()[i].value == before.params()[i].value);

  Model m2 = before;
  OptimizerState s2 = OptimizerState::for_model(m2);
  g.tensors[0](0, 0) = 1.0;
  adamw_step(m2, g, s2, cfg, 0.1);
  CHECK(m2.params()[0].value(0, 0) == doctest::Approx(0.9).epsilon(1e-6));

  Model m3 = before;
  OptimizerState s3 = OptimizerState::for_model(m3);
  AdamWConfig decay = cfg;
  decay.weight_decay = 0.01;
  adamw_step(m3, g, s3, decay, 0.1);
  CHECK(m3.params()[0].value(0, 0) == doctest::Approx(m2.params()[0].value(0, 0) - 0.1 * 0.01 * 1.0).epsilon(1e-14));
}

TEST_CASE("training fits a single example and lowers loss on a small batch") {
  const Vocab v = fixture::example_vocab(2);
  ModelConfig mc = small_config(static_cast<int>(v.size()), 32);
  mc.init_std = 0.02;
  {
    Model model(mc, 1);
    OptimizerState st = OptimizerState::for_model(model);
    const auto ex = build_examples(std::vector<SentencePair>{{"i be busy", "i am busy"}}, v, DataOptions{{2, 2, false}});
    LossConfig cfg;
    cfg.sundae.mode = DecoderMode::vanilla;
    AdamWConfig adam;
    for (int step = 0; step < 50; ++step) {
      const BatchLoss l = total_loss(model, ex, cfg, true, static_cast<std::uint64_t>(step));
      adamw_step(model, l.grads, st, adam, 1e-2);
    }
    const BatchLoss end = total_loss(model, ex, cfg, false, 0);
    CHECK(end.decoder < 0.01);
  }
  {
    Model model(mc, 2);
    OptimizerState st = OptimizerState::for_model(model);
    const std::vector<SentencePair> pairs{{"i be busy", "i am busy"},
                                          {"we was friends", "we were friends"},
                                          {"it were 10 years ago", "it was 10 years ago"},
                                          {"we had friends since 20 years", "we had been friends for 20 years"},
                                          {"i like film", "i like films"},
                                          {"i watched tv on", "i watched on tv"},
                                          {"us were younger", "we were younger"},
                                          {"it was ago", "it was years ago"}};
    const auto batch = build_examples(pairs, v, DataOptions{{2, 2, false}});
    REQUIRE(batch.size() == 8);
    LossConfig cfg;
    cfg.sundae.mode = DecoderMode::vanilla;
    AdamWConfig adam;
    double prev = total_loss(model, batch, cfg, false, 0).total;
    for (int step = 0; step < 20; ++step) {
      const BatchLoss l = total_loss(model, batch, cfg, true, 0);
      adamw_step(model, l.grads, st, adam, 1e-3);
      const double now = total_loss(model, batch, cfg, false, 0).total;
      CHECK(now < prev);
      prev = now;
    }
  }
}

TEST_CASE("corrector shares one encoder pass and skips the decoder without insertions") {
  const Vocab v = fixture::example_vocab(2);
  ModelConfig mc = small_config(static_cast<int>(v.size()), 8);
  const Model model(mc, 5);
  InferenceConfig ic;
  ic.beam.confidence_bias = 1.0;
  const Corrector identity(model, v, ic);
  const Correction c = identity.correct("we were friends");
  CHECK(c.counters.encoder == 1);
  CHECK(c.counters.pointer == 1);
  CHECK(c.counters.decoder == 0);
  CHECK(c.candidates.front().text == "we were friends");

  // Force an insertion: a matrix favouring <ins_1> right after <s>.
  Model forced = Model::zeros(mc);
  const Corrector plain(forced, v, InferenceConfig{});
  const Correction z = plain.correct("we were friends");
  CHECK(z.counters.encoder == 1);
  const bool inserted = z.candidates.front().pi.insertion_count() > 0;
  CHECK(z.counters.decoder == (inserted ? 2u : 0u));
}

TEST_CASE("bench counts autoregressive passes from the target length") {
  const Vocab v = fixture::example_vocab(2);
  const Model model(small_config(static_cast<int>(v.size()), 8), 5);
  InferenceConfig ic;
  ic.beam.confidence_bias = 1.0;
  const Corrector identity(model, v, ic);
  const std::vector<std::string> sources{"we were friends", "i be busy"};
  const std::vector<std::string> targets{"we had been friends since we were 10", "i am busy"};

  const CostReport own = bench_forward_counts(sources, identity);
  REQUIRE(own.sentences.size() == 2);
  CHECK(own.sentences[0].ar_passes == 3);
  CHECK(own.sentences[1].ar_passes == 3);
  REQUIRE(own.buckets.size() == 1);
  CHECK(own.buckets[0].lo == 0);

  const CostReport ref = bench_forward_counts(sources, identity, 5, 1, targets);
  CHECK(ref.sentences[0].output_tokens == 3);
  CHECK(ref.sentences[0].target_tokens == 8);
  CHECK(ref.sentences[0].ar_passes == 8);
  CHECK(ref.sentences[1].ar_passes == 3);
  REQUIRE(ref.buckets.size() == 2);
  CHECK(ref.buckets[0].lo == 0);
  CHECK(ref.buckets[1].lo == 5);
  CHECK(ref.buckets[1].mean_ar == 8.0);

  const std::vector<std::string> short_targets{"we were friends"};
  CHECK_THROWS_AS(bench_forward_counts(sources, identity, 10, 1, short_targets), Error);
}
