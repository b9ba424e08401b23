#include "permgec/objective.hpp"

#include <cmath>
#include <thread>

namespace permgec::nn {
namespace {

TokenId draw(const Mat& logits, int row, double temperature, std::mt19937_64* rng) {
  const auto r = logits.row(row);
  if (rng == nullptr || temperature <= 0.0) {
    Eigen::Index best = 0;
    r.maxCoeff(&best);
    return static_cast<TokenId>(best);
  }
  const double top = r.maxCoeff();
  std::vector<double> w(static_cast<std::size_t>(r.size()));
  for (Eigen::Index j = 0; j < r.size(); ++j) {
    w[static_cast<std::size_t>(j)] = std::exp((r(j) - top) / temperature);
  }
  std::discrete_distribution<int> dist(w.begin(), w.end());
  return static_cast<TokenId>(dist(*rng));
}

}  // namespace

ExampleLoss example_loss(const Model& model, const TrainingExample& ex, const LossConfig& cfg,
                         const ForwardContext& ctx, std::optional<PassTwoInput>* pass_two) {
  const SundaeConfig sc = cfg.sundae.resolved();
  const std::vector<int> msk = ex.msk_positions();
  Tape tape;
  Model::Binding b(model, tape, ctx);

  const Var h = model.encode(b, ex.source);
  const Var a = model.pointer_scores(b, h);
  const Var per = tape.pointer_nll(a, ex.pi.indices(), ex.source.n, ex.source.s, cfg.lambda_per);

  ExampleLoss out;
  out.msk_count = msk.size();
  out.permutation = tape.scalar(per) / cfg.lambda_per;
  std::vector<Var> terms{per};

  if (!msk.empty()) {
    const Var logits1 = model.decoder_logits(b, h, ex.dec_input);
    Mat logits2;
    Var logits2_var;
    if (sc.lambda0 < 1.0) {
      std::optional<PassTwoInput> local;
      std::optional<PassTwoInput>& slot = pass_two != nullptr ? *pass_two : local;
      if (!slot) {
        PassTwoInput in{ex.dec_input};
        const Mat& l1 = tape.value(logits1);
        for (int p : msk) in.tokens[static_cast<std::size_t>(p)] = draw(l1, p, sc.temperature, ctx.rng);
        slot = std::move(in);
      }
      logits2_var = model.decoder_logits(b, h, slot->tokens);
      logits2 = tape.value(logits2_var);
    }
    const UnrolledLoss ul =
        unrolled_loss(tape.value(logits1), logits2, ex.dec_output, msk, sc.lambda0);
    out.decoder = ul.loss;
    terms.push_back(tape.external_loss(logits1, ul.loss, ul.grad_pass1));
    if (logits2_var.valid()) terms.push_back(tape.external_loss(logits2_var, 0.0, ul.grad_pass2));
  }

  const Var total = tape.sum(terms);
  out.total = tape.scalar(total);
  if (ctx.grads != nullptr) tape.backward(total);
  return out;
}

BatchLoss total_loss(const Model& model, std::span<const TrainingExample> batch,
                     const LossConfig& cfg, bool training, std::uint64_t seed, int jobs,
                     std::vector<std::optional<PassTwoInput>>* pass_two) {
  if (batch.empty()) throw Error(Errc::empty_input, "empty batch");
  const std::size_t count = batch.size();
  if (pass_two != nullptr && pass_two->size() != count) pass_two->resize(count);

  std::vector<Gradients> grads(count);
  std::vector<ExampleLoss> losses(count);
  std::vector<std::exception_ptr> errors(count);

  auto run = [&](std::size_t i) {
    try {
      grads[i] = model.zero_grads();
      std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
      ForwardContext ctx;
      ctx.training = training;
      ctx.rng = &rng;
      ctx.grads = &grads[i];
      losses[i] = example_loss(model, batch[i], cfg, ctx,
                               pass_two != nullptr ? &(*pass_two)[i] : nullptr);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < count; i += workers) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  BatchLoss out;
  out.grads = model.zero_grads();
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::isfinite(losses[i].total)) {
      throw Error(Errc::numerical_divergence,
                  "non-finite loss at batch example " + std::to_string(i));
    }
    out.total += losses[i].total;
    out.permutation += losses[i].permutation;
    out.decoder += losses[i].decoder;
    out.grads.add(grads[i]);
  }
  const double inv = 1.0 / static_cast<double>(count);
  out.total *= inv;
  out.permutation *= inv;
  out.decoder *= inv;
  out.grads.scale(inv);
  if (!std::isfinite(out.grads.norm())) {
    throw Error(Errc::numerical_divergence, "non-finite gradient norm");
  }
  return out;
}

}  // namespace permgec::nn
