#include "permgec/trainer.hpp"

#include <algorithm>
#include <numeric>

namespace permgec {
namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

double scheduled_lr(const StageSchedule& schedule, std::int64_t phase_step) {
  if (schedule.warmup_steps <= 0 || phase_step >= schedule.warmup_steps) return schedule.lr;
  return schedule.lr * static_cast<double>(phase_step + 1) / static_cast<double>(schedule.warmup_steps);
}

Trainer::Trainer(nn::Model& model, TrainConfig cfg)
    : model_(model), cfg_(std::move(cfg)), opt_(nn::OptimizerState::for_model(model)) {
  if (cfg_.batch_size < 1) throw Error(Errc::config_error, "batch size must be positive");
  cfg_.loss.sundae.validate();
}

void Trainer::restore(const TrainerPosition& pos, nn::OptimizerState opt) {
  if (opt.m.size() != model_.params().size()) {
    throw Error(Errc::format_error, "optimizer state does not match the model");
  }
  pos_ = pos;
  opt_ = std::move(opt);
}

std::vector<std::size_t> Trainer::epoch_order(int phase, int epoch, std::size_t count) const {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix(mix(cfg_.seed, static_cast<std::uint64_t>(phase)),
                          static_cast<std::uint64_t>(epoch) + 1000));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

bool Trainer::run(const std::vector<PhaseData>& phases,
                  const std::function<void(const StepRecord&)>& on_step, std::int64_t max_steps) {
  std::int64_t taken = 0;
  const std::size_t bs = static_cast<std::size_t>(cfg_.batch_size);
  while (pos_.phase < static_cast<int>(phases.size())) {
    const PhaseData& ph = phases[static_cast<std::size_t>(pos_.phase)];
    if (pos_.epoch >= ph.schedule.epochs || ph.examples.empty()) {
      ++pos_.phase;
      pos_.epoch = 0;
      pos_.batch = 0;
      pos_.phase_step = 0;
      continue;
    }
    const std::vector<std::size_t> order = epoch_order(pos_.phase, pos_.epoch, ph.examples.size());
    const std::size_t batches = (order.size() + bs - 1) / bs;
    while (pos_.batch < batches) {
      if (max_steps >= 0 && taken >= max_steps) return false;
      std::vector<TrainingExample> batch;
      for (std::size_t i = pos_.batch * bs; i < std::min(order.size(), (pos_.batch + 1) * bs); ++i) {
        batch.push_back(ph.examples[order[i]]);
      }
      const double lr = scheduled_lr(ph.schedule, pos_.phase_step);
      nn::BatchLoss bl = nn::total_loss(model_, batch, cfg_.loss, true,
                                        mix(cfg_.seed, static_cast<std::uint64_t>(pos_.global_step)),
                                        cfg_.jobs);
      const double norm = bl.grads.norm();
      if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) bl.grads.scale(cfg_.clip_norm / norm);
      nn::adamw_step(model_, bl.grads, opt_, cfg_.adam, lr);
      ++pos_.batch;
      ++pos_.phase_step;
      ++pos_.global_step;
      ++taken;
      if (on_step) {
        on_step(StepRecord{ph.stage, pos_.phase, pos_.epoch, pos_.global_step, lr, bl.total,
                           bl.permutation, bl.decoder, norm});
      }
    }
    ++pos_.epoch;
    pos_.batch = 0;
  }
  return true;
}

}  // namespace permgec
