#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "permgec/corpus.hpp"
#include "permgec/objective.hpp"
#include "permgec/optimizer.hpp"

namespace permgec {

struct TrainConfig {
  nn::LossConfig loss;
  nn::AdamWConfig adam;
  int batch_size = 16;
  double clip_norm = 1.0;  // global gradient norm; 0 disables
  std::uint64_t seed = 1;
  int jobs = 1;
};

/// Where training stands; enough (with the optimizer moments) to resume.
struct TrainerPosition {
  int phase = 0;
  int epoch = 0;
  std::size_t batch = 0;        // next batch within the epoch
  std::int64_t phase_step = 0;  // steps taken in the current phase
  std::int64_t global_step = 0;
  friend bool operator==(const TrainerPosition&, const TrainerPosition&) = default;
};

struct PhaseData {
  Stage stage = Stage::II;
  std::vector<TrainingExample> examples;
  StageSchedule schedule;
};

struct StepRecord {
  Stage stage = Stage::II;
  int phase = 0;
  int epoch = 0;
  std::int64_t global_step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double permutation = 0.0;
  double decoder = 0.0;
  double grad_norm = 0.0;
};

/// Linear warmup to the stage rate, then constant.
double scheduled_lr(const StageSchedule& schedule, std::int64_t phase_step);

class Trainer {
 public:
  Trainer(nn::Model& model, TrainConfig cfg);

  const TrainerPosition& position() const noexcept { return pos_; }
  const nn::OptimizerState& optimizer() const noexcept { return opt_; }
  void restore(const TrainerPosition& pos, nn::OptimizerState opt);

  /// Example order of one epoch (a seeded shuffle).
  std::vector<std::size_t> epoch_order(int phase, int epoch, std::size_t count) const;

  /// Trains through the phases from the current position. Stops early after
  /// `max_steps` steps when max_steps >= 0. Returns true when every phase is
  /// complete.
  bool run(const std::vector<PhaseData>& phases,
           const std::function<void(const StepRecord&)>& on_step = {},
           std::int64_t max_steps = -1);

 private:
  nn::Model& model_;
  TrainConfig cfg_;
  nn::OptimizerState opt_;
  TrainerPosition pos_;
};

}  // namespace permgec
