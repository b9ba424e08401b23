#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "permgec/checkpoint.hpp"
#include "permgec/config.hpp"
#include "permgec/eval.hpp"

namespace permgec {

struct PreparedData {
  Vocab vocab;
  std::vector<PhaseData> phases;
  std::vector<DataStats> stats;  // one per phase
};

/// Vocabulary over every corpus (or `fixed_vocab` when resuming), then
/// oracle examples per stage.
PreparedData prepare_training_data(const RunConfig& cfg, const std::vector<ParallelCorpus>& corpora,
                                   const Vocab* fixed_vocab = nullptr);

/// Builds a fresh model for `data` and trains it through the plan. When
/// `resume` is given, the model, optimizer and position are taken from it.
Checkpoint train_model(const RunConfig& cfg, const PreparedData& data,
                       const std::function<void(const StepRecord&)>& on_step = {},
                       const Checkpoint* resume = nullptr, std::int64_t max_steps = -1);

struct EvalSummary {
  std::size_t sentences = 0;
  std::size_t exact = 0;
  std::size_t changed = 0;  // sentences whose output differs from the source
  ScoreReport score;
  double gleu = 0.0;        // mean sentence GLEU
  double exact_rate() const { return sentences ? static_cast<double>(exact) / static_cast<double>(sentences) : 0.0; }
};

/// Scores already-produced hypotheses against the corpus references.
EvalSummary score_hypotheses(const ParallelCorpus& corpus, const std::vector<std::string>& hyps);
/// Corrects every source and scores the top candidate.
EvalSummary evaluate_corpus(const Corrector& corrector, const ParallelCorpus& corpus, int jobs = 1,
                            std::vector<Correction>* out = nullptr);

/// Entry point of the command-line tool. Returns the process exit code:
/// 0 success, 1 runtime failure, 2 usage or configuration error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace permgec
