#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace permgec {

enum class Stage { I = 1, II = 2, III = 3 };

std::string stage_name(Stage stage);
Stage parse_stage(std::string_view text);

struct SentencePair {
  std::string source;
  std::string target;
  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  Stage stage = Stage::II;
};

struct RejectedLine {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct LoadReport {
  std::vector<RejectedLine> rejected;
  std::size_t too_long = 0;
  std::size_t accepted = 0;
};

/// Reads `source<TAB>target` lines. Malformed lines (no tab, several tabs,
/// an empty side) are listed in the report; pairs longer than `max_tokens` on
/// either side are dropped and counted. Throws Errc::io_error when the file
/// cannot be read and Errc::corpus_rejected when more than 10% of the
/// non-blank lines are malformed.
ParallelCorpus load_tsv(const std::filesystem::path& path, Stage stage, LoadReport* report = nullptr,
                        std::size_t max_tokens = 70);
void save_tsv(const std::filesystem::path& path, const ParallelCorpus& corpus);

struct NoiseConfig {
  double p_drop = 0.03;
  double p_swap = 0.03;
  double p_dup = 0.02;
  double p_replace = 0.10;
  std::map<std::string, std::vector<std::string>> confusion_sets;
  std::uint64_t seed = 0;

  void validate() const;
};

struct NoiseStats {
  std::size_t tokens = 0;
  std::size_t drops = 0;
  std::size_t swaps = 0;
  std::size_t dups = 0;
  std::size_t replaces = 0;
};

/// Independent per-token corruption. Each clean token draws one event:
/// drop, duplicate, swap with the following token, or replacement by a member
/// of its confusion set (a token without one is kept). Swapped-in tokens are
/// not corrupted again.
std::vector<std::string> inject_errors(const std::vector<std::string>& clean,
                                       const NoiseConfig& cfg, std::mt19937_64& rng,
                                       NoiseStats* stats = nullptr);
/// Same, seeded from cfg.seed.
std::vector<std::string> inject_errors(const std::vector<std::string>& clean,
                                       const NoiseConfig& cfg);

struct StageSchedule {
  int epochs = 1;
  double lr = 1e-3;
  int warmup_steps = 0;
  friend bool operator==(const StageSchedule&, const StageSchedule&) = default;
};

struct PlanConfig {
  StageSchedule stage1{1, 2e-3, 200};
  StageSchedule stage2{2, 2e-3, 100};
  StageSchedule stage3{3, 5e-4, 0};
  const StageSchedule& of(Stage stage) const;
};

struct PlanPhase {
  Stage stage = Stage::II;
  std::vector<SentencePair> pairs;
  StageSchedule schedule;
};

struct TrainingPlan {
  std::vector<PlanPhase> phases;
};

/// Orders the corpora as I, II, III (corpora sharing a stage are
/// concatenated). Stage II is mandatory; I and III are optional. Throws
/// Errc::plan_error otherwise.
TrainingPlan make_stage_plan(const std::vector<ParallelCorpus>& corpora, const PlanConfig& cfg);

}  // namespace permgec
