#pragma once

#include <span>
#include <string>
#include <vector>

#include "permgec/pipeline.hpp"

namespace permgec {

using Words = std::vector<std::string>;

/// Replace src[start, end) with `replacement` (start == end is an insertion).
struct Edit {
  int start = 0;
  int end = 0;
  Words replacement;
  friend bool operator==(const Edit&, const Edit&) = default;
  friend auto operator<=>(const Edit&, const Edit&) = default;
};

using EditSet = std::vector<Edit>;

/// Levenshtein alignment with unit costs; the backtrace prefers diagonal
/// moves, then deletions, so a substitution is never split into a
/// deletion plus an insertion. Adjacent non-matching operations merge into
/// one edit. Result is sorted and non-overlapping.
EditSet extract_edits(std::span<const std::string> src, std::span<const std::string> hyp);
Words apply_edits(std::span<const std::string> src, const EditSet& edits);

struct ScoreReport {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 1.0;
  double recall = 1.0;
  double f_beta = 1.0;
  double beta = 0.5;
};

/// precision = 1 when nothing is proposed, recall = 1 when nothing is
/// expected, f = 0 when precision + recall = 0.
ScoreReport score_counts(std::size_t tp, std::size_t fp, std::size_t fn, double beta = 0.5);
ScoreReport f_beta_score(const EditSet& hyp, const EditSet& gold, double beta = 0.5);

/// Corpus score: edit counts summed over sentences, then the formula.
ScoreReport corpus_f_beta(std::span<const Words> sources, std::span<const Words> hyps,
                          std::span<const Words> refs, double beta = 0.5);

/// Sentence GLEU (n <= 4): per order, matched reference n-grams minus
/// hypothesis n-grams found in the source but not the reference, over the
/// hypothesis n-gram count; geometric mean over the orders the hypothesis
/// has, times a brevity penalty. Uses the closest-length reference for the
/// penalty and the best reference score otherwise.
double gleu(std::span<const std::string> hyp, std::span<const std::string> src,
            std::span<const Words> refs);

struct RankedCandidate {
  double perm_score = 0.0;  // beam ranking key
  double dec_logp = 0.0;
  Words tokens;
};

enum class SelectMode { rescore, gleu_oracle };

/// rescore: argmax of lambda * perm_score + (1 - lambda) * dec_logp (lambda
/// == 1 ignores the decoder term entirely). gleu_oracle: argmax of sentence
/// GLEU against `refs`. Ties keep the earlier candidate.
std::size_t select_hypothesis(std::span<const RankedCandidate> candidates, SelectMode mode,
                              double lambda_resc, std::span<const std::string> src = {},
                              std::span<const Words> refs = {});

struct SentenceCost {
  int output_tokens = 0;
  /// Length the autoregressive comparator decodes: the reference length when
  /// one is given, otherwise the model's own output length.
  int target_tokens = 0;
  std::size_t encoder_passes = 0;
  std::size_t decoder_passes = 0;
  std::size_t pointer_passes = 0;
  std::size_t beam_steps = 0;
  std::size_t beam_candidates = 0;
  /// Passes a greedy autoregressive decoder needs for target_tokens tokens.
  std::size_t ar_passes = 0;
};

struct CostBucket {
  int lo = 0, hi = 0;  // target length range [lo, hi)
  std::size_t sentences = 0;
  double mean_encoder = 0, mean_decoder = 0, mean_beam_steps = 0, mean_ar = 0;
  std::size_t max_decoder = 0;
};

struct CostReport {
  std::vector<SentenceCost> sentences;
  std::vector<CostBucket> buckets;
};

/// Sentences are bucketed by target length. `targets` may be empty, or hold
/// one reference per source.
CostReport bench_forward_counts(std::span<const std::string> sources, const Corrector& corrector,
                                int bucket_width = 10, int jobs = 1,
                                std::span<const std::string> targets = {});

}  // namespace permgec
