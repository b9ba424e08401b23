#pragma once

#include <span>
#include <vector>

#include "permgec/core.hpp"

namespace permgec {

/// A source span copied verbatim into the target.
struct AlignedSpan {
  int start_src = 0;
  int start_tgt = 0;
  int length = 0;

  int end_src() const noexcept { return start_src + length; }
  int end_tgt() const noexcept { return start_tgt + length; }
  friend bool operator==(const AlignedSpan&, const AlignedSpan&) = default;
};

struct OracleConfig {
  int s = 8;
  int max_len = 2;
  /// When set, consecutive selected spans must have rank difference strictly
  /// below max_len; otherwise a difference equal to max_len is allowed.
  bool strict_rank = false;
};

/// Longest-first greedy span matching. Target spans are visited from longer
/// to shorter (start ascending within a length); a span is claimed at its
/// leftmost occurrence among the still-unclaimed source tokens, after which
/// both sides are hidden. Result is sorted by start_tgt.
std::vector<AlignedSpan> match_spans(std::span<const TokenId> x, std::span<const TokenId> y);

/// Rank of each span's source start among all spans (spans in target order).
std::vector<int> source_ranks(std::span<const AlignedSpan> spans);

/// Maximum-total-length subsequence (target order) whose consecutive source
/// ranks differ by at most max_len, then the spans holding <s> and </s> are
/// added back if the subsequence dropped them. |x| is needed to recognise the
/// </s> span.
std::vector<AlignedSpan> select_spans(std::span<const AlignedSpan> spans, int source_len,
                                      const OracleConfig& cfg);

/// Algorithm-1 construction of permutation + decoder supervision. x and y are
/// sentinel-wrapped core ids. Lossy examples (a gap over three tokens or more
/// insertions than <ins> slots) are returned with lossy = true.
TrainingExample build_example(std::span<const TokenId> x, std::span<const TokenId> y,
                              const Vocab& vocab, const OracleConfig& cfg);

/// Baseline aligner for the dataset-construction ablation: keeps a longest
/// common subsequence of source tokens in source order and never reorders.
/// Produces valid permutations; no other quality claim.
TrainingExample build_example_monotone(std::span<const TokenId> x, std::span<const TokenId> y,
                                       const Vocab& vocab, const OracleConfig& cfg);

}  // namespace permgec
