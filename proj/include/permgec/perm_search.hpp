#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "permgec/core.hpp"

namespace permgec {

/// Square log-domain pointer score matrix over the n + s source positions.
/// Row i scores the successor of position i.
class PointerMatrix {
 public:
  PointerMatrix(int n, int s);
  PointerMatrix(int n, int s, std::vector<double> row_major);

  int n() const noexcept { return n_; }
  int s() const noexcept { return s_; }
  int dim() const noexcept { return n_ + s_; }

  double operator()(int i, int j) const { return a_[index(i, j)]; }
  double& operator()(int i, int j) { return a_[index(i, j)]; }
  std::span<const double> row(int i) const {
    return {a_.data() + index(i, 0), static_cast<std::size_t>(dim())};
  }
  std::span<const double> data() const noexcept { return a_; }

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(dim()) +
           static_cast<std::size_t>(j);
  }
  int n_;
  int s_;
  std::vector<double> a_;
};

/// Per-prefix bookkeeping shared by scoring and search.
class PrefixState {
 public:
  PrefixState(int n, int s);

  void push(int idx);
  int last() const noexcept { return path_.back(); }
  bool visited(int idx) const { return visited_[static_cast<std::size_t>(idx)] != 0; }
  bool finished() const noexcept { return !path_.empty() && path_.back() == n_ - 1; }
  const std::vector<int>& path() const noexcept { return path_; }

  /// Allowed successor columns: unvisited, the next <ins> only, and no <ins>
  /// directly after an <ins>.
  bool allowed(int idx) const;
  /// Smallest unvisited core index after the most recent core position,
  /// falling back to </s>.
  int right() const;

 private:
  int n_;
  int s_;
  std::vector<int> path_;
  std::vector<char> visited_;
  int inserts_used_ = 0;
  int last_core_ = -1;
};

/// Masked successor distribution for the prefix, blended with a one-hot on
/// right(prefix) with weight c. Throws Errc::dead_end when every column is
/// masked.
std::vector<double> step_distribution(const PointerMatrix& a, const PrefixState& prefix,
                                      double c);
std::vector<double> step_distribution(const PointerMatrix& a, std::span<const int> prefix,
                                      double c);

/// Sum of log step probabilities along pi (first index excluded). -inf when
/// pi takes a zero-probability transition.
double score_permutation(const PointerMatrix& a, const Permutation& pi, double c);

struct BeamConfig {
  int width = 4;
  double confidence_bias = 0.0;
  bool length_norm = true;
};

struct ScoredPermutation {
  Permutation pi;
  double logp = 0.0;
  /// Ranking key: logp / |pi| under length normalisation, logp otherwise.
  double score = 0.0;
};

struct SearchStats {
  std::size_t steps = 0;           // beam iterations
  std::size_t distributions = 0;   // step_distribution evaluations
  std::size_t candidates = 0;      // scored successor candidates
};

/// Beam search over successor distributions. Active hypotheses are pruned to
/// `width` by log-probability at every step; every hypothesis reaching </s>
/// is kept, and the best `width` finished ones are returned ranked by
/// ScoredPermutation::score (ties: lexicographically smaller pi first).
/// Throws Errc::search_exhausted when nothing finishes.
std::vector<ScoredPermutation> beam_search(const PointerMatrix& a, const BeamConfig& cfg,
                                           SearchStats* stats = nullptr);

/// Log-domain Sinkhorn: subtract column-wise then row-wise LogSumExp, `steps`
/// times.
PointerMatrix sinkhorn(const PointerMatrix& a, int steps);

double log_sum_exp(std::span<const double> values);

}  // namespace permgec
