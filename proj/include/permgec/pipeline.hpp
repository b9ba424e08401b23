#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "permgec/corpus.hpp"
#include "permgec/model.hpp"
#include "permgec/oracle.hpp"
#include "permgec/perm_search.hpp"
#include "permgec/sundae.hpp"

namespace permgec {

struct DataOptions {
  OracleConfig oracle;
  bool drop_lossy = false;
  bool monotone = false;  // baseline aligner instead of span matching
  /// Longest encoder or decoder sequence the model accepts (0 = no limit).
  int max_sequence = 0;
};

struct DataStats {
  std::size_t pairs = 0;
  std::size_t kept = 0;
  std::size_t lossy = 0;
  std::size_t dropped_lossy = 0;
  std::size_t dropped_long = 0;
};

std::vector<TrainingExample> build_examples(std::span<const SentencePair> pairs, const Vocab& vocab,
                                            const DataOptions& opts, DataStats* stats = nullptr);

/// One example per line: source ids, pi, dec_input, dec_output, lossy flag,
/// tab-separated; ids space-separated.
std::string format_example(const TrainingExample& ex);
TrainingExample parse_example(std::string_view line, const Vocab& vocab);
void write_examples(std::ostream& out, std::span<const TrainingExample> examples);
std::vector<TrainingExample> read_examples(std::istream& in, const Vocab& vocab);

Vocab build_vocab(std::span<const ParallelCorpus> corpora, int s_count, std::size_t max_size = 0);

struct InferenceConfig {
  BeamConfig beam;
  SundaeConfig sundae;
  int sinkhorn_steps = 0;
  /// How many beam hypotheses are decoded into candidate corrections.
  int topk = 1;
};

struct Candidate {
  Permutation pi;
  double perm_logp = 0.0;
  double perm_score = 0.0;
  TokenIds tokens;       // refined decoder sequence
  double dec_logp = 0.0; // log-probability of the filled slots
  std::string text;
};

struct Correction {
  std::string source;
  std::vector<Candidate> candidates;  // beam order
  nn::ForwardCounters counters;
  SearchStats search;
  int output_tokens = 0;  // core tokens of the top candidate
};

/// Decoding tokens never produced at <msk> slots.
std::vector<TokenId> forbidden_fill(const Vocab& vocab);

/// Surface output: source positions keep the caller's original spelling;
/// filled slots use the vocabulary form; <pad> and specials vanish.
std::string render(const SourceSentence& src, const Permutation& pi, std::span<const TokenId> tokens,
                   const Vocab& vocab);

class Corrector {
 public:
  Corrector(const nn::Model& model, const Vocab& vocab, InferenceConfig cfg);

  Correction correct(std::string_view text) const;
  /// Corrects every line; `jobs` workers, results in input order.
  std::vector<Correction> correct_all(std::span<const std::string> lines, int jobs = 1) const;

  const InferenceConfig& config() const noexcept { return cfg_; }

 private:
  const nn::Model& model_;
  const Vocab& vocab_;
  InferenceConfig cfg_;
  std::vector<TokenId> forbidden_;
};

}  // namespace permgec
