#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "permgec/corpus.hpp"

namespace permgec::toy {

enum class Tag { time, subject, verb, be, det_indef, det, adj, noun, to, place_det, place, other };

struct Word {
  std::string text;
  Tag tag = Tag::other;
  int lemma = -1;  // paradigm index for verbs and be
  bool touched = false;
};

/// A small English fragment: subject/verb agreement, tense forced by
/// "yesterday", a/an chosen by the next word, prepositional phrases with a
/// definite article. Every learner error it injects has a unique correction.
class Grammar {
 public:
  Grammar();

  std::vector<Word> sentence(std::mt19937_64& rng) const;
  /// Sentence with at least `min_tokens` tokens made by joining clauses.
  std::vector<Word> long_sentence(std::mt19937_64& rng, std::size_t min_tokens) const;

  /// Applies `count` learner-style errors (fewer when the sentence offers no
  /// more sites): wrong verb form, a/an confusion, dropped "the" or "to",
  /// a doubled word, or an adjective placed after its noun.
  std::vector<Word> learner_errors(std::vector<Word> words, int count, std::mt19937_64& rng) const;

  /// Confusion sets for random synthetic noise (verb paradigms, articles).
  NoiseConfig noise(std::uint64_t seed) const;
  /// Every surface token the grammar can emit.
  std::vector<std::string> lexicon() const;

 private:
  struct Paradigm {
    std::string base, third, past;
  };
  enum class Person { first, third, plural };
  struct Subject {
    std::vector<std::string> words;
    Person person;
  };

  std::string verb_form(int lemma, Person person, bool past) const;
  std::string be_form(Person person, bool past) const;
  void object_phrase(std::vector<Word>& out, std::mt19937_64& rng) const;
  void clause(std::vector<Word>& out, std::mt19937_64& rng, bool past) const;

  std::vector<Subject> subjects_;
  std::vector<Paradigm> transitive_;
  std::vector<Paradigm> motion_;
  std::vector<std::string> nouns_, adjectives_, predicates_, places_, determiners_;
};

std::vector<std::string> surface(const std::vector<Word>& words);

struct ToyCorpusConfig {
  std::size_t synthetic = 20000;   // stage I
  std::size_t mixed = 4000;        // stage II (half synthetic, half learner)
  std::size_t clean_domain = 2000; // stage III
  std::size_t heldout = 500;
  double errorful_fraction = 0.85;
  std::uint64_t seed = 1;
  std::uint64_t heldout_seed = 7919;
};

struct ToyCorpora {
  ParallelCorpus stage1, stage2, stage3, heldout;
};

/// Learner-domain pairs: errorful_fraction of them carry one or two errors.
ParallelCorpus learner_corpus(const Grammar& g, std::size_t count, double errorful_fraction,
                              std::uint64_t seed, Stage stage);
/// Clean sentences corrupted by inject_errors.
ParallelCorpus synthetic_corpus(const Grammar& g, std::size_t count, const NoiseConfig& noise,
                                std::uint64_t seed, Stage stage);
ToyCorpora generate(const ToyCorpusConfig& cfg);

/// Learner-domain pairs whose targets fall in 10-token buckets from
/// `min_len` up to `max_len` tokens, `per_bucket` each.
ParallelCorpus length_sweep(const Grammar& g, std::size_t min_len, std::size_t max_len,
                            std::size_t per_bucket, std::uint64_t seed);

}  // namespace permgec::toy
