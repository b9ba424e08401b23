#include "permgec/toy_grammar.hpp"

#include <algorithm>
#include <set>

#include "permgec/core.hpp"

namespace permgec::toy {
namespace {

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

bool chance(double p, std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

bool starts_with_vowel(const std::string& w) {
  return !w.empty() && std::string("aeiou").find(w.front()) != std::string::npos;
}

const std::vector<std::string> kBeForms{"am", "is", "are", "was", "were", "be"};

}  // namespace

Grammar::Grammar() {
  subjects_ = {
      {{"i"}, Person::first},          {{"you"}, Person::plural},
      {{"we"}, Person::plural},        {{"they"}, Person::plural},
      {{"he"}, Person::third},         {{"she"}, Person::third},
      {{"the", "teacher"}, Person::third}, {{"my", "friend"}, Person::third},
      {{"the", "boy"}, Person::third}, {{"the", "girl"}, Person::third},
      {{"my", "sister"}, Person::third}, {{"my", "brother"}, Person::third},
      {{"my", "parents"}, Person::plural}, {{"the", "kids"}, Person::plural},
  };
  transitive_ = {
      {"see", "sees", "saw"},     {"like", "likes", "liked"},   {"want", "wants", "wanted"},
      {"buy", "buys", "bought"},  {"make", "makes", "made"},    {"take", "takes", "took"},
      {"find", "finds", "found"}, {"have", "has", "had"},       {"need", "needs", "needed"},
      {"visit", "visits", "visited"}, {"watch", "watches", "watched"}, {"eat", "eats", "ate"},
  };
  motion_ = {{"go", "goes", "went"}, {"walk", "walks", "walked"}, {"run", "runs", "ran"}};
  nouns_ = {"book",  "car",   "cake",     "house",  "phone", "bag",    "hat",    "letter",
            "movie", "song",  "picture",  "ticket", "apple", "orange", "egg",    "umbrella",
            "idea",  "elephant", "onion", "island", "oven",  "computer"};
  adjectives_ = {"big", "small", "new", "old", "red", "nice", "cheap", "expensive",
                 "interesting", "ugly", "good", "strange"};
  predicates_ = {"busy", "happy", "tired", "sad", "hungry", "late", "ready", "angry", "sick"};
  places_ = {"park", "store", "office", "library", "station", "beach", "museum", "airport"};
  determiners_ = {"the", "my", "his", "her", "our", "their"};
}

std::string Grammar::verb_form(int lemma, Person person, bool past) const {
  const Paradigm& p = lemma < static_cast<int>(transitive_.size())
                          ? transitive_[static_cast<std::size_t>(lemma)]
                          : motion_[static_cast<std::size_t>(lemma) - transitive_.size()];
  if (past) return p.past;
  return person == Person::third ? p.third : p.base;
}

std::string Grammar::be_form(Person person, bool past) const {
  if (past) return person == Person::plural ? "were" : "was";
  switch (person) {
    case Person::first: return "am";
    case Person::third: return "is";
    case Person::plural: return "are";
  }
  return "are";
}

void Grammar::object_phrase(std::vector<Word>& out, std::mt19937_64& rng) const {
  const bool indefinite = chance(0.5, rng);
  const bool with_adj = chance(0.4, rng);
  const std::string adj = with_adj ? pick(adjectives_, rng) : std::string();
  const std::string noun = pick(nouns_, rng);
  if (indefinite) {
    const std::string& next = with_adj ? adj : noun;
    out.push_back({starts_with_vowel(next) ? "an" : "a", Tag::det_indef});
  } else {
    out.push_back({pick(determiners_, rng), Tag::det});
  }
  if (with_adj) out.push_back({adj, Tag::adj});
  out.push_back({noun, Tag::noun});
}

void Grammar::clause(std::vector<Word>& out, std::mt19937_64& rng, bool past) const {
  const Subject& subj = pick(subjects_, rng);
  for (const auto& w : subj.words) out.push_back({w, Tag::subject});
  const double kind = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (kind < 0.25) {
    out.push_back({be_form(subj.person, past), Tag::be, -2});
    if (chance(0.3, rng)) out.push_back({"very", Tag::other});
    out.push_back({pick(predicates_, rng), Tag::adj});
  } else if (kind < 0.5) {
    std::uniform_int_distribution<int> d(0, static_cast<int>(motion_.size()) - 1);
    const int lemma = static_cast<int>(transitive_.size()) + d(rng);
    out.push_back({verb_form(lemma, subj.person, past), Tag::verb, lemma});
    out.push_back({"to", Tag::to});
    out.push_back({"the", Tag::place_det});
    out.push_back({pick(places_, rng), Tag::place});
  } else {
    std::uniform_int_distribution<int> d(0, static_cast<int>(transitive_.size()) - 1);
    const int lemma = d(rng);
    out.push_back({verb_form(lemma, subj.person, past), Tag::verb, lemma});
    object_phrase(out, rng);
  }
}

std::vector<Word> Grammar::sentence(std::mt19937_64& rng) const {
  std::vector<Word> out;
  const bool past = chance(0.35, rng);
  if (past) out.push_back({"yesterday", Tag::time});
  clause(out, rng, past);
  if (chance(0.15, rng)) {
    out.push_back({"and", Tag::other});
    clause(out, rng, past);
  }
  if (!past && chance(0.2, rng)) {
    out.push_back({"every", Tag::time});
    out.push_back({"day", Tag::time});
  }
  return out;
}

std::vector<Word> Grammar::long_sentence(std::mt19937_64& rng, std::size_t min_tokens) const {
  std::vector<Word> out;
  const bool past = chance(0.35, rng);
  if (past) out.push_back({"yesterday", Tag::time});
  clause(out, rng, past);
  while (out.size() < min_tokens) {
    out.push_back({"and", Tag::other});
    clause(out, rng, past);
  }
  return out;
}

std::vector<Word> Grammar::learner_errors(std::vector<Word> words, int count,
                                          std::mt19937_64& rng) const {
  enum Kind { verb_form_error, a_an, drop_the, drop_to, duplicate, adj_after_noun };
  for (int e = 0; e < count; ++e) {
    std::vector<std::pair<Kind, std::size_t>> sites;
    for (std::size_t i = 0; i < words.size(); ++i) {
      const Word& w = words[i];
      if (w.touched) continue;
      const bool next_free = i + 1 < words.size() && !words[i + 1].touched;
      if (w.tag == Tag::verb || w.tag == Tag::be) sites.push_back({verb_form_error, i});
      if (w.tag == Tag::det_indef) sites.push_back({a_an, i});
      if (w.tag == Tag::place_det && i > 0 && !words[i - 1].touched) sites.push_back({drop_the, i});
      if (w.tag == Tag::to && next_free) sites.push_back({drop_to, i});
      sites.push_back({duplicate, i});
      if (w.tag == Tag::adj && next_free && words[i + 1].tag == Tag::noun && i > 0 &&
          words[i - 1].tag == Tag::det) {
        sites.push_back({adj_after_noun, i});
      }
    }
    if (sites.empty()) break;
    // Weight non-duplicate errors higher: doubling is the least interesting.
    std::vector<double> weights;
    for (const auto& s : sites) weights.push_back(s.first == duplicate ? 0.15 : 1.0);
    std::discrete_distribution<std::size_t> d(weights.begin(), weights.end());
    const auto [kind, i] = sites[d(rng)];
    Word& w = words[i];
    switch (kind) {
      case verb_form_error: {
        std::vector<std::string> options;
        if (w.tag == Tag::be) {
          options = kBeForms;
        } else {
          const Paradigm& p = w.lemma < static_cast<int>(transitive_.size())
                                  ? transitive_[static_cast<std::size_t>(w.lemma)]
                                  : motion_[static_cast<std::size_t>(w.lemma) - transitive_.size()];
          options = {p.base, p.third, p.past};
        }
        std::erase(options, w.text);
        w.text = pick(options, rng);
        w.touched = true;
        break;
      }
      case a_an:
        w.text = w.text == "a" ? "an" : "a";
        w.touched = true;
        break;
      case drop_the:
      case drop_to:
        words[i - (kind == drop_the ? 1 : 0)].touched = true;
        if (i + 1 < words.size()) words[i + 1].touched = true;
        words.erase(words.begin() + static_cast<std::ptrdiff_t>(i));
        break;
      case duplicate: {
        w.touched = true;
        Word copy = w;
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(i), copy);
        break;
      }
      case adj_after_noun:
        std::swap(words[i], words[i + 1]);
        words[i].touched = words[i + 1].touched = true;
        break;
    }
  }
  return words;
}

NoiseConfig Grammar::noise(std::uint64_t seed) const {
  NoiseConfig cfg;
  cfg.seed = seed;
  cfg.p_drop = 0.01;
  cfg.p_dup = 0.02;
  cfg.p_swap = 0.02;
  cfg.p_replace = 0.12;
  auto group = [&](const std::vector<std::string>& forms) {
    for (const auto& f : forms) {
      auto& set = cfg.confusion_sets[f];
      for (const auto& g : forms) {
        if (g != f && std::find(set.begin(), set.end(), g) == set.end()) set.push_back(g);
      }
    }
  };
  for (const auto& p : transitive_) group({p.base, p.third, p.past});
  for (const auto& p : motion_) group({p.base, p.third, p.past});
  group(kBeForms);
  group({"a", "an", "the"});
  return cfg;
}

std::vector<std::string> Grammar::lexicon() const {
  std::set<std::string> all(kBeForms.begin(), kBeForms.end());
  for (const auto& s : subjects_) all.insert(s.words.begin(), s.words.end());
  for (const auto* list : {&transitive_, &motion_}) {
    for (const auto& p : *list) all.insert({p.base, p.third, p.past});
  }
  for (const auto* list : {&nouns_, &adjectives_, &predicates_, &places_, &determiners_}) {
    all.insert(list->begin(), list->end());
  }
  all.insert({"a", "an", "to", "very", "and", "yesterday", "every", "day"});
  return {all.begin(), all.end()};
}

std::vector<std::string> surface(const std::vector<Word>& words) {
  std::vector<std::string> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(w.text);
  return out;
}

ParallelCorpus learner_corpus(const Grammar& g, std::size_t count, double errorful_fraction,
                              std::uint64_t seed, Stage stage) {
  std::mt19937_64 rng(seed);
  ParallelCorpus corpus;
  corpus.stage = stage;
  for (std::size_t k = 0; k < count; ++k) {
    const std::vector<Word> clean = g.sentence(rng);
    int errors = 0;
    if (chance(errorful_fraction, rng)) errors = chance(0.6, rng) ? 1 : 2;
    const std::vector<Word> noisy = g.learner_errors(clean, errors, rng);
    corpus.pairs.push_back({join_tokens(surface(noisy)), join_tokens(surface(clean))});
  }
  return corpus;
}

ParallelCorpus synthetic_corpus(const Grammar& g, std::size_t count, const NoiseConfig& noise,
                                std::uint64_t seed, Stage stage) {
  std::mt19937_64 rng(seed);
  ParallelCorpus corpus;
  corpus.stage = stage;
  while (corpus.pairs.size() < count) {
    const std::vector<std::string> clean = surface(g.sentence(rng));
    const std::vector<std::string> noisy = inject_errors(clean, noise, rng);
    if (noisy.empty()) continue;
    corpus.pairs.push_back({join_tokens(noisy), join_tokens(clean)});
  }
  return corpus;
}

ToyCorpora generate(const ToyCorpusConfig& cfg) {
  const Grammar g;
  const NoiseConfig noise = g.noise(cfg.seed);
  ToyCorpora out;
  out.stage1 = synthetic_corpus(g, cfg.synthetic, noise, cfg.seed * 4 + 1, Stage::I);
  out.stage2 = synthetic_corpus(g, cfg.mixed / 2, noise, cfg.seed * 4 + 2, Stage::II);
  const ParallelCorpus learner =
      learner_corpus(g, cfg.mixed - cfg.mixed / 2, cfg.errorful_fraction, cfg.seed * 4 + 3, Stage::II);
  // Interleave so that any prefix of stage II stays mixed.
  std::vector<SentencePair> mixed;
  for (std::size_t i = 0; i < std::max(out.stage2.pairs.size(), learner.pairs.size()); ++i) {
    if (i < out.stage2.pairs.size()) mixed.push_back(out.stage2.pairs[i]);
    if (i < learner.pairs.size()) mixed.push_back(learner.pairs[i]);
  }
  out.stage2.pairs = std::move(mixed);
  out.stage3 = learner_corpus(g, cfg.clean_domain, cfg.errorful_fraction, cfg.seed * 4 + 4, Stage::III);
  out.heldout = learner_corpus(g, cfg.heldout, cfg.errorful_fraction, cfg.heldout_seed, Stage::III);
  return out;
}

ParallelCorpus length_sweep(const Grammar& g, std::size_t min_len, std::size_t max_len,
                            std::size_t per_bucket, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParallelCorpus corpus;
  corpus.stage = Stage::III;
  for (std::size_t lo = min_len; lo < max_len; lo += 10) {
    const std::size_t hi = std::min(lo + 10, max_len);
    std::size_t made = 0;
    while (made < per_bucket) {
      const std::vector<Word> clean = g.long_sentence(rng, lo);
      if (clean.size() >= hi) continue;
      const std::vector<Word> noisy = g.learner_errors(clean, 1, rng);
      corpus.pairs.push_back({join_tokens(surface(noisy)), join_tokens(surface(clean))});
      ++made;
    }
  }
  return corpus;
}

}  // namespace permgec::toy
