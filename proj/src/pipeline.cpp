#include "permgec/pipeline.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace permgec {
namespace {

TokenIds wrap(std::span<const std::string> words, const Vocab& vocab) {
  TokenIds ids{Vocab::bos()};
  for (const auto& w : words) ids.push_back(vocab.id(w));
  ids.push_back(Vocab::eos());
  return ids;
}

template <class T>
std::string join_ints(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(v[i]);
  }
  return out;
}

template <class T>
std::vector<T> parse_ints(std::string_view field) {
  std::vector<T> out;
  std::istringstream in{std::string(field)};
  long long v = 0;
  while (in >> v) out.push_back(static_cast<T>(v));
  if (!in.eof()) throw Error(Errc::format_error, "bad integer list '" + std::string(field) + "'");
  return out;
}

}  // namespace

std::vector<TrainingExample> build_examples(std::span<const SentencePair> pairs, const Vocab& vocab,
                                            const DataOptions& opts, DataStats* stats) {
  DataStats local;
  DataStats& st = stats != nullptr ? *stats : local;
  std::vector<TrainingExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    ++st.pairs;
    const TokenIds x = wrap(split_tokens(p.source), vocab);
    const TokenIds y = wrap(split_tokens(p.target), vocab);
    TrainingExample ex = opts.monotone ? build_example_monotone(x, y, vocab, opts.oracle)
                                       : build_example(x, y, vocab, opts.oracle);
    if (ex.lossy) {
      ++st.lossy;
      if (opts.drop_lossy) {
        ++st.dropped_lossy;
        continue;
      }
    }
    if (opts.max_sequence > 0 && (ex.source.size() > opts.max_sequence ||
                                  static_cast<int>(ex.dec_input.size()) > opts.max_sequence)) {
      ++st.dropped_long;
      continue;
    }
    ++st.kept;
    out.push_back(std::move(ex));
  }
  return out;
}

std::string format_example(const TrainingExample& ex) {
  const std::vector<int> pi(ex.pi.indices().begin(), ex.pi.indices().end());
  return join_ints(ex.source.ids) + '\t' + join_ints(pi) + '\t' + join_ints(ex.dec_input) + '\t' +
         join_ints(ex.dec_output) + '\t' + (ex.lossy ? "1" : "0");
}

TrainingExample parse_example(std::string_view line, const Vocab& vocab) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  if (fields.size() != 5) throw Error(Errc::format_error, "example record needs 5 fields");
  const TokenIds ids = parse_ints<TokenId>(fields[0]);
  const int s = vocab.s_count();
  const int n = static_cast<int>(ids.size()) - s;
  if (n < 2) throw Error(Errc::format_error, "source shorter than its <ins> block");
  TrainingExample ex{make_source(std::span<const TokenId>(ids.data(), static_cast<std::size_t>(n)), vocab),
                     Permutation(parse_ints<int>(fields[1]), n, s), parse_ints<TokenId>(fields[2]),
                     parse_ints<TokenId>(fields[3]), fields[4] == "1"};
  if (ex.source.ids != ids) throw Error(Errc::format_error, "source <ins> block does not match the vocabulary");
  if (auto why = check_example(ex)) throw Error(Errc::format_error, *why);
  return ex;
}

void write_examples(std::ostream& out, std::span<const TrainingExample> examples) {
  for (const auto& ex : examples) out << format_example(ex) << '\n';
}

std::vector<TrainingExample> read_examples(std::istream& in, const Vocab& vocab) {
  std::vector<TrainingExample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(parse_example(line, vocab));
  }
  return out;
}

Vocab build_vocab(std::span<const ParallelCorpus> corpora, int s_count, std::size_t max_size) {
  std::vector<std::vector<std::string>> sentences;
  for (const auto& c : corpora) {
    for (const auto& p : c.pairs) {
      sentences.push_back(split_tokens(p.source));
      sentences.push_back(split_tokens(p.target));
    }
  }
  return Vocab::build(sentences, s_count, max_size);
}

std::vector<TokenId> forbidden_fill(const Vocab& vocab) {
  std::vector<TokenId> out{Vocab::bos(), Vocab::eos(), Vocab::msk()};
  for (int k = 1; k <= vocab.s_count(); ++k) out.push_back(vocab.ins(k));
  return out;
}

std::string render(const SourceSentence& src, const Permutation& pi, std::span<const TokenId> tokens,
                   const Vocab& vocab) {
  const ExpandedInput expanded = expand_insertions(src, pi);
  if (expanded.tokens.size() != tokens.size()) {
    throw Error(Errc::format_error, "decoded sequence does not match the permutation");
  }
  std::vector<std::string> words;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int origin = expanded.origin[i];
    if (origin >= 0) {
      if (origin == 0 || origin == src.n - 1) continue;
      if (static_cast<std::size_t>(origin) < src.surface.size()) {
        words.push_back(src.surface[static_cast<std::size_t>(origin)]);
      } else {
        words.push_back(vocab.token(src.ids[static_cast<std::size_t>(origin)]));
      }
      continue;
    }
    const TokenId t = tokens[i];
    if (t == Vocab::unk() || !vocab.is_special(t)) words.push_back(vocab.token(t));
  }
  return join_tokens(words);
}

Corrector::Corrector(const nn::Model& model, const Vocab& vocab, InferenceConfig cfg)
    : model_(model), vocab_(vocab), cfg_(std::move(cfg)), forbidden_(forbidden_fill(vocab)) {
  cfg_.sundae.validate();
  if (cfg_.topk < 1) throw Error(Errc::config_error, "topk must be at least 1");
  if (cfg_.sinkhorn_steps < 0) throw Error(Errc::config_error, "sinkhorn steps must be >= 0");
}

Correction Corrector::correct(std::string_view text) const {
  Correction out;
  out.source = std::string(text);
  const SourceSentence src = tokenize(text, vocab_);
  const nn::Mat h = model_.encode(src, &out.counters);
  PointerMatrix a = model_.pointer_matrix(h, src.n, src.s, &out.counters);
  if (cfg_.sinkhorn_steps > 0) a = sinkhorn(a, cfg_.sinkhorn_steps);
  const std::vector<ScoredPermutation> beam = beam_search(a, cfg_.beam, &out.search);

  const SundaeConfig sc = cfg_.sundae.resolved();
  const ScoreFn score = [&](std::span<const TokenId> tokens) {
    return model_.decode_probs(h, tokens, &out.counters);
  };
  const std::size_t take = std::min<std::size_t>(beam.size(), static_cast<std::size_t>(cfg_.topk));
  for (std::size_t k = 0; k < take; ++k) {
    const ScoredPermutation& hyp = beam[k];
    const ExpandedInput expanded = expand_insertions(src, hyp.pi);
    DecodeState state(expanded.tokens, expanded.msk_positions);
    const RefineResult r = refine(state, score, sc.steps, forbidden_);
    Candidate c{hyp.pi, hyp.logp, hyp.score, r.tokens, r.logp, render(src, hyp.pi, r.tokens, vocab_)};
    out.candidates.push_back(std::move(c));
  }
  out.output_tokens = static_cast<int>(split_tokens(out.candidates.front().text).size());
  return out;
}

std::vector<Correction> Corrector::correct_all(std::span<const std::string> lines, int jobs) const {
  std::vector<Correction> out(lines.size());
  std::vector<std::exception_ptr> errors(lines.size());
  auto run = [&](std::size_t i) {
    try {
      out[i] = correct(lines[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), lines.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < lines.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < lines.size(); i += workers) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace permgec
