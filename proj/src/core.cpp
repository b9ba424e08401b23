#include "permgec/core.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace permgec {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::empty_input: return "EmptyInput";
    case Errc::invalid_permutation: return "InvalidPermutation";
    case Errc::dead_end: return "DeadEnd";
    case Errc::search_exhausted: return "SearchExhausted";
    case Errc::length_exceeded: return "LengthExceeded";
    case Errc::numerical_divergence: return "NumericalDivergence";
    case Errc::io_error: return "IoError";
    case Errc::corpus_rejected: return "CorpusRejected";
    case Errc::plan_error: return "PlanError";
    case Errc::config_error: return "ConfigError";
    case Errc::format_error: return "FormatError";
  }
  return "Unknown";
}

std::string specials::ins(int k) { return "<ins_" + std::to_string(k) + ">"; }

namespace {

constexpr int kFixedSpecials = 5;

std::vector<std::string> reserved_tokens(int s_count) {
  std::vector<std::string> out{std::string(specials::pad), std::string(specials::unk),
                               std::string(specials::bos), std::string(specials::eos),
                               std::string(specials::msk)};
  for (int k = 1; k <= s_count; ++k) out.push_back(specials::ins(k));
  return out;
}

}  // namespace

Vocab::Vocab(std::vector<std::string> ordinary, int s_count) : s_count_(s_count) {
  if (s_count < 0) throw Error(Errc::config_error, "negative <ins> count");
  tokens_ = reserved_tokens(s_count);
  for (auto& t : ordinary) {
    if (id_of_.count(t) || std::find(tokens_.begin(), tokens_.end(), t) != tokens_.end()) {
      continue;
    }
    tokens_.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    id_of_.emplace(tokens_[i], static_cast<TokenId>(i));
  }
}

Vocab Vocab::build(std::span<const std::vector<std::string>> sentences, int s_count,
                   std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& sent : sentences) {
    for (const auto& t : sent) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> ordinary;
  for (auto& [tok, _] : ranked) {
    if (max_size != 0 && ordinary.size() + kFixedSpecials + s_count >= max_size) break;
    ordinary.push_back(tok);
  }
  return Vocab(std::move(ordinary), s_count);
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot read vocab " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  int s_count = 0;
  while (kFixedSpecials + s_count < static_cast<int>(lines.size()) &&
         lines[kFixedSpecials + s_count] == specials::ins(s_count + 1)) {
    ++s_count;
  }
  const auto reserved = reserved_tokens(s_count);
  if (lines.size() < reserved.size() ||
      !std::equal(reserved.begin(), reserved.end(), lines.begin())) {
    throw Error(Errc::format_error, "vocab file does not start with the reserved specials");
  }
  std::vector<std::string> ordinary(lines.begin() + static_cast<std::ptrdiff_t>(reserved.size()),
                                    lines.end());
  Vocab v(ordinary, s_count);
  if (v.size() != lines.size()) {
    throw Error(Errc::format_error, "vocab file has duplicate tokens");
  }
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_error, "cannot write vocab " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

TokenId Vocab::id(std::string_view token) const {
  auto found = find(token);
  return found ? *found : unk();
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = id_of_.find(std::string(token));
  if (it == id_of_.end() || is_special(it->second)) return std::nullopt;
  return it->second;
}

TokenId Vocab::ins(int k) const {
  if (k < 1 || k > s_count_) throw Error(Errc::config_error, "no <ins_" + std::to_string(k) + ">");
  return kFixedSpecials + k - 1;
}

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

SourceSentence make_source(std::span<const TokenId> core, const Vocab& vocab,
                           std::vector<std::string> surface) {
  if (core.size() < 2 || core.front() != Vocab::bos() || core.back() != Vocab::eos()) {
    throw Error(Errc::format_error, "source core must be wrapped in <s> ... </s>");
  }
  SourceSentence src;
  src.n = static_cast<int>(core.size());
  src.s = vocab.s_count();
  src.ids.assign(core.begin(), core.end());
  for (int k = 1; k <= src.s; ++k) src.ids.push_back(vocab.ins(k));
  if (surface.empty()) {
    for (TokenId id : core) surface.push_back(vocab.token(id));
  }
  src.surface = std::move(surface);
  return src;
}

SourceSentence tokenize(std::string_view text, const Vocab& vocab) {
  auto words = split_tokens(text);
  if (words.empty()) throw Error(Errc::empty_input, "nothing to tokenize");
  TokenIds core{Vocab::bos()};
  std::vector<std::string> surface{std::string(specials::bos)};
  for (auto& w : words) {
    core.push_back(vocab.id(w));
    surface.push_back(std::move(w));
  }
  core.push_back(Vocab::eos());
  surface.emplace_back(specials::eos);
  return make_source(core, vocab, std::move(surface));
}

// ---------------------------------------------------------------------------
// Permutation

std::optional<std::string> Permutation::check(std::span<const int> pi, int n, int s) {
  if (n < 2) return "core length must be at least 2";
  if (pi.size() < 2) return "permutation shorter than two indices";
  if (pi.front() != 0) return "must start at <s>";
  if (pi.back() != n - 1) return "must end at </s>";
  std::vector<char> seen(static_cast<std::size_t>(n + s), 0);
  int last_ins = -1;
  bool prev_ins = false;
  for (int idx : pi) {
    if (idx < 0 || idx >= n + s) return "index " + std::to_string(idx) + " out of range";
    if (seen[static_cast<std::size_t>(idx)]) return "index " + std::to_string(idx) + " repeats";
    seen[static_cast<std::size_t>(idx)] = 1;
    const bool is_ins = idx >= n;
    if (is_ins) {
      if (idx <= last_ins) return "<ins> indices out of order";
      if (prev_ins) return "adjacent <ins> indices";
      last_ins = idx;
    }
    prev_ins = is_ins;
  }
  return std::nullopt;
}

Permutation::Permutation(std::vector<int> indices, int n, int s)
    : pi_(std::move(indices)), n_(n), s_(s) {
  if (auto why = check(pi_, n_, s_)) throw Error(Errc::invalid_permutation, *why);
}

Permutation Permutation::identity(int n, int s) {
  std::vector<int> pi(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pi[static_cast<std::size_t>(i)] = i;
  return Permutation(std::move(pi), n, s);
}

int Permutation::insertion_count() const noexcept {
  return static_cast<int>(std::count_if(pi_.begin(), pi_.end(), [&](int i) { return i >= n_; }));
}

bool Permutation::is_identity() const noexcept {
  if (static_cast<int>(pi_.size()) != n_) return false;
  for (int i = 0; i < n_; ++i) {
    if (pi_[static_cast<std::size_t>(i)] != i) return false;
  }
  return true;
}

TokenIds apply_permutation(const SourceSentence& src, const Permutation& pi) {
  if (pi.n() != src.n || pi.s() != src.s) {
    throw Error(Errc::invalid_permutation, "permutation shape does not match source");
  }
  TokenIds out;
  out.reserve(pi.size());
  for (int idx : pi.indices()) out.push_back(src.ids[static_cast<std::size_t>(idx)]);
  return out;
}

ExpandedInput expand_insertions(const SourceSentence& src, const Permutation& pi) {
  ExpandedInput out;
  for (int idx : pi.indices()) {
    if (idx >= src.n) {
      for (int k = 0; k < 3; ++k) {
        out.msk_positions.push_back(static_cast<int>(out.tokens.size()));
        out.tokens.push_back(Vocab::msk());
        out.origin.push_back(-1);
      }
    } else {
      out.tokens.push_back(src.ids[static_cast<std::size_t>(idx)]);
      out.origin.push_back(idx);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// TrainingExample

std::vector<int> TrainingExample::msk_positions() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < dec_input.size(); ++i) {
    if (dec_input[i] == Vocab::msk()) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::optional<std::string> check_example(const TrainingExample& ex) {
  if (ex.dec_input.size() != ex.dec_output.size()) return "decoder input/output lengths differ";
  const auto expanded = expand_insertions(ex.source, ex.pi);
  if (expanded.tokens != ex.dec_input) return "decoder input is not the expanded permutation";
  for (std::size_t i = 0; i < ex.dec_input.size(); ++i) {
    if (ex.dec_input[i] != Vocab::msk() && ex.dec_input[i] != ex.dec_output[i]) {
      return "decoder output changes a non-<msk> position " + std::to_string(i);
    }
  }
  return std::nullopt;
}

TokenIds reconstruct_target(const TrainingExample& ex) {
  TokenIds out;
  for (std::size_t i = 0; i < ex.dec_input.size(); ++i) {
    const TokenId t = ex.dec_input[i] == Vocab::msk() ? ex.dec_output[i] : ex.dec_input[i];
    if (t != Vocab::pad()) out.push_back(t);
  }
  return out;
}

}  // namespace permgec
