#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "permgec/error.hpp"

namespace permgec {

using TokenId = std::int32_t;
using TokenIds = std::vector<TokenId>;

namespace specials {
inline constexpr std::string_view pad = "<pad>";
inline constexpr std::string_view unk = "<unk>";
inline constexpr std::string_view bos = "<s>";
inline constexpr std::string_view eos = "</s>";
inline constexpr std::string_view msk = "<msk>";
// <ins_1> .. <ins_s>
std::string ins(int k);
}  // namespace specials

/// Closed token inventory. Ids 0..4 are <pad>, <unk>, <s>, </s>, <msk>; the
/// next s_count ids are <ins_1>..<ins_s>; ordinary tokens follow.
class Vocab {
 public:
  Vocab() : Vocab(std::vector<std::string>{}, 8) {}
  Vocab(std::vector<std::string> ordinary, int s_count);

  /// Ordinary tokens ranked by descending frequency, ties lexicographic.
  static Vocab build(std::span<const std::vector<std::string>> sentences, int s_count,
                     std::size_t max_size = 0);

  /// One token per line, line number = id.
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  int s_count() const noexcept { return s_count_; }

  /// Ordinary lookup: specials and unknown strings both map to <unk>.
  TokenId id(std::string_view token) const;
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  static constexpr TokenId pad() noexcept { return 0; }
  static constexpr TokenId unk() noexcept { return 1; }
  static constexpr TokenId bos() noexcept { return 2; }
  static constexpr TokenId eos() noexcept { return 3; }
  static constexpr TokenId msk() noexcept { return 4; }
  TokenId ins(int k) const;  // 1-based

  bool is_ins(TokenId id) const noexcept { return id >= 5 && id < 5 + s_count_; }
  bool is_special(TokenId id) const noexcept { return id >= 0 && id < 5 + s_count_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> id_of_;
  int s_count_ = 0;
};

/// Lowercased whitespace split.
std::vector<std::string> split_tokens(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);

/// Sentinel-wrapped source followed by the <ins> block: |ids| = n + s.
struct SourceSentence {
  TokenIds ids;
  int n = 0;
  int s = 0;
  /// Surface form of each core position (sentinels included), used to render
  /// source tokens verbatim even when they are out of vocabulary.
  std::vector<std::string> surface;

  int size() const noexcept { return n + s; }
  std::span<const TokenId> core() const { return {ids.data(), static_cast<std::size_t>(n)}; }
};

SourceSentence tokenize(std::string_view text, const Vocab& vocab);

/// Wraps already-mapped core ids (including sentinels) with the <ins> block.
SourceSentence make_source(std::span<const TokenId> core, const Vocab& vocab,
                           std::vector<std::string> surface = {});

/// Index sequence into a SourceSentence. Construction validates every
/// structural invariant and throws Errc::invalid_permutation otherwise.
class Permutation {
 public:
  Permutation(std::vector<int> indices, int n, int s);

  static Permutation identity(int n, int s);
  /// Empty optional when valid, otherwise the reason.
  static std::optional<std::string> check(std::span<const int> indices, int n, int s);

  std::span<const int> indices() const noexcept { return pi_; }
  std::size_t size() const noexcept { return pi_.size(); }
  int operator[](std::size_t i) const { return pi_[i]; }
  int n() const noexcept { return n_; }
  int s() const noexcept { return s_; }
  int insertion_count() const noexcept;
  bool is_identity() const noexcept;

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<int> pi_;
  int n_;
  int s_;
};

TokenIds apply_permutation(const SourceSentence& src, const Permutation& pi);

/// Every <ins> token becomes three <msk>; returns the sequence and the
/// positions of the <msk> slots.
struct ExpandedInput {
  TokenIds tokens;
  std::vector<int> msk_positions;
  /// For each output position, the source index it was copied from, or -1 for
  /// a <msk> slot.
  std::vector<int> origin;
};
ExpandedInput expand_insertions(const SourceSentence& src, const Permutation& pi);

struct TrainingExample {
  SourceSentence source;
  Permutation pi;
  TokenIds dec_input;
  TokenIds dec_output;
  bool lossy = false;

  std::vector<int> msk_positions() const;
};

/// Checks the TrainingExample invariants; empty optional when they hold.
std::optional<std::string> check_example(const TrainingExample& ex);

/// Fills every <msk> slot of dec_input from dec_output, then drops <pad>.
TokenIds reconstruct_target(const TrainingExample& ex);

}  // namespace permgec
