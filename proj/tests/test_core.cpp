#include <filesystem>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "permgec/core.hpp"

using namespace permgec;

namespace {
std::vector<std::string> names(const Vocab& v, const TokenIds& ids) {
  std::vector<std::string> out;
  for (TokenId id : ids) out.push_back(v.token(id));
  return out;
}
}  // namespace

TEST_CASE("vocab reserves specials and round-trips through a file") {
  const Vocab v = fixture::example_vocab(3);
  CHECK(v.token(Vocab::pad()) == "<pad>");
  CHECK(v.token(Vocab::unk()) == "<unk>");
  CHECK(v.token(Vocab::bos()) == "<s>");
  CHECK(v.token(Vocab::eos()) == "</s>");
  CHECK(v.token(Vocab::msk()) == "<msk>");
  CHECK(v.token(v.ins(1)) == specials::ins(1));
  CHECK(v.token(v.ins(3)) == specials::ins(3));
  // Ordinary lookup covers every non-special token; specials stay unreachable
  // from text.
  CHECK(v.id("<s>") == Vocab::unk());
  for (std::size_t i = 5 + 3; i < v.size(); ++i) {
    CHECK(v.find(v.token(static_cast<TokenId>(i))) == static_cast<TokenId>(i));
  }
  const auto path = std::filesystem::temp_directory_path() / "permgec_vocab_test.txt";
  v.save(path);
  const Vocab back = Vocab::load(path);
  CHECK(back.tokens() == v.tokens());
  CHECK(back.s_count() == 3);
  std::filesystem::remove(path);
}

TEST_CASE("tokenize wraps, lowercases and appends the insertion block") {
  const Vocab v = fixture::example_vocab(1);
  const SourceSentence src = tokenize(fixture::kModalSource, v);
  CHECK(src.n == 5);
  CHECK(src.s == 1);
  CHECK(names(v, src.ids) == std::vector<std::string>{"<s>", "i", "be", "busy", "</s>", "<ins_1>"});
  CHECK(tokenize(fixture::kModalSource, v).ids == src.ids);

  const SourceSentence oov = tokenize("zzz", v);
  CHECK(names(v, oov.ids) == std::vector<std::string>{"<s>", "<unk>", "</s>", "<ins_1>"});

  CHECK_THROWS_AS(tokenize("", v), Error);
  try {
    tokenize("   ", v);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_input);
  }
}

TEST_CASE("apply_permutation reproduces the worked example orderings") {
  const Vocab v1 = fixture::example_vocab(1);
  const SourceSentence s1 = tokenize(fixture::kModalSource, v1);
  const Permutation p1({0, 1, 5, 3, 4}, 5, 1);
  CHECK(names(v1, apply_permutation(s1, p1)) ==
        std::vector<std::string>{"<s>", "i", "<ins_1>", "busy", "</s>"});
  CHECK(apply_permutation(s1, Permutation::identity(5, 1)) ==
        TokenIds(s1.ids.begin(), s1.ids.begin() + 5));

  const Vocab v3 = fixture::example_vocab(3);
  const SourceSentence s2 = tokenize(fixture::kGapSource, v3);
  REQUIRE(s2.n == 14);
  const Permutation p2({0, 1, 2, 3, 4, 5, 14, 6, 15, 8, 9, 16, 11, 12, 13}, 14, 3);
  CHECK(join_tokens(names(v3, apply_permutation(s2, p2))) ==
        "<s> it was 20 years ago <ins_1> we <ins_2> friends since <ins_3> were 10 </s>");
}

TEST_CASE("permutation invariants are enforced") {
  auto invalid = [](std::vector<int> idx, int n, int s) {
    try {
      Permutation p(std::move(idx), n, s);
    } catch (const Error& e) {
      return e.code() == Errc::invalid_permutation;
    }
    return false;
  };
  CHECK(invalid({1, 0, 4}, 5, 1));           // must start at <s>
  CHECK(invalid({0, 1, 2}, 5, 1));           // must end at </s>
  CHECK(invalid({0, 1, 1, 4}, 5, 1));        // repeat
  CHECK(invalid({0, 6, 1, 5, 4}, 5, 2));     // insertions out of order
  CHECK(invalid({0, 5, 6, 4}, 5, 2));        // adjacent insertions
  CHECK(invalid({0, 9, 4}, 5, 1));           // out of range
  CHECK_FALSE(invalid({0, 5, 1, 6, 4}, 5, 2));
  CHECK_FALSE(invalid({0, 4}, 5, 0));
}

TEST_CASE("insertion expansion round-trips for every valid permutation") {
  const Vocab v = fixture::example_vocab(2);
  const SourceSentence src = tokenize("we were friends since", v);
  const auto perms = oracle::all_permutations(src.n, src.s);
  CHECK(perms.size() > 100);
  for (const auto& idx : perms) {
    const Permutation pi(idx, src.n, src.s);
    const TokenIds permuted = apply_permutation(src, pi);
    for (TokenId t : permuted) {
      CHECK(t != Vocab::pad());
      CHECK(t != Vocab::msk());
    }
    const ExpandedInput ex = expand_insertions(src, pi);
    TokenIds kept, expected;
    for (TokenId t : ex.tokens) {
      if (t != Vocab::msk() && t != Vocab::pad()) kept.push_back(t);
    }
    for (TokenId t : permuted) {
      if (!v.is_ins(t)) expected.push_back(t);
    }
    CHECK(kept == expected);
    CHECK(ex.msk_positions.size() == 3 * static_cast<std::size_t>(pi.insertion_count()));
  }
}
