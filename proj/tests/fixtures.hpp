#pragma once
// Sentence pairs and vocabularies shared by several test files.

#include <string>
#include <vector>

#include "permgec/core.hpp"

namespace fixture {

inline const std::string kModalSource = "I be busy";
inline const std::string kModalTarget = "I am busy";

inline const std::string kGapSource = "it was 20 years ago we were friends since us were 10";
inline const std::string kGapTarget =
    "it was 20 years ago and we had been friends since we were 10";

inline const std::string kSwapSource = "I like films when I was younger I watched on TV";
inline const std::string kSwapTarget = "I like films I watched on TV when I was younger";

inline permgec::Vocab example_vocab(int s) {
  return permgec::Vocab({"i", "be", "am", "busy", "it", "was", "20", "years", "ago", "we", "were",
                         "friends", "since", "us", "10", "and", "had", "been", "like", "films",
                         "when", "younger", "watched", "on", "tv"},
                        s);
}

}  // namespace fixture
