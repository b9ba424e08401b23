#include "permgec/oracle.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>

namespace permgec {

namespace {

constexpr std::int64_t kHiddenSrc = -1;
constexpr std::int64_t kHiddenTgt = -2;

// Leftmost start of `window` inside `hay`, or -1.
int cont_len(std::span<const std::int64_t> window, std::span<const std::int64_t> hay) {
  if (window.size() > hay.size()) return -1;
  auto it = std::search(hay.begin(), hay.end(), window.begin(), window.end());
  return it == hay.end() ? -1 : static_cast<int>(it - hay.begin());
}

TrainingExample construct(std::span<const TokenId> x, std::span<const TokenId> y,
                          std::span<const AlignedSpan> chosen, const Vocab& vocab,
                          const OracleConfig& cfg) {
  const int n = static_cast<int>(x.size());
  std::vector<int> pi;
  TokenIds dec_input;
  TokenIds dec_output;
  bool lossy = false;
  int last_tgt = -1;
  int k = 1;
  for (const auto& span : chosen) {
    const int gap = span.start_tgt - last_tgt - 1;
    if (last_tgt != -1 && gap >= 1) {
      if (k <= cfg.s) {
        pi.push_back(n + k - 1);
        ++k;
        TokenIds ins_seq(y.begin() + last_tgt + 1, y.begin() + span.start_tgt);
        if (ins_seq.size() > 3) lossy = true;
        ins_seq.push_back(Vocab::pad());
        ins_seq.push_back(Vocab::pad());
        ins_seq.resize(3);
        dec_output.insert(dec_output.end(), ins_seq.begin(), ins_seq.end());
        dec_input.insert(dec_input.end(), 3, Vocab::msk());
      } else {
        lossy = true;
      }
    }
    for (int i = span.start_src; i < span.end_src(); ++i) {
      pi.push_back(i);
      dec_input.push_back(x[static_cast<std::size_t>(i)]);
      dec_output.push_back(x[static_cast<std::size_t>(i)]);
    }
    last_tgt = span.end_tgt() - 1;
  }
  auto source = make_source(x, vocab);
  Permutation perm(std::move(pi), n, source.s);
  return TrainingExample{std::move(source), std::move(perm), std::move(dec_input),
                         std::move(dec_output), lossy};
}

void require_sentinels(std::span<const TokenId> seq, const char* which) {
  if (seq.size() < 2 || seq.front() != Vocab::bos() || seq.back() != Vocab::eos()) {
    throw Error(Errc::format_error, std::string(which) + " must be wrapped in <s> ... </s>");
  }
}

}  // namespace

std::vector<AlignedSpan> match_spans(std::span<const TokenId> x, std::span<const TokenId> y) {
  std::vector<std::int64_t> msk_x(x.begin(), x.end());
  std::vector<std::int64_t> msk_y(y.begin(), y.end());
  std::vector<AlignedSpan> aligns;
  const int m = static_cast<int>(y.size());
  for (int len = m; len >= 1; --len) {
    for (int i = 0; i + len <= m; ++i) {
      std::span<const std::int64_t> window(msk_y.data() + i, static_cast<std::size_t>(len));
      if (std::find(window.begin(), window.end(), kHiddenTgt) != window.end()) continue;
      const int start = cont_len(window, msk_x);
      if (start == -1) continue;
      aligns.push_back({start, i, len});
      std::fill_n(msk_x.begin() + start, len, kHiddenSrc);
      std::fill_n(msk_y.begin() + i, len, kHiddenTgt);
    }
  }
  std::sort(aligns.begin(), aligns.end(),
            [](const AlignedSpan& a, const AlignedSpan& b) { return a.start_tgt < b.start_tgt; });
  return aligns;
}

std::vector<int> source_ranks(std::span<const AlignedSpan> spans) {
  std::vector<int> order(spans.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return spans[a].start_src < spans[b].start_src; });
  std::vector<int> ranks(spans.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = static_cast<int>(r);
  return ranks;
}

std::vector<AlignedSpan> select_spans(std::span<const AlignedSpan> spans, int source_len,
                                      const OracleConfig& cfg) {
  if (cfg.max_len < 1) throw Error(Errc::config_error, "max_len must be >= 1");
  const auto ranks = source_ranks(spans);
  const std::size_t k = spans.size();
  auto allowed = [&](std::size_t i, std::size_t j) {
    const int diff = std::abs(ranks[i] - ranks[j]);
    return cfg.strict_rank ? diff < cfg.max_len : diff <= cfg.max_len;
  };

  // Chains ending at j: maximise covered length, then minimise the number of
  // rank descents so that ties favour the more monotone ordering.
  std::vector<int> total(k), descents(k), parent(k, -1);
  for (std::size_t j = 0; j < k; ++j) {
    total[j] = spans[j].length;
    descents[j] = 0;
    for (std::size_t i = 0; i < j; ++i) {
      if (!allowed(i, j)) continue;
      const int t = total[i] + spans[j].length;
      const int d = descents[i] + (ranks[j] < ranks[i] ? 1 : 0);
      if (t > total[j] || (t == total[j] && d < descents[j])) {
        total[j] = t;
        descents[j] = d;
        parent[j] = static_cast<int>(i);
      }
    }
  }
  std::vector<char> keep(k, 0);
  int best = -1;
  for (std::size_t j = 0; j < k; ++j) {
    if (best == -1 || total[j] > total[best] ||
        (total[j] == total[best] && descents[j] < descents[best])) {
      best = static_cast<int>(j);
    }
  }
  for (int j = best; j != -1; j = parent[static_cast<std::size_t>(j)]) {
    keep[static_cast<std::size_t>(j)] = 1;
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (spans[j].start_src == 0 || spans[j].end_src() == source_len) keep[j] = 1;
  }
  std::vector<AlignedSpan> out;
  for (std::size_t j = 0; j < k; ++j) {
    if (keep[j]) out.push_back(spans[j]);
  }
  return out;
}

TrainingExample build_example(std::span<const TokenId> x, std::span<const TokenId> y,
                              const Vocab& vocab, const OracleConfig& cfg) {
  require_sentinels(x, "source");
  require_sentinels(y, "target");
  if (cfg.s != vocab.s_count()) {
    throw Error(Errc::config_error, "oracle s differs from the vocabulary's <ins> count");
  }
  const auto spans = match_spans(x, y);
  const auto chosen = select_spans(spans, static_cast<int>(x.size()), cfg);
  return construct(x, y, chosen, vocab, cfg);
}

TrainingExample build_example_monotone(std::span<const TokenId> x, std::span<const TokenId> y,
                                       const Vocab& vocab, const OracleConfig& cfg) {
  require_sentinels(x, "source");
  require_sentinels(y, "target");
  const std::size_t n = x.size();
  const std::size_t m = y.size();
  std::vector<std::vector<int>> lcs(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      lcs[i][j] = x[i] == y[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }
  std::vector<AlignedSpan> spans;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < n && j < m) {
    if (x[i] == y[j] && lcs[i][j] == lcs[i + 1][j + 1] + 1) {
      if (!spans.empty() && spans.back().end_src() == static_cast<int>(i) &&
          spans.back().end_tgt() == static_cast<int>(j)) {
        ++spans.back().length;
      } else {
        spans.push_back({static_cast<int>(i), static_cast<int>(j), 1});
      }
      ++i;
      ++j;
    } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
      ++i;
    } else {
      ++j;
    }
  }
  return construct(x, y, spans, vocab, cfg);
}

}  // namespace permgec
