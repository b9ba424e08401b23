#include "permgec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace permgec {

EditSet extract_edits(std::span<const std::string> src, std::span<const std::string> hyp) {
  const std::size_t n = src.size(), m = hyp.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const int diag = d[i - 1][j - 1] + (src[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i][j] = std::min({diag, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }
  // Backtrace from the end; ops collected in reverse.
  enum Op { keep, sub, del, ins };
  std::vector<Op> ops;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = src[i - 1] == hyp[j - 1];
      if (d[i][j] == d[i - 1][j - 1] + (same ? 0 : 1)) {
        ops.push_back(same ? keep : sub);
        --i, --j;
        continue;
      }
    }
    if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ops.push_back(del);
      --i;
    } else {
      ops.push_back(ins);
      --j;
    }
  }
  std::reverse(ops.begin(), ops.end());

  EditSet edits;
  int si = 0, hj = 0;
  bool open = false;
  for (Op op : ops) {
    if (op == keep) {
      open = false;
      ++si, ++hj;
      continue;
    }
    if (!open) {
      edits.push_back({si, si, {}});
      open = true;
    }
    Edit& e = edits.back();
    if (op == sub || op == del) e.end = ++si;
    if (op == sub || op == ins) e.replacement.push_back(hyp[static_cast<std::size_t>(hj++)]);
  }
  return edits;
}

Words apply_edits(std::span<const std::string> src, const EditSet& edits) {
  Words out;
  int pos = 0;
  for (const Edit& e : edits) {
    if (e.start < pos || e.end < e.start || e.end > static_cast<int>(src.size())) {
      throw Error(Errc::format_error, "edits overlap or fall outside the source");
    }
    out.insert(out.end(), src.begin() + pos, src.begin() + e.start);
    out.insert(out.end(), e.replacement.begin(), e.replacement.end());
    pos = e.end;
  }
  out.insert(out.end(), src.begin() + pos, src.end());
  return out;
}

ScoreReport score_counts(std::size_t tp, std::size_t fp, std::size_t fn, double beta) {
  ScoreReport r;
  r.tp = tp, r.fp = fp, r.fn = fn, r.beta = beta;
  r.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.recall = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double b2 = beta * beta;
  const double denom = b2 * r.precision + r.recall;
  r.f_beta = denom == 0.0 ? 0.0 : (1.0 + b2) * r.precision * r.recall / denom;
  return r;
}

ScoreReport f_beta_score(const EditSet& hyp, const EditSet& gold, double beta) {
  std::size_t tp = 0;
  for (const Edit& e : hyp) {
    if (std::find(gold.begin(), gold.end(), e) != gold.end()) ++tp;
  }
  return score_counts(tp, hyp.size() - tp, gold.size() - tp, beta);
}

ScoreReport corpus_f_beta(std::span<const Words> sources, std::span<const Words> hyps,
                          std::span<const Words> refs, double beta) {
  if (sources.size() != hyps.size() || sources.size() != refs.size()) {
    throw Error(Errc::format_error, "source, hypothesis and reference counts differ");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < sources.size(); ++k) {
    const ScoreReport r =
        f_beta_score(extract_edits(sources[k], hyps[k]), extract_edits(sources[k], refs[k]), beta);
    tp += r.tp, fp += r.fp, fn += r.fn;
  }
  return score_counts(tp, fp, fn, beta);
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(std::span<const std::string> words, std::size_t order) {
  NgramCounts out;
  for (std::size_t i = 0; i + order <= words.size(); ++i) {
    ++out[std::vector<std::string>(words.begin() + static_cast<std::ptrdiff_t>(i),
                                   words.begin() + static_cast<std::ptrdiff_t>(i + order))];
  }
  return out;
}

int count_of(const NgramCounts& c, const std::vector<std::string>& g) {
  const auto it = c.find(g);
  return it == c.end() ? 0 : it->second;
}

double gleu_single(std::span<const std::string> hyp, std::span<const std::string> src,
                   std::span<const std::string> ref) {
  if (hyp.empty()) return ref.empty() ? 1.0 : 0.0;
  double log_sum = 0.0;
  int orders = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const NgramCounts h = ngrams(hyp, n), r = ngrams(ref, n), s = ngrams(src, n);
    int total = 0, score = 0;
    for (const auto& [g, hc] : h) {
      total += hc;
      const int rc = count_of(r, g);
      const int surplus = std::max(0, count_of(s, g) - rc);  // source minus reference
      score += std::min(hc, rc) - std::min(hc, surplus);
    }
    if (total == 0) continue;
    if (score <= 0) return 0.0;
    log_sum += std::log(static_cast<double>(score) / static_cast<double>(total));
    ++orders;
  }
  const double hl = static_cast<double>(hyp.size()), rl = static_cast<double>(ref.size());
  const double bp = hl >= rl ? 1.0 : std::exp(1.0 - rl / hl);
  return bp * std::exp(log_sum / orders);
}

}  // namespace

double gleu(std::span<const std::string> hyp, std::span<const std::string> src,
            std::span<const Words> refs) {
  if (refs.empty()) throw Error(Errc::empty_input, "GLEU needs at least one reference");
  double best = 0.0;
  for (const Words& r : refs) best = std::max(best, gleu_single(hyp, src, r));
  return best;
}

std::size_t select_hypothesis(std::span<const RankedCandidate> candidates, SelectMode mode,
                              double lambda_resc, std::span<const std::string> src,
                              std::span<const Words> refs) {
  if (candidates.empty()) throw Error(Errc::empty_input, "no candidates to select from");
  if (!(lambda_resc >= 0.0 && lambda_resc <= 1.0)) {
    throw Error(Errc::config_error, "lambda_resc outside [0, 1]");
  }
  auto key = [&](const RankedCandidate& c) {
    if (mode == SelectMode::gleu_oracle) return gleu(c.tokens, src, refs);
    if (lambda_resc == 1.0) return c.perm_score;
    if (lambda_resc == 0.0) return c.dec_logp;
    return lambda_resc * c.perm_score + (1.0 - lambda_resc) * c.dec_logp;
  };
  std::size_t best = 0;
  double best_key = key(candidates[0]);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double k = key(candidates[i]);
    if (k > best_key) {
      best = i;
      best_key = k;
    }
  }
  return best;
}

CostReport bench_forward_counts(std::span<const std::string> sources, const Corrector& corrector,
                                int bucket_width, int jobs, std::span<const std::string> targets) {
  if (bucket_width < 1) throw Error(Errc::config_error, "bucket width must be positive");
  if (!targets.empty() && targets.size() != sources.size()) {
    throw Error(Errc::format_error, "source and target counts differ");
  }
  const std::vector<Correction> results = corrector.correct_all(sources, jobs);
  CostReport report;
  std::map<int, CostBucket> buckets;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const Correction& c = results[k];
    SentenceCost sc;
    sc.output_tokens = c.output_tokens;
    sc.target_tokens =
        targets.empty() ? c.output_tokens : static_cast<int>(split_tokens(targets[k]).size());
    sc.encoder_passes = c.counters.encoder;
    sc.decoder_passes = c.counters.decoder;
    sc.pointer_passes = c.counters.pointer;
    sc.beam_steps = c.search.steps;
    sc.beam_candidates = c.search.candidates;
    sc.ar_passes = static_cast<std::size_t>(sc.target_tokens);
    report.sentences.push_back(sc);

    const int lo = (sc.target_tokens / bucket_width) * bucket_width;
    CostBucket& b = buckets[lo];
    b.lo = lo;
    b.hi = lo + bucket_width;
    ++b.sentences;
    b.mean_encoder += static_cast<double>(sc.encoder_passes);
    b.mean_decoder += static_cast<double>(sc.decoder_passes);
    b.mean_beam_steps += static_cast<double>(sc.beam_steps);
    b.mean_ar += static_cast<double>(sc.ar_passes);
    b.max_decoder = std::max(b.max_decoder, sc.decoder_passes);
  }
  for (auto& [_, b] : buckets) {
    const double k = static_cast<double>(b.sentences);
    b.mean_encoder /= k;
    b.mean_decoder /= k;
    b.mean_beam_steps /= k;
    b.mean_ar /= k;
    report.buckets.push_back(b);
  }
  return report;
}

}  // namespace permgec
