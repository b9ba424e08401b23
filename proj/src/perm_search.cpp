#include "permgec/perm_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace permgec {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

PointerMatrix::PointerMatrix(int n, int s)
    : n_(n), s_(s), a_(static_cast<std::size_t>((n + s) * (n + s)), 0.0) {}

PointerMatrix::PointerMatrix(int n, int s, std::vector<double> row_major)
    : n_(n), s_(s), a_(std::move(row_major)) {
  if (a_.size() != static_cast<std::size_t>((n + s) * (n + s))) {
    throw Error(Errc::format_error, "pointer matrix data does not match (n+s)^2");
  }
  for (double v : a_) {
    if (!std::isfinite(v)) throw Error(Errc::numerical_divergence, "non-finite pointer score");
  }
}

PrefixState::PrefixState(int n, int s)
    : n_(n), s_(s), visited_(static_cast<std::size_t>(n + s), 0) {
  push(0);
}

void PrefixState::push(int idx) {
  path_.push_back(idx);
  visited_[static_cast<std::size_t>(idx)] = 1;
  if (idx >= n_) {
    ++inserts_used_;
  } else {
    last_core_ = idx;
  }
}

bool PrefixState::allowed(int idx) const {
  if (visited(idx)) return false;
  if (idx < n_) return true;
  if (last() >= n_) return false;
  return idx == n_ + inserts_used_;
}

int PrefixState::right() const {
  for (int j = last_core_ + 1; j < n_; ++j) {
    if (!visited(j)) return j;
  }
  return n_ - 1;
}

double log_sum_exp(std::span<const double> values) {
  double hi = kNegInf;
  for (double v : values) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

std::vector<double> step_distribution(const PointerMatrix& a, const PrefixState& prefix,
                                      double c) {
  const int dim = a.dim();
  const auto row = a.row(prefix.last());
  std::vector<double> p(static_cast<std::size_t>(dim), 0.0);
  double hi = kNegInf;
  for (int j = 0; j < dim; ++j) {
    if (prefix.allowed(j)) hi = std::max(hi, row[static_cast<std::size_t>(j)]);
  }
  if (hi == kNegInf) throw Error(Errc::dead_end, "every successor is masked");
  double sum = 0.0;
  for (int j = 0; j < dim; ++j) {
    if (!prefix.allowed(j)) continue;
    const double e = std::exp(row[static_cast<std::size_t>(j)] - hi);
    p[static_cast<std::size_t>(j)] = e;
    sum += e;
  }
  for (double& v : p) v /= sum;
  if (c > 0.0) {
    for (double& v : p) v *= 1.0 - c;
    p[static_cast<std::size_t>(prefix.right())] += c;
  }
  return p;
}

std::vector<double> step_distribution(const PointerMatrix& a, std::span<const int> prefix,
                                      double c) {
  if (prefix.empty() || prefix.front() != 0) {
    throw Error(Errc::invalid_permutation, "prefix must start at <s>");
  }
  PrefixState state(a.n(), a.s());
  for (std::size_t i = 1; i < prefix.size(); ++i) {
    if (!state.allowed(prefix[i])) {
      throw Error(Errc::invalid_permutation, "prefix takes a masked transition");
    }
    state.push(prefix[i]);
  }
  return step_distribution(a, state, c);
}

double score_permutation(const PointerMatrix& a, const Permutation& pi, double c) {
  if (pi.n() != a.n() || pi.s() != a.s()) {
    throw Error(Errc::invalid_permutation, "permutation shape does not match the matrix");
  }
  PrefixState state(a.n(), a.s());
  double logp = 0.0;
  for (std::size_t i = 1; i < pi.size(); ++i) {
    const int next = pi[i];
    if (!state.allowed(next)) return kNegInf;
    const auto p = step_distribution(a, state, c);
    const double pj = p[static_cast<std::size_t>(next)];
    if (pj <= 0.0) return kNegInf;
    logp += std::log(pj);
    state.push(next);
  }
  return logp;
}

std::vector<ScoredPermutation> beam_search(const PointerMatrix& a, const BeamConfig& cfg,
                                           SearchStats* stats) {
  if (cfg.width < 1) throw Error(Errc::config_error, "beam width must be >= 1");
  struct Hyp {
    PrefixState state;
    double logp;
  };
  struct Candidate {
    double logp;
    std::size_t parent;
    int next;
  };
  SearchStats local;
  std::vector<Hyp> active{{PrefixState(a.n(), a.s()), 0.0}};
  std::vector<Hyp> finished;
  const int max_steps = a.dim();
  for (int step = 0; step < max_steps && !active.empty(); ++step) {
    ++local.steps;
    std::vector<Candidate> candidates;
    for (std::size_t h = 0; h < active.size(); ++h) {
      std::vector<double> p;
      try {
        p = step_distribution(a, active[h].state, cfg.confidence_bias);
      } catch (const Error& e) {
        if (e.code() == Errc::dead_end) continue;
        throw;
      }
      ++local.distributions;
      for (int j = 0; j < a.dim(); ++j) {
        const double pj = p[static_cast<std::size_t>(j)];
        if (pj <= 0.0) continue;
        ++local.candidates;
        const double lp = active[h].logp + std::log(pj);
        if (j == a.n() - 1) {
          Hyp done = active[h];
          done.state.push(j);
          done.logp = lp;
          finished.push_back(std::move(done));
        } else {
          candidates.push_back({lp, h, j});
        }
      }
    }
    const std::size_t keep = std::min(candidates.size(), static_cast<std::size_t>(cfg.width));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [](const Candidate& x, const Candidate& y) {
                        if (x.logp != y.logp) return x.logp > y.logp;
                        if (x.parent != y.parent) return x.parent < y.parent;
                        return x.next < y.next;
                      });
    std::vector<Hyp> next_active;
    next_active.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      Hyp h = active[candidates[i].parent];
      h.state.push(candidates[i].next);
      h.logp = candidates[i].logp;
      next_active.push_back(std::move(h));
    }
    active = std::move(next_active);
  }
  if (stats != nullptr) *stats = local;
  if (finished.empty()) throw Error(Errc::search_exhausted, "no hypothesis reached </s>");

  std::vector<ScoredPermutation> out;
  out.reserve(finished.size());
  for (auto& h : finished) {
    const auto& path = h.state.path();
    const double score = cfg.length_norm ? h.logp / static_cast<double>(path.size()) : h.logp;
    out.push_back({Permutation(path, a.n(), a.s()), h.logp, score});
  }
  std::sort(out.begin(), out.end(), [](const ScoredPermutation& x, const ScoredPermutation& y) {
    if (x.score != y.score) return x.score > y.score;
    return std::lexicographical_compare(x.pi.indices().begin(), x.pi.indices().end(),
                                        y.pi.indices().begin(), y.pi.indices().end());
  });
  if (out.size() > static_cast<std::size_t>(cfg.width)) {
    out.erase(out.begin() + cfg.width, out.end());
  }
  return out;
}

PointerMatrix sinkhorn(const PointerMatrix& a, int steps) {
  if (steps < 0) throw Error(Errc::config_error, "sinkhorn steps must be >= 0");
  const int dim = a.dim();
  std::vector<double> m(a.data().begin(), a.data().end());
  auto at = [&](int i, int j) -> double& {
    return m[static_cast<std::size_t>(i) * static_cast<std::size_t>(dim) +
             static_cast<std::size_t>(j)];
  };
  std::vector<double> buf(static_cast<std::size_t>(dim));
  for (int step = 0; step < steps; ++step) {
    for (int j = 0; j < dim; ++j) {
      for (int i = 0; i < dim; ++i) buf[static_cast<std::size_t>(i)] = at(i, j);
      const double lse = log_sum_exp(buf);
      for (int i = 0; i < dim; ++i) at(i, j) -= lse;
    }
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) buf[static_cast<std::size_t>(j)] = at(i, j);
      const double lse = log_sum_exp(buf);
      for (int j = 0; j < dim; ++j) at(i, j) -= lse;
    }
  }
  return PointerMatrix(a.n(), a.s(), std::move(m));
}

}  // namespace permgec
