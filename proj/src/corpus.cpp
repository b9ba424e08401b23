#include "permgec/corpus.hpp"

#include <fstream>

#include "permgec/core.hpp"

namespace permgec {

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::I: return "I";
    case Stage::II: return "II";
    case Stage::III: return "III";
  }
  return "?";
}

Stage parse_stage(std::string_view text) {
  if (text == "I" || text == "1") return Stage::I;
  if (text == "II" || text == "2") return Stage::II;
  if (text == "III" || text == "3") return Stage::III;
  throw Error(Errc::config_error, "unknown stage '" + std::string(text) + "'");
}

namespace {

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

}  // namespace

ParallelCorpus load_tsv(const std::filesystem::path& path, Stage stage, LoadReport* report,
                        std::size_t max_tokens) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read corpus " + path.string());
  ParallelCorpus corpus;
  corpus.stage = stage;
  LoadReport local;
  LoadReport& rep = report != nullptr ? *report : local;
  rep = LoadReport{};

  std::string line;
  std::size_t lineno = 0;
  std::size_t nonblank = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    ++nonblank;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      rep.rejected.push_back({lineno, "no tab separator"});
      continue;
    }
    if (line.find('\t', tab + 1) != std::string::npos) {
      rep.rejected.push_back({lineno, "more than one tab"});
      continue;
    }
    SentencePair pair{line.substr(0, tab), line.substr(tab + 1)};
    if (blank(pair.source) || blank(pair.target)) {
      rep.rejected.push_back({lineno, "empty side"});
      continue;
    }
    if (split_tokens(pair.source).size() > max_tokens ||
        split_tokens(pair.target).size() > max_tokens) {
      ++rep.too_long;
      continue;
    }
    corpus.pairs.push_back(std::move(pair));
  }
  if (in.bad()) throw Error(Errc::io_error, "read failure on " + path.string());
  rep.accepted = corpus.pairs.size();
  if (nonblank > 0 && rep.rejected.size() * 10 > nonblank) {
    throw Error(Errc::corpus_rejected,
                path.string() + ": " + std::to_string(rep.rejected.size()) + " of " +
                    std::to_string(nonblank) + " lines malformed (first at line " +
                    std::to_string(rep.rejected.front().line) + ")");
  }
  return corpus;
}

void save_tsv(const std::filesystem::path& path, const ParallelCorpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  for (const auto& p : corpus.pairs) out << p.source << '\t' << p.target << '\n';
  if (!out) throw Error(Errc::io_error, "write failure on " + path.string());
}

void NoiseConfig::validate() const {
  for (double p : {p_drop, p_swap, p_dup, p_replace}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::config_error, "noise probability outside [0, 1]");
  }
  if (p_drop + p_swap + p_dup + p_replace > 1.0 + 1e-12) {
    throw Error(Errc::config_error, "per-token corruption probabilities sum above 1");
  }
}

std::vector<std::string> inject_errors(const std::vector<std::string>& clean,
                                       const NoiseConfig& cfg, std::mt19937_64& rng,
                                       NoiseStats* stats) {
  cfg.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::string> out;
  out.reserve(clean.size() + 4);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double u = unit(rng);
    if (stats != nullptr) ++stats->tokens;
    double edge = cfg.p_drop;
    if (u < edge) {
      if (stats != nullptr) ++stats->drops;
      continue;
    }
    edge += cfg.p_dup;
    if (u < edge) {
      if (stats != nullptr) ++stats->dups;
      out.push_back(clean[i]);
      out.push_back(clean[i]);
      continue;
    }
    edge += cfg.p_swap;
    if (u < edge) {
      if (stats != nullptr) ++stats->swaps;
      if (i + 1 < clean.size()) {
        out.push_back(clean[i + 1]);
        out.push_back(clean[i]);
        ++i;
      } else {
        out.push_back(clean[i]);
      }
      continue;
    }
    edge += cfg.p_replace;
    if (u < edge) {
      if (stats != nullptr) ++stats->replaces;
      const auto it = cfg.confusion_sets.find(clean[i]);
      if (it != cfg.confusion_sets.end() && !it->second.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
        out.push_back(it->second[pick(rng)]);
        continue;
      }
    }
    out.push_back(clean[i]);
  }
  return out;
}

std::vector<std::string> inject_errors(const std::vector<std::string>& clean,
                                       const NoiseConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  return inject_errors(clean, cfg, rng);
}

const StageSchedule& PlanConfig::of(Stage stage) const {
  switch (stage) {
    case Stage::I: return stage1;
    case Stage::II: return stage2;
    case Stage::III: return stage3;
  }
  return stage2;
}

TrainingPlan make_stage_plan(const std::vector<ParallelCorpus>& corpora, const PlanConfig& cfg) {
  TrainingPlan plan;
  for (Stage stage : {Stage::I, Stage::II, Stage::III}) {
    PlanPhase phase;
    phase.stage = stage;
    phase.schedule = cfg.of(stage);
    for (const auto& c : corpora) {
      if (c.stage == stage) phase.pairs.insert(phase.pairs.end(), c.pairs.begin(), c.pairs.end());
    }
    if (phase.pairs.empty()) {
      if (stage == Stage::II) throw Error(Errc::plan_error, "stage II data is required");
      continue;
    }
    plan.phases.push_back(std::move(phase));
  }
  return plan;
}

}  // namespace permgec
