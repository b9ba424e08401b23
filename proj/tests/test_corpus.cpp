#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "permgec/corpus.hpp"
#include "permgec/pipeline.hpp"
#include "permgec/toy_grammar.hpp"

using namespace permgec;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / ("permgec_" + name);
  std::ofstream(p, std::ios::binary) << content;
  return p;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::empty_input;
}

}  // namespace

TEST_CASE("noise injection endpoints and determinism") {
  const std::vector<std::string> clean{"i", "am", "busy"};
  NoiseConfig none{0, 0, 0, 0, {}, 1};
  CHECK(inject_errors(clean, none) == clean);
  NoiseConfig drop{1, 0, 0, 0, {}, 1};
  CHECK(inject_errors(clean, drop).empty());
  NoiseConfig swap{0, 0.5, 0, 0, {}, 7};
  CHECK(inject_errors(clean, swap) == inject_errors(clean, swap));

  // Seeded snapshot: recorded on first run, compared afterwards.
  const fs::path golden = fs::path(PERMGEC_TEST_DIR) / "golden" / "noise_seed7_swap05.txt";
  const std::string got = join_tokens(inject_errors(clean, swap));
  if (!fs::exists(golden)) {
    std::ofstream(golden) << got << '\n';
  }
  std::ifstream in(golden);
  std::string want;
  std::getline(in, want);
  CHECK(got == want);

  NoiseConfig bad{0.6, 0.6, 0, 0, {}, 1};
  CHECK(code_of([&] { bad.validate(); }) == Errc::config_error);
}

TEST_CASE("empirical corruption rates follow the configured probabilities") {
  NoiseConfig cfg{0.03, 0.03, 0.02, 0.10, {}, 99};
  std::vector<std::string> vocab;
  for (int i = 0; i < 20; ++i) vocab.push_back("w" + std::to_string(i));
  for (const auto& w : vocab) cfg.confusion_sets[w] = {w + "x"};
  std::mt19937_64 rng(99);
  NoiseStats st;
  std::vector<std::string> sentence(20);
  while (st.tokens < 100000) {
    for (auto& w : sentence) w = vocab[rng() % vocab.size()];
    inject_errors(sentence, cfg, rng, &st);
  }
  const double n = static_cast<double>(st.tokens);
  CHECK(std::abs(st.drops / n - cfg.p_drop) < 0.02);
  CHECK(std::abs(st.swaps / n - cfg.p_swap) < 0.02);
  CHECK(std::abs(st.dups / n - cfg.p_dup) < 0.02);
  CHECK(std::abs(st.replaces / n - cfg.p_replace) < 0.02);
  const double total = static_cast<double>(st.drops + st.swaps + st.dups + st.replaces) / n;
  CHECK(std::abs(total - (cfg.p_drop + cfg.p_swap + cfg.p_dup + cfg.p_replace)) < 0.02);
}

TEST_CASE("tsv loading") {
  {
    const auto p = write_file("one.tsv", "a\tb\n");
    const ParallelCorpus c = load_tsv(p, Stage::III);
    REQUIRE(c.pairs.size() == 1);
    CHECK(c.pairs[0] == SentencePair{"a", "b"});
    CHECK(c.stage == Stage::III);
  }
  {
    std::string text;
    for (int i = 0; i < 19; ++i) text += "x y\tx z\r\n";
    text += "no tab here\r\n";
    const auto p = write_file("crlf.tsv", text);
    LoadReport rep;
    const ParallelCorpus c = load_tsv(p, Stage::II, &rep);
    CHECK(c.pairs.size() == 19);
    CHECK(c.pairs[0].target == "x z");
    REQUIRE(rep.rejected.size() == 1);
    CHECK(rep.rejected[0].line == 20);
  }
  {
    const auto p = write_file("bad.tsv", "a\tb\nbroken\nc\td\n");
    CHECK(code_of([&] { load_tsv(p, Stage::II); }) == Errc::corpus_rejected);
  }
  {
    std::string long_side;
    for (int i = 0; i < 71; ++i) long_side += "w ";
    const auto p = write_file("long.tsv", "a\tb\n" + long_side + "\tb\n");
    LoadReport rep;
    const ParallelCorpus c = load_tsv(p, Stage::II, &rep);
    CHECK(c.pairs.size() == 1);
    CHECK(rep.too_long == 1);
  }
  CHECK(code_of([] { load_tsv("/nonexistent/permgec.tsv", Stage::II); }) == Errc::io_error);

  const ParallelCorpus out{{{"i be busy", "i am busy"}, {"x", "y"}}, Stage::I};
  const auto p = fs::temp_directory_path() / "permgec_roundtrip.tsv";
  save_tsv(p, out);
  CHECK(load_tsv(p, Stage::I).pairs == out.pairs);
}

TEST_CASE("stage plan") {
  const ParallelCorpus s1{{{"a", "b"}}, Stage::I};
  const ParallelCorpus s2{{{"c", "d"}, {"e", "f"}}, Stage::II};
  const ParallelCorpus s3{{{"g", "h"}}, Stage::III};
  PlanConfig cfg;
  cfg.stage1.epochs = 4;
  const TrainingPlan full = make_stage_plan({s3, s1, s2}, cfg);
  REQUIRE(full.phases.size() == 3);
  CHECK(full.phases[0].stage == Stage::I);
  CHECK(full.phases[1].stage == Stage::II);
  CHECK(full.phases[2].stage == Stage::III);
  CHECK(full.phases[0].schedule.epochs == 4);
  CHECK(full.phases[1].schedule == cfg.stage2);
  CHECK(full.phases[1].pairs.size() == 2);
  const TrainingPlan no_first = make_stage_plan({s2, s3}, cfg);
  CHECK(no_first.phases.size() == 2);
  CHECK(code_of([&] { make_stage_plan({s1, s3}, cfg); }) == Errc::plan_error);
}

TEST_CASE("toy corpora are well formed and mostly lossless") {
  toy::ToyCorpusConfig tc;
  tc.synthetic = 2000;
  tc.mixed = 2000;
  tc.clean_domain = 500;
  tc.heldout = 200;
  const toy::ToyCorpora c = toy::generate(tc);
  CHECK(c.stage1.pairs.size() == 2000);
  CHECK(c.stage2.pairs.size() == 2000);
  CHECK(c.stage3.pairs.size() == 500);
  CHECK(c.heldout.pairs.size() == 200);
  CHECK(toy::generate(tc).heldout.pairs == c.heldout.pairs);

  const std::vector<ParallelCorpus> all{c.stage1, c.stage2, c.stage3};
  const Vocab v = build_vocab(all, 4);
  CHECK(v.size() <= 200);
  for (const auto& corpus : {c.stage1, c.stage2, c.stage3, c.heldout}) {
    for (const auto& p : corpus.pairs) {
      CHECK_FALSE(p.source.empty());
      CHECK_FALSE(p.target.empty());
    }
    DataOptions o;
    o.oracle.s = 4;
    DataStats st;
    const auto ex = build_examples(corpus.pairs, v, o, &st);
    CHECK(st.kept == corpus.pairs.size());
    for (const auto& e : ex) CHECK_FALSE(check_example(e).has_value());
  }

  const toy::Grammar g;
  const ParallelCorpus sweep = toy::length_sweep(g, 10, 70, 5, 3);
  CHECK(sweep.pairs.size() == 30);
  for (std::size_t i = 0; i < sweep.pairs.size(); ++i) {
    const std::size_t len = split_tokens(sweep.pairs[i].target).size();
    const std::size_t bucket = 10 + 10 * (i / 5);
    CHECK(len >= bucket);
    CHECK(len < bucket + 10);
  }
}

TEST_CASE("example records round-trip through text") {
  const toy::Grammar g;
  const ParallelCorpus c = toy::learner_corpus(g, 50, 1.0, 3, Stage::II);
  const Vocab v = build_vocab(std::vector<ParallelCorpus>{c}, 4);
  DataOptions o;
  o.oracle.s = 4;
  const auto ex = build_examples(c.pairs, v, o);
  std::stringstream buf;
  write_examples(buf, ex);
  const auto back = read_examples(buf, v);
  REQUIRE(back.size() == ex.size());
  for (std::size_t i = 0; i < ex.size(); ++i) {
    CHECK(back[i].source.ids == ex[i].source.ids);
    CHECK(back[i].pi == ex[i].pi);
    CHECK(back[i].dec_input == ex[i].dec_input);
    CHECK(back[i].dec_output == ex[i].dec_output);
    CHECK(back[i].lossy == ex[i].lossy);
  }
  CHECK(format_example(ex[0]).find('\t') != std::string::npos);
  CHECK_THROWS_AS(parse_example("1 2\t0", v), Error);
}
