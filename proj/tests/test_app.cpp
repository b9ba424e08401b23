#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "permgec/checkpoint.hpp"
#include "permgec/commands.hpp"
#include "permgec/config.hpp"

using namespace permgec;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("permgec_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& leaf) const { return path / leaf; }
};

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

struct Run {
  int code;
  std::string out, err;
  std::vector<json> records() const {
    std::vector<json> rows;
    std::istringstream in(out);
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line.front() == '{') rows.push_back(json::parse(line));
    }
    return rows;
  }
  std::vector<std::string> lines() const {
    std::vector<std::string> rows;
    std::istringstream in(out);
    for (std::string line; std::getline(in, line);) rows.push_back(line);
    return rows;
  }
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "permgec");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const char* kTinyConfig = R"(# small and quick
oracle.s = 2
model.d_model = 16
model.heads = 2
model.enc_layers = 1
model.dec_layers = 1
model.dropout = 0
train.batch_size = 8
train.jobs = 1
toy.synthetic = 160
toy.mixed = 160
toy.clean_domain = 80
toy.heldout = 20
stage1.epochs = 1
stage1.warmup = 5
stage2.epochs = 1
stage2.warmup = 5
stage3.epochs = 2
stage3.lr = 1e-3
)";

}  // namespace

TEST_CASE("config files, overrides and validation") {
  RunConfig cfg;
  apply_assignments("oracle.s = 3  # comment\nbeam.width=6\n\n", cfg, "inline");
  CHECK(cfg.oracle.s == 3);
  CHECK(cfg.infer.beam.width == 6);
  CHECK_THROWS_AS(apply_assignments("nope.key = 1", cfg, "inline"), Error);
  CHECK_THROWS_AS(apply_assignments("beam.width = wide", cfg, "inline"), Error);
  CHECK_THROWS_AS(apply_assignments("just words", cfg, "inline"), Error);
  RunConfig other = cfg;
  CHECK(other.hash() == cfg.hash());
  other.checkpoint_path = "elsewhere.ckpt";
  CHECK(other.hash() == cfg.hash());
  other.infer.beam.confidence_bias = 0.3;
  CHECK(other.hash() != cfg.hash());
  CHECK(cfg.hash().size() == 16);
  other.infer.beam.confidence_bias = 1.5;
  CHECK_THROWS_AS(other.validate(), Error);
  for (const std::string& key : RunConfig::keys()) {
    RunConfig copy = cfg;
    CHECK_NOTHROW(copy.set(key, cfg.resolved().at(key)));
    CHECK(copy.hash() == cfg.hash());
  }
}

TEST_CASE("checkpoints round-trip and resumed training continues identically") {
  TempDir dir("ckpt");
  RunConfig cfg;
  apply_assignments(kTinyConfig, cfg, "tiny");
  cfg.validate();
  const toy::ToyCorpora c = toy::generate(cfg.toy);
  const PreparedData data = prepare_training_data(cfg, {c.stage1, c.stage2, c.stage3});
  CHECK(data.phases.size() == 3);

  std::vector<double> straight;
  train_model(cfg, data, [&](const StepRecord& r) { straight.push_back(r.loss); }, nullptr, 6);
  REQUIRE(straight.size() == 6);

  const Checkpoint first = train_model(cfg, data, {}, nullptr, 5);
  save_checkpoint(dir / "m.ckpt", first);
  const Checkpoint loaded = load_checkpoint(dir / "m.ckpt");
  CHECK(loaded.position == first.position);
  CHECK(loaded.optimizer.step == first.optimizer.step);
  CHECK(loaded.vocab.tokens() == first.vocab.tokens());
  CHECK(loaded.model.config() == first.model.config());
  for (std::size_t i = 0; i < first.model.params().size(); ++i) {
    CHECK(loaded.model.params()[i].value == first.model.params()[i].value);
    CHECK(loaded.optimizer.m[i] == first.optimizer.m[i]);
    CHECK(loaded.optimizer.v[i] == first.optimizer.v[i]);
  }
  CHECK(loaded.meta.at("config_hash") == cfg.hash());

  std::vector<double> resumed;
  train_model(cfg, data, [&](const StepRecord& r) { resumed.push_back(r.loss); }, &loaded, 1);
  REQUIRE(resumed.size() == 1);
  CHECK(resumed[0] == straight[5]);

  export_json(dir / "m.json", loaded);
  std::ifstream in(dir / "m.json");
  const json j = json::parse(in);
  CHECK(j.contains("tensors"));

  write(dir / "garbage.ckpt", "not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint(dir / "garbage.ckpt"), Error);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), Error);
}

TEST_CASE("command line exit codes") {
  TempDir dir("exit");
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"correct", "--bogus"}).code == 2);
  CHECK(cli({"train", "--mode", "greedy"}).code == 2);
  CHECK(cli({"train", "--scorer", "m2"}).code == 2);
  CHECK(cli({"train", "--config", (dir / "absent.cfg").string()}).code == 2);
  write(dir / "bad.cfg", "unknown.key = 1\n");
  CHECK(cli({"train", "--config", (dir / "bad.cfg").string()}).code == 2);
  fs::create_directories(dir / "empty");
  CHECK(cli({"build-data", "--input-dir", (dir / "empty").string()}).code == 2);
  CHECK(cli({"build-data", "--input-dir", (dir / "missing").string()}).code == 2);
  // Stage I only: the plan has no mandatory stage II.
  fs::create_directories(dir / "only1");
  write(dir / "only1" / "stage1.tsv", "a b\ta c\n");
  CHECK(cli({"train", "--input-dir", (dir / "only1").string(), "--out-dir", (dir / "o").string()}).code == 2);
  const Run missing = cli({"correct", "--checkpoint", (dir / "none.ckpt").string(), "--input", (dir / "x").string()});
  CHECK(missing.code == 1);
  CHECK_FALSE(missing.err.empty());
}

TEST_CASE("build-data reproduces the short example record and counts lossy pairs") {
  TempDir dir("build");
  fs::create_directories(dir / "in");
  write(dir / "in" / "stage2.tsv", "I be busy\tI am busy\n");
  write(dir / "s1.cfg", "oracle.s = 1\n");
  const Run r = cli({"build-data", "--config", (dir / "s1.cfg").string(), "--input-dir", (dir / "in").string(),
                     "--out-dir", (dir / "out").string()});
  REQUIRE(r.code == 0);
  const Vocab v = Vocab::load(dir / "out" / "vocab.txt");
  std::ifstream in(dir / "out" / "stage2.examples");
  std::string line;
  std::getline(in, line);
  const TrainingExample ex = parse_example(line, v);
  CHECK(std::vector<int>(ex.pi.indices().begin(), ex.pi.indices().end()) == std::vector<int>{0, 1, 5, 3, 4});
  std::string dec_in, dec_out;
  for (TokenId t : ex.dec_input) dec_in += v.token(t) + " ";
  for (TokenId t : ex.dec_output) dec_out += v.token(t) + " ";
  CHECK(dec_in == "<s> i <msk> <msk> <msk> busy </s> ");
  CHECK(dec_out == "<s> i am <pad> <pad> busy </s> ");

  // Five pairs, two of them lossy with one insertion slot: a four-token gap
  // and a pair that needs two insertions.
  write(dir / "in" / "stage2.tsv",
        "a b c\ta b c\n"
        "i be busy\ti am busy\n"
        "i busy\ti am we were us busy\n"
        "i busy tv\ti am busy on tv\n"
        "a b\tb a\n");
  const Run five = cli({"build-data", "--config", (dir / "s1.cfg").string(), "--input-dir",
                        (dir / "in").string(), "--out-dir", (dir / "out").string()});
  REQUIRE(five.code == 0);
  const auto rows = five.records();
  const json& stats = rows.back();
  CHECK(stats.at("pairs") == 5);
  CHECK(stats.at("lossy") == 2);
  CHECK(stats.at("config_hash").get<std::string>().size() == 16);
}

TEST_CASE("end to end on a tiny toy corpus") {
  TempDir dir("e2e");
  write(dir / "tiny.cfg", kTinyConfig);
  const std::string cfg = (dir / "tiny.cfg").string();
  const std::string data = (dir / "data").string();
  REQUIRE(cli({"gen-corpus", "--config", cfg, "--out-dir", data}).code == 0);
  for (const char* f : {"stage1.tsv", "stage2.tsv", "stage3.tsv", "heldout.tsv", "lengths.tsv"}) {
    CHECK(fs::exists(dir / "data" / f));
  }

  const std::string ckpt = (dir / "m.ckpt").string();
  const Run train = cli({"train", "--config", cfg, "--input-dir", data, "--out-dir", (dir / "run").string(),
                         "--checkpoint", ckpt, "--export-json", (dir / "m.json").string()});
  REQUIRE(train.code == 0);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(dir / "m.json"));
  CHECK(fs::exists(dir / "run" / "loss_curve.tsv"));
  double stage1_first = 0, stage3_last = 0;
  for (const json& row : train.records()) {
    if (row.value("event", "") != "stage") continue;
    if (row.at("stage") == "I") stage1_first = row.at("first_loss");
    if (row.at("stage") == "III") stage3_last = row.at("last_loss");
  }
  CHECK(stage3_last < stage1_first);
  for (const json& row : train.records()) {
    if (row.contains("command")) CHECK(row.contains("config_hash"));
  }

  const Run vanilla = cli({"train", "--config", cfg, "--mode", "vanilla", "--input-dir", data, "--out-dir",
                           (dir / "van").string(), "--checkpoint", (dir / "v.ckpt").string()});
  REQUIRE(vanilla.code == 0);
  CHECK(vanilla.records().back().at("effective_lambda0") == 1.0);
  CHECK(vanilla.records().back().at("effective_steps") == 1);

  write(dir / "in.txt", "i be busy\nthey runs to the store\n");
  const Run top3 = cli({"correct", "--config", cfg, "--checkpoint", ckpt, "--input", (dir / "in.txt").string(),
                        "--topk", "3"});
  REQUIRE(top3.code == 0);
  const auto lines = top3.lines();
  REQUIRE(lines.size() == 6);
  CHECK(lines[0].rfind("1\t", 0) == 0);
  CHECK(lines[1].rfind("2\t", 0) == 0);
  CHECK(lines[2].rfind("3\t", 0) == 0);

  const Run keep = cli({"correct", "--config", cfg, "--checkpoint", ckpt, "--input", (dir / "in.txt").string(),
                        "--confidence-bias", "1"});
  REQUIRE(keep.code == 0);
  CHECK(keep.lines() == std::vector<std::string>{"i be busy", "they runs to the store"});

  // Identity hypotheses score zero recall.
  std::ifstream held(dir / "data" / "heldout.tsv");
  std::ofstream hyp(dir / "identity.txt");
  for (std::string line; std::getline(held, line);) hyp << line.substr(0, line.find('\t')) << '\n';
  hyp.close();
  const Run ev = cli({"evaluate", "--config", cfg, "--input", data + "/heldout.tsv", "--hypotheses",
                      (dir / "identity.txt").string(), "--scorer", "simplified"});
  REQUIRE(ev.code == 0);
  const json score = ev.records().back();
  CHECK(score.at("recall") == 0.0);
  CHECK(score.at("scorer") == "simplified");

  const Run model_eval = cli({"evaluate", "--config", cfg, "--checkpoint", ckpt, "--input", data + "/heldout.tsv"});
  REQUIRE(model_eval.code == 0);
  CHECK(model_eval.records().back().at("sentences") == 20);

  const Run bench = cli({"bench", "--config", cfg, "--checkpoint", ckpt, "--input", data + "/lengths.tsv"});
  REQUIRE(bench.code == 0);
  const auto brows = bench.records();
  CHECK(brows.back().at("max_encoder_passes") == 1);
  CHECK(brows.back().at("max_decoder_passes") <= 2);
  double prev_ar = 0;
  for (std::size_t i = 0; i + 1 < brows.size(); ++i) {
    const double ar = brows[i].at("mean_ar_passes");
    CHECK(ar > prev_ar);
    prev_ar = ar;
  }

  const Run sink = cli({"ablate", "--grid", "sinkhorn", "--config", cfg, "--checkpoint", ckpt, "--input",
                        data + "/heldout.tsv", "--values", "0,3"});
  REQUIRE(sink.code == 0);
  CHECK(sink.records().size() == 2);
  const Run direct = cli({"evaluate", "--config", cfg, "--checkpoint", ckpt, "--input", data + "/heldout.tsv",
                          "--sinkhorn-steps", "5"});
  CHECK(direct.code == 0);

  const Run grid = cli({"ablate", "--grid", "sundae", "--config", cfg, "--input-dir", data, "--input",
                        data + "/heldout.tsv", "--set", "stage1.epochs=0", "--set", "stage3.epochs=0"});
  REQUIRE(grid.code == 0);
  std::size_t rows = 0;
  for (const json& row : grid.records()) {
    if (row.value("grid", "") == "sundae") ++rows;
  }
  CHECK(rows == 9);

  const Run oracle_grid = cli({"ablate", "--grid", "oracle", "--config", cfg, "--input-dir", data});
  REQUIRE(oracle_grid.code == 0);
  const Run unknown = cli({"ablate", "--grid", "nonsense", "--config", cfg, "--checkpoint", ckpt, "--input",
                           data + "/heldout.tsv"});
  CHECK(unknown.code == 2);
}
