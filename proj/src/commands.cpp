#include "permgec/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

namespace permgec {

using nlohmann::json;

PreparedData prepare_training_data(const RunConfig& cfg, const std::vector<ParallelCorpus>& corpora,
                                   const Vocab* fixed_vocab) {
  const TrainingPlan plan = make_stage_plan(corpora, cfg.plan);
  PreparedData data{fixed_vocab != nullptr ? *fixed_vocab
                                           : build_vocab(corpora, cfg.oracle.s, cfg.vocab_max),
                    {}, {}};
  if (data.vocab.s_count() != cfg.oracle.s) {
    throw Error(Errc::config_error, "vocabulary <ins> count differs from oracle.s");
  }
  DataOptions opts;
  opts.oracle = cfg.oracle;
  opts.drop_lossy = cfg.drop_lossy;
  opts.max_sequence = cfg.model.max_len;
  for (const PlanPhase& ph : plan.phases) {
    DataStats st;
    data.phases.push_back({ph.stage, build_examples(ph.pairs, data.vocab, opts, &st), ph.schedule});
    data.stats.push_back(st);
  }
  return data;
}

Checkpoint train_model(const RunConfig& cfg, const PreparedData& data,
                       const std::function<void(const StepRecord&)>& on_step, const Checkpoint* resume,
                       std::int64_t max_steps) {
  nn::ModelConfig mc = cfg.model;
  mc.vocab_size = static_cast<int>(data.vocab.size());
  Checkpoint ckpt{resume != nullptr ? resume->model : nn::Model(mc, cfg.train.seed), data.vocab, {}, {}, {}};
  if (resume != nullptr && !(resume->model.config() == mc)) {
    throw Error(Errc::config_error, "model settings differ from the checkpoint being resumed");
  }
  Trainer trainer(ckpt.model, cfg.train);
  if (resume != nullptr) trainer.restore(resume->position, resume->optimizer);
  trainer.run(data.phases, on_step, max_steps);
  ckpt.optimizer = trainer.optimizer();
  ckpt.position = trainer.position();
  for (const auto& [k, v] : cfg.resolved()) ckpt.meta["config." + k] = v;
  ckpt.meta["config_hash"] = cfg.hash();
  return ckpt;
}

EvalSummary score_hypotheses(const ParallelCorpus& corpus, const std::vector<std::string>& hyps) {
  if (hyps.size() != corpus.pairs.size()) {
    throw Error(Errc::format_error, "hypothesis count differs from the corpus size");
  }
  EvalSummary s;
  std::vector<Words> src, hyp, ref;
  double gleu_sum = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    src.push_back(split_tokens(corpus.pairs[i].source));
    hyp.push_back(split_tokens(hyps[i]));
    ref.push_back(split_tokens(corpus.pairs[i].target));
    ++s.sentences;
    if (hyp.back() == ref.back()) ++s.exact;
    if (hyp.back() != src.back()) ++s.changed;
    gleu_sum += gleu(hyp.back(), src.back(), std::span<const Words>(&ref.back(), 1));
  }
  s.score = corpus_f_beta(src, hyp, ref);
  s.gleu = s.sentences ? gleu_sum / static_cast<double>(s.sentences) : 0.0;
  return s;
}

EvalSummary evaluate_corpus(const Corrector& corrector, const ParallelCorpus& corpus, int jobs,
                            std::vector<Correction>* out) {
  std::vector<std::string> sources;
  for (const auto& p : corpus.pairs) sources.push_back(p.source);
  std::vector<Correction> results = corrector.correct_all(sources, jobs);
  std::vector<std::string> hyps;
  for (const auto& r : results) hyps.push_back(r.candidates.front().text);
  EvalSummary s = score_hypotheses(corpus, hyps);
  if (out != nullptr) *out = std::move(results);
  return s;
}

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> sets;
  std::string input, output, input_dir, out_dir, checkpoint, resume, hypotheses, export_json;
  std::string grid = "sundae", values, scorer = "simplified", stage;
  std::int64_t max_steps = -1;
  bool no_length_norm = false;
  // Flag overrides applied after the config file.
  std::vector<std::pair<std::string, std::string>> flag_sets;
};

json report_base(const std::string& command, const RunConfig& cfg) {
  return json{{"command", command}, {"config_hash", cfg.hash()}, {"scorer", "simplified"}};
}

json score_json(const EvalSummary& s) {
  return json{{"sentences", s.sentences},
              {"exact", s.exact},
              {"exact_rate", s.exact_rate()},
              {"changed", s.changed},
              {"tp", s.score.tp},
              {"fp", s.score.fp},
              {"fn", s.score.fn},
              {"precision", s.score.precision},
              {"recall", s.score.recall},
              {"f0.5", s.score.f_beta},
              {"gleu", s.gleu}};
}

std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> lines;
  auto consume = [&](std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      lines.push_back(line);
    }
  };
  if (path.empty() || path == "-") {
    consume(std::cin);
  } else {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot read " + path);
    consume(in);
  }
  return lines;
}

/// Training corpora from --input-dir (stage1.tsv, stage2.tsv, stage3.tsv) or
/// the config paths. --stage keeps a single stage.
std::vector<ParallelCorpus> load_corpora(const RunConfig& cfg, const Options& o, std::ostream& out) {
  std::vector<std::pair<Stage, std::string>> sources;
  if (!o.input_dir.empty()) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(o.input_dir)) {
      throw Error(Errc::config_error, "input directory " + o.input_dir + " does not exist");
    }
    for (auto [stage, name] : {std::pair{Stage::I, "stage1.tsv"}, std::pair{Stage::II, "stage2.tsv"},
                               std::pair{Stage::III, "stage3.tsv"}}) {
      const fs::path p = fs::path(o.input_dir) / name;
      if (fs::exists(p)) sources.push_back({stage, p.string()});
    }
  } else {
    if (!cfg.stage1_path.empty()) sources.push_back({Stage::I, cfg.stage1_path});
    if (!cfg.stage2_path.empty()) sources.push_back({Stage::II, cfg.stage2_path});
    if (!cfg.stage3_path.empty()) sources.push_back({Stage::III, cfg.stage3_path});
  }
  if (!o.stage.empty()) {
    const Stage keep = parse_stage(o.stage);
    std::erase_if(sources, [&](const auto& s) { return s.first != keep; });
  }
  if (sources.empty()) throw Error(Errc::config_error, "no training corpora found");
  std::vector<ParallelCorpus> corpora;
  for (const auto& [stage, path] : sources) {
    LoadReport rep;
    corpora.push_back(load_tsv(path, stage, &rep, cfg.max_tokens));
    json j{{"event", "load"},        {"stage", stage_name(stage)},  {"path", path},
           {"accepted", rep.accepted}, {"rejected", rep.rejected.size()}, {"too_long", rep.too_long}};
    out << j.dump() << '\n';
  }
  return corpora;
}

RunConfig resolve_config(const Options& o) {
  RunConfig cfg;
  cfg.train.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (!o.config_path.empty()) load_config(o.config_path, cfg);
  for (const auto& [k, v] : o.flag_sets) cfg.set(k, v);
  for (const auto& s : o.sets) apply_assignments(s, cfg, "--set");
  if (o.no_length_norm) cfg.infer.beam.length_norm = false;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (!o.checkpoint.empty()) cfg.checkpoint_path = o.checkpoint;
  cfg.infer.sundae = cfg.train.loss.sundae;
  cfg.validate();
  return cfg;
}

Corrector make_corrector(const Checkpoint& ckpt, const RunConfig& cfg, int topk) {
  InferenceConfig ic = cfg.infer;
  ic.topk = topk;
  ic.beam.width = std::max(ic.beam.width, topk);
  return Corrector(ckpt.model, ckpt.vocab, ic);
}

ParallelCorpus load_pairs(const std::string& path, const RunConfig& cfg) {
  if (path.empty()) throw Error(Errc::config_error, "--input is required");
  return load_tsv(path, Stage::III, nullptr, cfg.max_tokens);
}

std::vector<double> parse_values(const std::string& text, std::vector<double> fallback) {
  if (text.empty()) return fallback;
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(Errc::config_error, "bad --values entry '" + item + "'");
    }
  }
  return out;
}

int cmd_gen_corpus(const RunConfig& cfg, std::ostream& out) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const toy::ToyCorpora c = toy::generate(cfg.toy);
  const toy::Grammar g;
  const ParallelCorpus lengths = toy::length_sweep(g, 10, 70, 20, cfg.toy.heldout_seed + 1);
  const std::vector<std::pair<std::string, const ParallelCorpus*>> files{
      {"stage1.tsv", &c.stage1}, {"stage2.tsv", &c.stage2}, {"stage3.tsv", &c.stage3},
      {"heldout.tsv", &c.heldout}, {"lengths.tsv", &lengths}};
  for (const auto& [name, corpus] : files) {
    save_tsv(fs::path(cfg.out_dir) / name, *corpus);
    json j = report_base("gen-corpus", cfg);
    j["file"] = (fs::path(cfg.out_dir) / name).string();
    j["pairs"] = corpus->pairs.size();
    out << j.dump() << '\n';
  }
  return 0;
}

int cmd_build_data(const RunConfig& cfg, const Options& o, std::ostream& out) {
  namespace fs = std::filesystem;
  const std::vector<ParallelCorpus> corpora = load_corpora(cfg, o, out);
  const Vocab vocab = build_vocab(corpora, cfg.oracle.s, cfg.vocab_max);
  fs::create_directories(cfg.out_dir);
  vocab.save(fs::path(cfg.out_dir) / "vocab.txt");
  DataOptions opts;
  opts.oracle = cfg.oracle;
  opts.drop_lossy = cfg.drop_lossy;
  opts.max_sequence = cfg.model.max_len;
  for (const ParallelCorpus& c : corpora) {
    DataStats st;
    const std::vector<TrainingExample> ex = build_examples(c.pairs, vocab, opts, &st);
    const fs::path path = fs::path(cfg.out_dir) / ("stage" + std::to_string(static_cast<int>(c.stage)) + ".examples");
    std::ofstream f(path);
    if (!f) throw Error(Errc::io_error, "cannot write " + path.string());
    write_examples(f, ex);
    json j = report_base("build-data", cfg);
    j.update({{"stage", stage_name(c.stage)},
              {"file", path.string()},
              {"pairs", st.pairs},
              {"kept", st.kept},
              {"lossy", st.lossy},
              {"lossy_fraction", st.pairs ? static_cast<double>(st.lossy) / static_cast<double>(st.pairs) : 0.0},
              {"dropped", st.dropped_lossy + st.dropped_long},
              {"vocab_size", vocab.size()}});
    out << j.dump() << '\n';
  }
  return 0;
}

int cmd_train(const RunConfig& cfg, const Options& o, std::ostream& out) {
  namespace fs = std::filesystem;
  std::optional<Checkpoint> resume;
  if (!o.resume.empty()) resume = load_checkpoint(o.resume);
  std::vector<ParallelCorpus> corpora = load_corpora(cfg, o, out);
  if (!o.stage.empty()) {
    // A single-stage run trains that phase alone, so stage II is not required.
    for (auto& c : corpora) c.stage = Stage::II;
  }
  const PreparedData data = prepare_training_data(cfg, corpora, resume ? &resume->vocab : nullptr);
  for (std::size_t i = 0; i < data.phases.size(); ++i) {
    json j = report_base("train", cfg);
    j.update({{"event", "data"},
              {"stage", stage_name(data.phases[i].stage)},
              {"examples", data.stats[i].kept},
              {"lossy", data.stats[i].lossy}});
    out << j.dump() << '\n';
  }
  fs::create_directories(cfg.out_dir);
  const fs::path curve_path = fs::path(cfg.out_dir) / "loss_curve.tsv";
  std::ofstream curve(curve_path, resume ? std::ios::app : std::ios::trunc);
  if (!resume) curve << "stage\tstep\tlr\tloss\tpermutation\tdecoder\tgrad_norm\n";
  std::map<int, std::pair<double, double>> first_last;  // phase -> (first, last)
  std::map<int, Stage> phase_stage;
  std::optional<Checkpoint> latest;
  auto on_step = [&](const StepRecord& r) {
    curve << stage_name(r.stage) << '\t' << r.global_step << '\t' << r.lr << '\t' << r.loss << '\t'
          << r.permutation << '\t' << r.decoder << '\t' << r.grad_norm << '\n';
    auto it = first_last.find(r.phase);
    if (it == first_last.end()) {
      first_last[r.phase] = {r.loss, r.loss};
    } else {
      it->second.second = r.loss;
    }
    phase_stage[r.phase] = r.stage;
  };
  Checkpoint ckpt = train_model(cfg, data, on_step, resume ? &*resume : nullptr, o.max_steps);
  save_checkpoint(cfg.checkpoint_path, ckpt);
  if (!o.export_json.empty()) export_json(o.export_json, ckpt);
  for (const auto& [phase, fl] : first_last) {
    json j = report_base("train", cfg);
    j.update({{"event", "stage"},
              {"stage", stage_name(phase_stage[phase])},
              {"first_loss", fl.first},
              {"last_loss", fl.second}});
    out << j.dump() << '\n';
  }
  json j = report_base("train", cfg);
  j.update({{"event", "done"},
            {"checkpoint", cfg.checkpoint_path},
            {"global_step", ckpt.position.global_step},
            {"mode", mode_name(cfg.train.loss.sundae.mode)},
            {"effective_lambda0", cfg.train.loss.sundae.resolved().lambda0},
            {"effective_steps", cfg.train.loss.sundae.resolved().steps},
            {"parameters", ckpt.model.parameter_count()}});
  out << j.dump() << '\n';
  return 0;
}

int cmd_correct(const RunConfig& cfg, const Options& o, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint_path);
  const Corrector corrector = make_corrector(ckpt, cfg, cfg.infer.topk);
  const std::vector<std::string> lines = read_lines(o.input);
  const std::vector<Correction> results = corrector.correct_all(lines, cfg.train.jobs);
  std::ofstream file;
  if (!o.output.empty()) {
    file.open(o.output);
    if (!file) throw Error(Errc::io_error, "cannot write " + o.output);
  }
  std::ostream& dest = o.output.empty() ? out : file;
  for (const Correction& r : results) {
    if (cfg.infer.topk == 1) {
      dest << r.candidates.front().text << '\n';
      continue;
    }
    for (std::size_t k = 0; k < r.candidates.size(); ++k) {
      dest << k + 1 << '\t' << r.candidates[k].perm_score << '\t' << r.candidates[k].text << '\n';
    }
  }
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const Options& o, std::ostream& out) {
  const ParallelCorpus corpus = load_pairs(o.input.empty() ? cfg.dev_path : o.input, cfg);
  EvalSummary s;
  if (!o.hypotheses.empty()) {
    s = score_hypotheses(corpus, read_lines(o.hypotheses));
  } else {
    const Checkpoint ckpt = load_checkpoint(cfg.checkpoint_path);
    s = evaluate_corpus(make_corrector(ckpt, cfg, 1), corpus, cfg.train.jobs);
  }
  json j = report_base("evaluate", cfg);
  j.update(score_json(s));
  out << j.dump() << '\n';
  return 0;
}

int cmd_ablate(RunConfig cfg, const Options& o, std::ostream& out) {
  const std::string& grid = o.grid;
  auto emit = [&](json row) {
    json j = report_base("ablate", cfg);
    j["grid"] = grid;
    j.update(row);
    out << j.dump() << '\n';
  };
  if (grid == "sundae") {
    const ParallelCorpus dev = load_pairs(o.input.empty() ? cfg.dev_path : o.input, cfg);
    const std::vector<ParallelCorpus> corpora = load_corpora(cfg, o, out);
    const std::vector<double> lambdas = parse_values(o.values, {0.01, 0.25, 0.75});
    for (double l0 : lambdas) {
      RunConfig run = cfg;
      run.train.loss.sundae.mode = DecoderMode::sundae;
      run.train.loss.sundae.lambda0 = l0;
      const PreparedData data = prepare_training_data(run, corpora);
      const Checkpoint ckpt = train_model(run, data);
      for (int steps : {1, 2, 3}) {
        run.infer.sundae = run.train.loss.sundae;
        run.infer.sundae.steps = steps;
        const EvalSummary s = evaluate_corpus(make_corrector(ckpt, run, 1), dev, cfg.train.jobs);
        json row = score_json(s);
        row.update({{"lambda0", l0}, {"steps", steps}});
        emit(row);
      }
    }
    return 0;
  }
  if (grid == "oracle") {
    const std::vector<ParallelCorpus> corpora = load_corpora(cfg, o, out);
    const Vocab vocab = build_vocab(corpora, cfg.oracle.s, cfg.vocab_max);
    for (bool monotone : {false, true}) {
      DataOptions opts;
      opts.oracle = cfg.oracle;
      opts.monotone = monotone;
      std::size_t pairs = 0, lossy = 0, inserts = 0, reorders = 0;
      for (const auto& c : corpora) {
        DataStats st;
        for (const auto& ex : build_examples(c.pairs, vocab, opts, &st)) {
          inserts += static_cast<std::size_t>(ex.pi.insertion_count());
          int last = -1;
          for (int idx : ex.pi.indices()) {
            if (idx >= ex.source.n) continue;
            if (idx < last) ++reorders;
            last = idx;
          }
        }
        pairs += st.pairs;
        lossy += st.lossy;
      }
      emit({{"aligner", monotone ? "monotone" : "spans"},
            {"pairs", pairs},
            {"lossy", lossy},
            {"insertions", inserts},
            {"reorder_points", reorders}});
    }
    return 0;
  }

  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint_path);
  const ParallelCorpus dev = load_pairs(o.input.empty() ? cfg.dev_path : o.input, cfg);
  auto run_row = [&](const RunConfig& run, json tag) {
    const EvalSummary s = evaluate_corpus(make_corrector(ckpt, run, 1), dev, cfg.train.jobs);
    json row = score_json(s);
    row.update(tag);
    emit(row);
  };
  if (grid == "confidence") {
    for (double c : parse_values(o.values, {0.0, 0.1, 0.2, 0.3})) {
      RunConfig run = cfg;
      run.infer.beam.confidence_bias = c;
      run_row(run, {{"confidence_bias", c}});
    }
  } else if (grid == "sinkhorn") {
    for (double s : parse_values(o.values, {0, 1, 3, 10})) {
      RunConfig run = cfg;
      run.infer.sinkhorn_steps = static_cast<int>(s);
      run_row(run, {{"sinkhorn_steps", static_cast<int>(s)}});
    }
  } else if (grid == "beam") {
    for (double w : parse_values(o.values, {1, 2, 4, 8})) {
      RunConfig run = cfg;
      run.infer.beam.width = static_cast<int>(w);
      run_row(run, {{"beam_width", static_cast<int>(w)}});
    }
  } else if (grid == "rescore") {
    const int k = std::max(cfg.infer.topk, 3);
    const Corrector corrector = make_corrector(ckpt, cfg, k);
    std::vector<std::string> sources;
    for (const auto& p : dev.pairs) sources.push_back(p.source);
    const std::vector<Correction> results = corrector.correct_all(sources, cfg.train.jobs);
    auto select_all = [&](SelectMode mode, double lambda) {
      std::vector<std::string> hyps;
      for (std::size_t i = 0; i < results.size(); ++i) {
        std::vector<RankedCandidate> cands;
        for (const auto& c : results[i].candidates) {
          cands.push_back({c.perm_score, c.dec_logp, split_tokens(c.text)});
        }
        const Words src = split_tokens(dev.pairs[i].source);
        const Words ref = split_tokens(dev.pairs[i].target);
        const std::size_t pick = select_hypothesis(cands, mode, lambda, src, std::span<const Words>(&ref, 1));
        hyps.push_back(results[i].candidates[pick].text);
      }
      return score_hypotheses(dev, hyps);
    };
    for (double l : parse_values(o.values, {0.0, 0.25, 0.5, 0.75, 1.0})) {
      json row = score_json(select_all(SelectMode::rescore, l));
      row.update({{"selection", "rescore"}, {"lambda_resc", l}, {"topk", k}});
      emit(row);
    }
    json row = score_json(select_all(SelectMode::gleu_oracle, 1.0));
    row.update({{"selection", "gleu_oracle"}, {"topk", k}});
    emit(row);
  } else {
    throw Error(Errc::config_error, "unknown ablation grid '" + grid + "'");
  }
  return 0;
}

int cmd_bench(const RunConfig& cfg, const Options& o, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint_path);
  std::vector<std::string> sources, targets;
  bool paired = true;
  for (const std::string& line : read_lines(o.input)) {
    const auto tab = line.find('\t');
    sources.push_back(tab == std::string::npos ? line : line.substr(0, tab));
    paired = paired && tab != std::string::npos;
    targets.push_back(tab == std::string::npos ? std::string() : line.substr(tab + 1));
  }
  if (!paired) targets.clear();
  const Corrector corrector = make_corrector(ckpt, cfg, 1);
  const CostReport rep = bench_forward_counts(sources, corrector, cfg.bucket_width, cfg.train.jobs, targets);
  std::size_t max_enc = 0, max_dec = 0;
  for (const auto& s : rep.sentences) {
    max_enc = std::max(max_enc, s.encoder_passes);
    max_dec = std::max(max_dec, s.decoder_passes);
  }
  for (const CostBucket& b : rep.buckets) {
    json j = report_base("bench", cfg);
    j.update({{"bucket", std::to_string(b.lo) + "-" + std::to_string(b.hi - 1)},
              {"sentences", b.sentences},
              {"mean_encoder_passes", b.mean_encoder},
              {"mean_decoder_passes", b.mean_decoder},
              {"max_decoder_passes", b.max_decoder},
              {"mean_beam_steps", b.mean_beam_steps},
              {"mean_ar_passes", b.mean_ar}});
    out << j.dump() << '\n';
  }
  json j = report_base("bench", cfg);
  j.update({{"bucket", "all"},
            {"sentences", rep.sentences.size()},
            {"max_encoder_passes", max_enc},
            {"max_decoder_passes", max_dec},
            {"mode", mode_name(cfg.infer.sundae.mode)},
            {"decoder_steps", cfg.infer.sundae.resolved().steps}});
  out << j.dump() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Permutation-based non-autoregressive grammatical error correction"};
  app.require_subcommand(1);
  Options o;

  // Shortcut flags map onto config keys; they are applied after --config.
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "key=value configuration file");
    sub->add_option("--set", o.sets, "extra key=value override (repeatable)");
    auto flag = [&](const std::string& name, const std::string& key, const std::string& help) {
      sub->add_option_function<std::string>(
          name, [&o, key](const std::string& v) { o.flag_sets.emplace_back(key, v); }, help);
    };
    flag("--seed", "train.seed", "random seed");
    flag("--beam-width", "beam.width", "beam width");
    flag("--confidence-bias", "beam.confidence_bias", "confidence bias c in [0, 1]");
    flag("--lambda0", "sundae.lambda0", "first-pass loss weight");
    flag("--steps", "sundae.steps", "decoder refinement steps");
    flag("--mode", "sundae.mode", "vanilla or sundae");
    flag("--sinkhorn-steps", "beam.sinkhorn_steps", "sinkhorn normalisation steps");
    flag("--topk", "infer.topk", "hypotheses per sentence");
    flag("--jobs", "train.jobs", "worker threads");
    sub->add_option("--stage", o.stage, "restrict to one stage (I, II or III)");
    sub->add_option("--scorer", o.scorer, "edit scorer")->check(CLI::IsMember({"simplified"}));
    sub->add_option("--export-json", o.export_json, "also dump the checkpoint as JSON");
    sub->add_flag("--no-length-norm", o.no_length_norm, "rank beam hypotheses by raw log-probability");
    sub->add_option("--input", o.input, "input file");
    sub->add_option("--output", o.output, "output file");
    sub->add_option("--input-dir", o.input_dir, "directory with stage1.tsv, stage2.tsv, stage3.tsv");
    sub->add_option("--out-dir", o.out_dir, "output directory");
    sub->add_option("--checkpoint", o.checkpoint, "checkpoint path");
  };

  CLI::App* gen = app.add_subcommand("gen-corpus", "write the toy corpora");
  CLI::App* build = app.add_subcommand("build-data", "convert sentence pairs into training examples");
  CLI::App* train = app.add_subcommand("train", "run the staged training schedule");
  CLI::App* correct = app.add_subcommand("correct", "correct sentences");
  CLI::App* evaluate = app.add_subcommand("evaluate", "score corrections against references");
  CLI::App* ablate = app.add_subcommand("ablate", "run an ablation grid");
  CLI::App* bench = app.add_subcommand("bench", "count forward passes per sentence");
  for (CLI::App* sub : {gen, build, train, correct, evaluate, ablate, bench}) add_common(sub);
  train->add_option("--resume", o.resume, "continue from this checkpoint");
  train->add_option("--max-steps", o.max_steps, "stop after this many optimizer steps");
  evaluate->add_option("--hypotheses", o.hypotheses, "score this file instead of running the model");
  ablate->add_option("--grid", o.grid, "sundae, confidence, sinkhorn, beam, rescore or oracle");
  ablate->add_option("--values", o.values, "comma-separated grid values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  }

  try {
    const RunConfig cfg = resolve_config(o);
    if (gen->parsed()) return cmd_gen_corpus(cfg, out);
    if (build->parsed()) return cmd_build_data(cfg, o, out);
    if (train->parsed()) return cmd_train(cfg, o, out);
    if (correct->parsed()) return cmd_correct(cfg, o, out);
    if (evaluate->parsed()) return cmd_evaluate(cfg, o, out);
    if (ablate->parsed()) return cmd_ablate(cfg, o, out);
    if (bench->parsed()) return cmd_bench(cfg, o, out);
  } catch (const Error& e) {
    err << e.what() << '\n';
    return e.code() == Errc::config_error || e.code() == Errc::plan_error ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace permgec
