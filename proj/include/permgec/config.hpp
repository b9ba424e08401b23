#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "permgec/corpus.hpp"
#include "permgec/model.hpp"
#include "permgec/pipeline.hpp"
#include "permgec/toy_grammar.hpp"
#include "permgec/trainer.hpp"

namespace permgec {

/// Every knob of every module. Loaded from a key=value file ('#' starts a
/// comment), then overridden by command-line flags.
struct RunConfig {
  // data
  OracleConfig oracle;  // oracle.s doubles as the <ins> count of the vocabulary
  bool drop_lossy = false;
  std::size_t max_tokens = 70;
  std::size_t vocab_max = 0;
  // model and training
  nn::ModelConfig model;
  TrainConfig train;
  PlanConfig plan;
  // inference
  InferenceConfig infer;
  double lambda_resc = 1.0;
  int bucket_width = 10;
  // toy corpus
  toy::ToyCorpusConfig toy;
  // paths
  std::string stage1_path, stage2_path, stage3_path, dev_path;
  std::string checkpoint_path = "model.ckpt";
  std::string out_dir = ".";

  /// Applies one assignment; throws Errc::config_error for unknown keys or
  /// unparsable values.
  void set(const std::string& key, const std::string& value);
  /// Sorted key=value lines of the whole configuration.
  std::map<std::string, std::string> resolved() const;
  /// FNV-1a over the resolved lines, path.* and train.jobs excluded.
  std::string hash() const;
  /// Cross-field checks.
  void validate() const;

  static std::vector<std::string> keys();
};

/// Reads `path` into `cfg`.
void load_config(const std::filesystem::path& path, RunConfig& cfg);
void apply_assignments(std::string_view text, RunConfig& cfg, const std::string& origin);

}  // namespace permgec
