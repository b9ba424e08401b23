#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "permgec/core.hpp"
#include "permgec/model.hpp"
#include "permgec/optimizer.hpp"
#include "permgec/trainer.hpp"

namespace permgec {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nn::Model model;
  Vocab vocab;
  nn::OptimizerState optimizer;
  TrainerPosition position;
  /// Free-form key=value metadata (resolved config, config hash).
  std::map<std::string, std::string> meta;
};

/// Binary container: magic, version, a text header (model config, vocab,
/// trainer position, metadata), then every tensor as name, rows, cols and
/// little-endian f64 values: model parameters in declaration order followed
/// by the optimizer moments.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Debug dump of the same content as JSON.
void export_json(const std::filesystem::path& path, const Checkpoint& ckpt);

}  // namespace permgec
