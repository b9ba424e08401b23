#include "permgec/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace permgec {
namespace {

// Seeds (uint64) and counts (size_t) share the size_t overloads.
static_assert(std::is_same_v<std::uint64_t, std::size_t>);

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(Errc::config_error, "invalid value '" + value + "' for " + key);
}

template <class T>
void parse_number(T& out, const std::string& v, const std::string& key) {
  T parsed{};
  const auto r = std::from_chars(v.data(), v.data() + v.size(), parsed);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v);
  out = parsed;
}

void parse_into(int& out, const std::string& v, const std::string& key) { parse_number(out, v, key); }
void parse_into(double& out, const std::string& v, const std::string& key) { parse_number(out, v, key); }
void parse_into(std::size_t& out, const std::string& v, const std::string& key) { parse_number(out, v, key); }
void parse_into(bool& out, const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") {
    out = true;
  } else if (v == "false" || v == "0" || v == "no") {
    out = false;
  } else {
    bad_value(key, v);
  }
}
void parse_into(std::string& out, const std::string& v, const std::string&) { out = v; }
void parse_into(DecoderMode& out, const std::string& v, const std::string& key) {
  try {
    out = parse_mode(v);
  } catch (const Error&) {
    bad_value(key, v);
  }
}

std::string show(int v) { return std::to_string(v); }
std::string show(std::size_t v) { return std::to_string(v); }
std::string show(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
std::string show(bool v) { return v ? "true" : "false"; }
std::string show(const std::string& v) { return v; }
std::string show(DecoderMode m) { return std::string(mode_name(m)); }

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define PG_FIELD(KEY, MEMBER)                                                         \
  Field {                                                                             \
    KEY, [](RunConfig& c, const std::string& v) { parse_into(c.MEMBER, v, KEY); },   \
        [](const RunConfig& c) { return show(c.MEMBER); }                             \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      PG_FIELD("oracle.s", oracle.s),
      PG_FIELD("oracle.max_len", oracle.max_len),
      PG_FIELD("oracle.strict_rank", oracle.strict_rank),
      PG_FIELD("data.drop_lossy", drop_lossy),
      PG_FIELD("data.max_tokens", max_tokens),
      PG_FIELD("data.vocab_max", vocab_max),
      PG_FIELD("model.d_model", model.d_model),
      PG_FIELD("model.heads", model.heads),
      PG_FIELD("model.enc_layers", model.enc_layers),
      PG_FIELD("model.dec_layers", model.dec_layers),
      PG_FIELD("model.max_len", model.max_len),
      PG_FIELD("model.ffn_mult", model.ffn_mult),
      PG_FIELD("model.dropout", model.dropout),
      PG_FIELD("model.init_std", model.init_std),
      PG_FIELD("model.sinusoidal_positions", model.sinusoidal_positions),
      PG_FIELD("loss.lambda_per", train.loss.lambda_per),
      PG_FIELD("sundae.mode", train.loss.sundae.mode),
      PG_FIELD("sundae.lambda0", train.loss.sundae.lambda0),
      PG_FIELD("sundae.steps", train.loss.sundae.steps),
      PG_FIELD("sundae.temperature", train.loss.sundae.temperature),
      PG_FIELD("train.batch_size", train.batch_size),
      PG_FIELD("train.clip_norm", train.clip_norm),
      PG_FIELD("train.seed", train.seed),
      PG_FIELD("train.jobs", train.jobs),
      PG_FIELD("adam.beta1", train.adam.beta1),
      PG_FIELD("adam.beta2", train.adam.beta2),
      PG_FIELD("adam.eps", train.adam.eps),
      PG_FIELD("adam.weight_decay", train.adam.weight_decay),
      PG_FIELD("stage1.epochs", plan.stage1.epochs),
      PG_FIELD("stage1.lr", plan.stage1.lr),
      PG_FIELD("stage1.warmup", plan.stage1.warmup_steps),
      PG_FIELD("stage2.epochs", plan.stage2.epochs),
      PG_FIELD("stage2.lr", plan.stage2.lr),
      PG_FIELD("stage2.warmup", plan.stage2.warmup_steps),
      PG_FIELD("stage3.epochs", plan.stage3.epochs),
      PG_FIELD("stage3.lr", plan.stage3.lr),
      PG_FIELD("stage3.warmup", plan.stage3.warmup_steps),
      PG_FIELD("beam.width", infer.beam.width),
      PG_FIELD("beam.confidence_bias", infer.beam.confidence_bias),
      PG_FIELD("beam.length_norm", infer.beam.length_norm),
      PG_FIELD("beam.sinkhorn_steps", infer.sinkhorn_steps),
      PG_FIELD("infer.topk", infer.topk),
      PG_FIELD("infer.lambda_resc", lambda_resc),
      PG_FIELD("bench.bucket_width", bucket_width),
      PG_FIELD("toy.synthetic", toy.synthetic),
      PG_FIELD("toy.mixed", toy.mixed),
      PG_FIELD("toy.clean_domain", toy.clean_domain),
      PG_FIELD("toy.heldout", toy.heldout),
      PG_FIELD("toy.errorful_fraction", toy.errorful_fraction),
      PG_FIELD("toy.seed", toy.seed),
      PG_FIELD("toy.heldout_seed", toy.heldout_seed),
      PG_FIELD("path.stage1", stage1_path),
      PG_FIELD("path.stage2", stage2_path),
      PG_FIELD("path.stage3", stage3_path),
      PG_FIELD("path.dev", dev_path),
      PG_FIELD("path.checkpoint", checkpoint_path),
      PG_FIELD("path.out_dir", out_dir),
  };
  return table;
}

#undef PG_FIELD

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw Error(Errc::config_error, "unknown config key '" + key + "'");
}

std::map<std::string, std::string> RunConfig::resolved() const {
  std::map<std::string, std::string> out;
  for (const Field& f : fields()) out[f.key] = f.get(*this);
  return out;
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : resolved()) {
    // File locations and thread counts do not change results.
    if (k.rfind("path.", 0) == 0 || k == "train.jobs") continue;
    for (unsigned char ch : k + '=' + v + '\n') {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void RunConfig::validate() const {
  if (oracle.s < 0) throw Error(Errc::config_error, "oracle.s must be >= 0");
  if (oracle.max_len < 1) throw Error(Errc::config_error, "oracle.max_len must be >= 1");
  nn::ModelConfig probe = model;
  probe.vocab_size = std::max(model.vocab_size, 1);
  probe.validate();
  train.loss.sundae.validate();
  if (train.loss.lambda_per < 0.0) throw Error(Errc::config_error, "loss.lambda_per must be >= 0");
  if (train.batch_size < 1) throw Error(Errc::config_error, "train.batch_size must be >= 1");
  if (train.jobs < 1) throw Error(Errc::config_error, "train.jobs must be >= 1");
  if (!(train.adam.beta1 >= 0.0 && train.adam.beta1 < 1.0) ||
      !(train.adam.beta2 >= 0.0 && train.adam.beta2 < 1.0) || !(train.adam.eps > 0.0)) {
    throw Error(Errc::config_error, "adam hyperparameters out of range");
  }
  for (const StageSchedule* s : {&plan.stage1, &plan.stage2, &plan.stage3}) {
    if (s->epochs < 0 || !(s->lr >= 0.0) || s->warmup_steps < 0) {
      throw Error(Errc::config_error, "stage schedule values must be non-negative");
    }
  }
  if (infer.beam.width < 1) throw Error(Errc::config_error, "beam.width must be >= 1");
  if (!(infer.beam.confidence_bias >= 0.0 && infer.beam.confidence_bias <= 1.0)) {
    throw Error(Errc::config_error, "beam.confidence_bias outside [0, 1]");
  }
  if (infer.sinkhorn_steps < 0) throw Error(Errc::config_error, "beam.sinkhorn_steps must be >= 0");
  if (infer.topk < 1) throw Error(Errc::config_error, "infer.topk must be >= 1");
  if (!(lambda_resc >= 0.0 && lambda_resc <= 1.0)) {
    throw Error(Errc::config_error, "infer.lambda_resc outside [0, 1]");
  }
  if (bucket_width < 1) throw Error(Errc::config_error, "bench.bucket_width must be >= 1");
  if (!(toy.errorful_fraction >= 0.0 && toy.errorful_fraction <= 1.0)) {
    throw Error(Errc::config_error, "toy.errorful_fraction outside [0, 1]");
  }
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.emplace_back(f.key);
  return out;
}

void apply_assignments(std::string_view text, RunConfig& cfg, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::config_error, origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    try {
      cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(Errc::config_error, origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void load_config(const std::filesystem::path& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config_error, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  apply_assignments(buf.str(), cfg, path.string());
}

}  // namespace permgec
