#include "permgec/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace permgec {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O writes host doubles as little-endian");

constexpr char kMagic[8] = {'P', 'G', 'E', 'C', 'K', 'P', 'T', '\0'};

std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw Error(Errc::format_error, "bad number '" + s + "' in checkpoint header");
  }
  return v;
}

long long parse_int(const std::string& s) {
  long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw Error(Errc::format_error, "bad integer '" + s + "' in checkpoint header");
  }
  return v;
}

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error(Errc::format_error, "truncated checkpoint");
  return v;
}

void put_tensor(std::ostream& out, const std::string& name, const nn::Mat& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

void get_tensor(std::istream& in, const std::string& expected, nn::Mat& m) {
  const auto len = get<std::uint32_t>(in);
  if (len > 4096) throw Error(Errc::format_error, "implausible tensor name length");
  std::string name(len, '\0');
  in.read(name.data(), len);
  const auto rows = get<std::uint64_t>(in);
  const auto cols = get<std::uint64_t>(in);
  if (name != expected) {
    throw Error(Errc::format_error, "expected tensor '" + expected + "', found '" + name + "'");
  }
  if (rows != static_cast<std::uint64_t>(m.rows()) || cols != static_cast<std::uint64_t>(m.cols())) {
    throw Error(Errc::format_error, "shape mismatch for tensor '" + name + "'");
  }
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw Error(Errc::format_error, "truncated tensor '" + name + "'");
}

std::string header_text(const Checkpoint& c) {
  const nn::ModelConfig& mc = c.model.config();
  std::ostringstream h;
  h << "model.vocab_size=" << mc.vocab_size << '\n'
    << "model.d_model=" << mc.d_model << '\n'
    << "model.heads=" << mc.heads << '\n'
    << "model.enc_layers=" << mc.enc_layers << '\n'
    << "model.dec_layers=" << mc.dec_layers << '\n'
    << "model.max_len=" << mc.max_len << '\n'
    << "model.ffn_mult=" << mc.ffn_mult << '\n'
    << "model.dropout=" << fmt_double(mc.dropout) << '\n'
    << "model.init_std=" << fmt_double(mc.init_std) << '\n'
    << "model.sinusoidal_positions=" << (mc.sinusoidal_positions ? 1 : 0) << '\n'
    << "vocab.s_count=" << c.vocab.s_count() << '\n'
    << "vocab.tokens=";
  const auto& toks = c.vocab.tokens();
  for (std::size_t i = 5 + static_cast<std::size_t>(c.vocab.s_count()); i < toks.size(); ++i) {
    h << toks[i] << (i + 1 < toks.size() ? " " : "");
  }
  h << '\n'
    << "trainer.phase=" << c.position.phase << '\n'
    << "trainer.epoch=" << c.position.epoch << '\n'
    << "trainer.batch=" << c.position.batch << '\n'
    << "trainer.phase_step=" << c.position.phase_step << '\n'
    << "trainer.global_step=" << c.position.global_step << '\n'
    << "optimizer.step=" << c.optimizer.step << '\n';
  for (const auto& [k, v] : c.meta) h << "meta." << k << '=' << v << '\n';
  return h.str();
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto& params = ckpt.model.params();
  if (ckpt.optimizer.m.size() != params.size() || ckpt.optimizer.v.size() != params.size()) {
    throw Error(Errc::format_error, "optimizer moments do not match the model");
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot write " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    const std::string header = header_text(ckpt);
    put<std::uint64_t>(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    put<std::uint64_t>(out, params.size() * 3);
    for (const auto& p : params) put_tensor(out, p.name, p.value);
    for (std::size_t i = 0; i < params.size(); ++i) put_tensor(out, "m." + params[i].name, ckpt.optimizer.m[i]);
    for (std::size_t i = 0; i < params.size(); ++i) put_tensor(out, "v." + params[i].name, ckpt.optimizer.v[i]);
    if (!out) throw Error(Errc::io_error, "write failure on " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot read checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw Error(Errc::format_error, path.string() + " is not a checkpoint");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error(Errc::format_error, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(in);
  if (header_len > (1u << 26)) throw Error(Errc::format_error, "implausible header length");
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw Error(Errc::format_error, "truncated checkpoint header");

  std::map<std::string, std::string> kv;
  std::istringstream hs(header);
  std::string line;
  while (std::getline(hs, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::format_error, "bad header line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(Errc::format_error, "checkpoint header lacks " + key);
    return it->second;
  };

  nn::ModelConfig mc;
  mc.vocab_size = static_cast<int>(parse_int(need("model.vocab_size")));
  mc.d_model = static_cast<int>(parse_int(need("model.d_model")));
  mc.heads = static_cast<int>(parse_int(need("model.heads")));
  mc.enc_layers = static_cast<int>(parse_int(need("model.enc_layers")));
  mc.dec_layers = static_cast<int>(parse_int(need("model.dec_layers")));
  mc.max_len = static_cast<int>(parse_int(need("model.max_len")));
  mc.ffn_mult = static_cast<int>(parse_int(need("model.ffn_mult")));
  mc.dropout = parse_double(need("model.dropout"));
  mc.init_std = parse_double(need("model.init_std"));
  mc.sinusoidal_positions = parse_int(need("model.sinusoidal_positions")) != 0;

  std::vector<std::string> ordinary;
  std::istringstream ts(need("vocab.tokens"));
  for (std::string t; ts >> t;) ordinary.push_back(t);

  Checkpoint c{nn::Model::zeros(mc), Vocab(ordinary, static_cast<int>(parse_int(need("vocab.s_count")))),
               {}, {}, {}};
  if (static_cast<int>(c.vocab.size()) != mc.vocab_size) {
    throw Error(Errc::format_error, "vocabulary size disagrees with the model config");
  }
  c.position.phase = static_cast<int>(parse_int(need("trainer.phase")));
  c.position.epoch = static_cast<int>(parse_int(need("trainer.epoch")));
  c.position.batch = static_cast<std::size_t>(parse_int(need("trainer.batch")));
  c.position.phase_step = parse_int(need("trainer.phase_step"));
  c.position.global_step = parse_int(need("trainer.global_step"));
  c.optimizer = nn::OptimizerState::for_model(c.model);
  c.optimizer.step = parse_int(need("optimizer.step"));
  for (const auto& [k, v] : kv) {
    if (k.starts_with("meta.")) c.meta[k.substr(5)] = v;
  }

  auto& params = c.model.params();
  const auto count = get<std::uint64_t>(in);
  if (count != params.size() * 3) throw Error(Errc::format_error, "unexpected tensor count");
  for (auto& p : params) get_tensor(in, p.name, p.value);
  for (std::size_t i = 0; i < params.size(); ++i) get_tensor(in, "m." + params[i].name, c.optimizer.m[i]);
  for (std::size_t i = 0; i < params.size(); ++i) get_tensor(in, "v." + params[i].name, c.optimizer.v[i]);
  return c;
}

void export_json(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  const nn::ModelConfig& mc = ckpt.model.config();
  j["model"] = {{"vocab_size", mc.vocab_size}, {"d_model", mc.d_model}, {"heads", mc.heads},
                {"enc_layers", mc.enc_layers}, {"dec_layers", mc.dec_layers},
                {"max_len", mc.max_len},       {"ffn_mult", mc.ffn_mult},
                {"dropout", mc.dropout},       {"init_std", mc.init_std},
                {"sinusoidal_positions", mc.sinusoidal_positions}};
  j["vocab"] = ckpt.vocab.tokens();
  j["trainer"] = {{"phase", ckpt.position.phase},
                  {"epoch", ckpt.position.epoch},
                  {"batch", ckpt.position.batch},
                  {"phase_step", ckpt.position.phase_step},
                  {"global_step", ckpt.position.global_step},
                  {"optimizer_step", ckpt.optimizer.step}};
  j["meta"] = ckpt.meta;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : ckpt.model.params()) {
    tensors.push_back({{"name", p.name},
                       {"rows", p.value.rows()},
                       {"cols", p.value.cols()},
                       {"data", std::vector<double>(p.value.data(), p.value.data() + p.value.size())}});
  }
  j["tensors"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace permgec
