#include "crnmt/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "crnmt/errors.hpp"

namespace crnmt {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("invalid value '" + std::string(v) + "' for " + std::string(key) + ": expected a non-negative integer");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  const std::string s(v);
  try {
    std::size_t used = 0;
    const double out = std::stod(s, &used);
    if (used == s.size()) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError("invalid value '" + s + "' for " + std::string(key) + ": expected a number");
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid value '" + std::string(v) + "' for " + std::string(key) + ": expected on/off");
}

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Shortest form that round-trips, for readable echoes.
  for (int prec = 1; prec <= 17; ++prec) {
    char tmp[32];
    std::snprintf(tmp, sizeof tmp, "%.*g", prec, v);
    if (std::stod(tmp) == v) return tmp;
  }
  return buf;
}

struct Field {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Get>
Field size_field(const char* key, Get member) {
  return Field{[key, member](RunConfig& c, std::string_view v) { member(c) = parse_size(key, v); },
               [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Field real_field(const char* key, Get member) {
  return Field{[key, member](RunConfig& c, std::string_view v) { member(c) = parse_real(key, v); },
               [member](const RunConfig& c) { return fmt_real(member(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Field bool_field(const char* key, Get member) {
  return Field{[key, member](RunConfig& c, std::string_view v) { member(c) = parse_bool(key, v); },
               [member](const RunConfig& c) { return std::string(member(const_cast<RunConfig&>(c)) ? "on" : "off"); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> f;
    f.emplace_back("preset", Field{[](RunConfig& c, std::string_view v) { c.apply_preset(v); },
                                   [](const RunConfig& c) { return c.preset; }});
    f.emplace_back("seed", Field{[](RunConfig& c, std::string_view v) { c.train.seed = parse_size("seed", v); },
                                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    f.emplace_back("batch_size", size_field("batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; }));
    f.emplace_back("lr", real_field("lr", [](RunConfig& c) -> double& { return c.train.adadelta_lr; }));
    f.emplace_back("rho", real_field("rho", [](RunConfig& c) -> double& { return c.train.adadelta_rho; }));
    f.emplace_back("eps", real_field("eps", [](RunConfig& c) -> double& { return c.train.adadelta_eps; }));
    f.emplace_back("grad_clip", real_field("grad_clip", [](RunConfig& c) -> double& { return c.train.grad_clip_norm; }));
    f.emplace_back("epochs", size_field("epochs", [](RunConfig& c) -> std::size_t& { return c.train.epochs; }));
    f.emplace_back("patience", size_field("patience", [](RunConfig& c) -> std::size_t& { return c.train.patience; }));
    f.emplace_back("conv_layers", size_field("conv_layers", [](RunConfig& c) -> std::size_t& { return c.train.conv_layers; }));
    f.emplace_back("position_embedding",
                   bool_field("position_embedding", [](RunConfig& c) -> bool& { return c.train.position_embedding; }));
    f.emplace_back("conv_width", size_field("conv_width", [](RunConfig& c) -> std::size_t& { return c.model.conv_width; }));
    f.emplace_back("embed_dim", size_field("embed_dim", [](RunConfig& c) -> std::size_t& { return c.model.embed_dim; }));
    f.emplace_back("enc_hidden", size_field("enc_hidden", [](RunConfig& c) -> std::size_t& { return c.model.enc_hidden; }));
    f.emplace_back("dec_hidden", size_field("dec_hidden", [](RunConfig& c) -> std::size_t& { return c.model.dec_hidden; }));
    f.emplace_back("attn_dim", size_field("attn_dim", [](RunConfig& c) -> std::size_t& { return c.model.attn_dim; }));
    f.emplace_back("tgt_embed_dim",
                   size_field("tgt_embed_dim", [](RunConfig& c) -> std::size_t& { return c.model.tgt_embed_dim; }));
    f.emplace_back("max_positions",
                   size_field("max_positions", [](RunConfig& c) -> std::size_t& { return c.model.max_positions; }));
    f.emplace_back("init_range", real_field("init_range", [](RunConfig& c) -> double& { return c.model.init_range; }));
    f.emplace_back("layer_norm_eps",
                   real_field("layer_norm_eps", [](RunConfig& c) -> double& { return c.model.layer_norm_eps; }));
    f.emplace_back("src_vocab_size",
                   size_field("src_vocab_size", [](RunConfig& c) -> std::size_t& { return c.src_vocab_size; }));
    f.emplace_back("tgt_vocab_size",
                   size_field("tgt_vocab_size", [](RunConfig& c) -> std::size_t& { return c.tgt_vocab_size; }));
    f.emplace_back("min_freq", size_field("min_freq", [](RunConfig& c) -> std::size_t& { return c.min_freq; }));
    f.emplace_back("max_sentence_len",
                   size_field("max_sentence_len", [](RunConfig& c) -> std::size_t& { return c.max_sentence_len; }));
    f.emplace_back("train_frac", real_field("train_frac", [](RunConfig& c) -> double& { return c.train_frac; }));
    f.emplace_back("val_frac", real_field("val_frac", [](RunConfig& c) -> double& { return c.train.val_frac; }));
    f.emplace_back("test_size", size_field("test_size", [](RunConfig& c) -> std::size_t& { return c.test_size; }));
    f.emplace_back("swap_columns", bool_field("swap_columns", [](RunConfig& c) -> bool& { return c.swap_columns; }));
    f.emplace_back("max_decode_len",
                   size_field("max_decode_len", [](RunConfig& c) -> std::size_t& { return c.max_decode_len; }));
    return f;
  }();
  return table;
}

const Field& field(std::string_view key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

}  // namespace

void RunConfig::apply_preset(std::string_view name) {
  RunConfig fresh;
  if (name == "paper") {
    fresh.preset = "paper";
  } else if (name == "tiny") {
    fresh.preset = "tiny";
    fresh.model.embed_dim = 32;
    fresh.model.enc_hidden = 32;
    fresh.model.dec_hidden = 64;
    fresh.model.attn_dim = 32;
    fresh.model.tgt_embed_dim = 32;
    fresh.model.max_positions = 32;
    fresh.max_sentence_len = 20;
    fresh.min_freq = 1;
    fresh.test_size = 0;
    fresh.train.batch_size = 8;
    fresh.train.adadelta_lr = 1.0;
    fresh.train.epochs = 300;
    fresh.max_decode_len = 30;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected paper or tiny)");
  }
  *this = fresh;
}

void RunConfig::set(std::string_view key, std::string_view value) { field(key).set(*this, trim(value)); }

std::string RunConfig::get(std::string_view key) const { return field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : fields()) out.push_back(name);
    return out;
  }();
  return k;
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, f] : fields()) out.emplace_back(name, f.get(*this));
  return out;
}

std::string RunConfig::describe() const {
  std::ostringstream os;
  for (const auto& [k, v] : entries()) os << k << " = " << v << '\n';
  return os.str();
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m = model;
  m.conv_layers = train.conv_layers;
  m.position_embedding = train.position_embedding;
  return m;
}

void RunConfig::validate() const {
  train.validate();
  ModelConfig m = model_config();
  m.src_vocab = m.tgt_vocab = 1;
  m.validate();
  if (src_vocab_size < 5 || tgt_vocab_size < 5) throw ConfigError("vocabulary sizes must be at least 5");
  if (min_freq == 0) throw ConfigError("min_freq must be positive");
  if (max_sentence_len == 0) throw ConfigError("max_sentence_len must be positive");
  if (max_sentence_len > model.max_positions) {
    throw ConfigError("max_sentence_len " + std::to_string(max_sentence_len) + " exceeds max_positions " +
                      std::to_string(model.max_positions));
  }
  if (!(train_frac > 0.0 && train_frac <= 1.0) || train_frac + train.val_frac > 1.0 + 1e-12) {
    throw ConfigError("train_frac must lie in (0, 1] and train_frac + val_frac must not exceed 1");
  }
  if (max_decode_len == 0) throw ConfigError("max_decode_len must be positive");
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path.string() + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    out.emplace_back(key, trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

}  // namespace crnmt
