#include "crnmt/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace crnmt {

namespace fs = std::filesystem;

namespace {

constexpr const char* kMagic = "crnmt-checkpoint";

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string dims_to_string(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(shape[i]);
  }
  return out;
}

std::size_t parse_count(const std::string& s, const std::string& what) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw CheckpointError("manifest: malformed " + what + " '" + s + "'");
  }
  return std::stoull(s);
}

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

void write_vocab(const Vocabulary& vocab, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& t : vocab.tokens()) out << t << '\n';
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

Vocabulary read_vocab(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("missing vocabulary file '" + path.string() + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  try {
    return Vocabulary(std::move(tokens));
  } catch (const FormatError& e) {
    throw CheckpointError("corrupt vocabulary '" + path.string() + "': " + e.what());
  }
}

struct Manifest {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<ManifestEntry> entries;
};

Manifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("no checkpoint manifest at '" + path.string() + "'");
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  std::size_t expected_offset = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (lineno == 1 && (fields.size() != 2 || fields[0] != "magic" || fields[1] != kMagic)) {
      throw CheckpointError("'" + path.string() + "' is not a checkpoint manifest (wrong magic)");
    }
    if (fields.size() == 2) {
      m.header.emplace_back(fields[0], fields[1]);
    } else if (fields.size() == 4) {
      ManifestEntry e;
      e.name = fields[0];
      e.dtype = fields[1];
      if (e.dtype != "f32") throw CheckpointError("manifest line " + std::to_string(lineno) + ": unsupported dtype " + e.dtype);
      for (const auto& d : split(fields[2], ',')) e.shape.push_back(parse_count(d, "dimension"));
      e.offset = parse_count(fields[3], "offset");
      if (e.offset != expected_offset) {
        throw CheckpointError("manifest line " + std::to_string(lineno) + ": offset " + std::to_string(e.offset) +
                              " for " + e.name + ", expected " + std::to_string(expected_offset));
      }
      expected_offset += shape_numel(e.shape) * sizeof(float);
      m.entries.push_back(std::move(e));
    } else {
      throw CheckpointError("manifest line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                            " fields");
    }
  }
  if (lineno == 0) throw CheckpointError("empty checkpoint manifest '" + path.string() + "'");
  return m;
}

}  // namespace

void save_checkpoint(const Model& model, const CheckpointInfo& info, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory '" + dir.string() + "': " + ec.message());

  const auto params = model.parameters();
  std::ostringstream manifest;
  manifest << "magic\t" << kMagic << '\n';
  manifest << "format_version\t" << kCheckpointFormatVersion << '\n';
  for (const auto& [k, v] : info.config.entries()) manifest << "config." << k << '\t' << v << '\n';
  manifest << "vocab_src\tvocab.src\n";
  manifest << "vocab_tgt\tvocab.tgt\n";
  manifest << "epoch\t" << info.epoch << '\n';
  manifest << "best_val_loss\t" << format_real(info.best_val_loss) << '\n';

  std::ofstream bin(dir / "params.bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw IoError("cannot write '" + (dir / "params.bin").string() + "'");
  std::size_t offset = 0;
  for (const auto& p : params) {
    manifest << p.name << "\tf32\t" << dims_to_string(p.tensor.shape()) << '\t' << offset << '\n';
    std::vector<std::uint32_t> words;
    words.reserve(p.tensor.numel());
    for (double v : p.tensor.data()) words.push_back(to_le(std::bit_cast<std::uint32_t>(static_cast<float>(v))));
    bin.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
    offset += words.size() * 4;
  }
  bin.close();
  if (!bin) throw IoError("error writing '" + (dir / "params.bin").string() + "'");

  write_vocab(model.src_vocab(), dir / "vocab.src");
  write_vocab(model.tgt_vocab(), dir / "vocab.tgt");

  std::ofstream out(dir / "manifest", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + (dir / "manifest").string() + "'");
  out << manifest.str();
  if (!out) throw IoError("error writing manifest in '" + dir.string() + "'");
}

std::vector<ManifestEntry> read_manifest_entries(const fs::path& dir) { return read_manifest(dir).entries; }

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  const Manifest m = read_manifest(dir);
  std::map<std::string, std::string> header(m.header.begin(), m.header.end());
  const auto version = header.find("format_version");
  if (version == header.end()) throw CheckpointError("manifest lacks format_version");
  if (version->second != std::to_string(kCheckpointFormatVersion)) {
    throw CheckpointError("checkpoint format version " + version->second + " is not supported (expected " +
                          std::to_string(kCheckpointFormatVersion) + ")");
  }

  CheckpointInfo info;
  try {
    for (const auto& [k, v] : m.header) {
      if (k.rfind("config.", 0) == 0) info.config.set(k.substr(7), v);
    }
    if (header.contains("epoch")) info.epoch = std::stoull(header.at("epoch"));
    if (header.contains("best_val_loss")) info.best_val_loss = std::stod(header.at("best_val_loss"));
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupt manifest header: ") + e.what());
  }

  const std::string src_name = header.contains("vocab_src") ? header.at("vocab_src") : "vocab.src";
  const std::string tgt_name = header.contains("vocab_tgt") ? header.at("vocab_tgt") : "vocab.tgt";
  Vocabulary src = read_vocab(dir / src_name);
  Vocabulary tgt = read_vocab(dir / tgt_name);

  Model model(info.config.model_config(), std::move(src), std::move(tgt), 0);
  auto params = model.parameters();
  if (params.size() != m.entries.size()) {
    throw CheckpointError("checkpoint lists " + std::to_string(m.entries.size()) + " arrays, model expects " +
                          std::to_string(params.size()));
  }

  const fs::path bin_path = dir / "params.bin";
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw CheckpointError("missing '" + bin_path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  std::size_t expected = 0;
  for (const auto& e : m.entries) expected += shape_numel(e.shape) * 4;
  if (bytes.size() != expected) {
    throw CheckpointError("params.bin holds " + std::to_string(bytes.size()) + " bytes, manifest describes " +
                          std::to_string(expected));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = m.entries[i];
    auto& t = params[i].tensor;
    if (e.name != params[i].name || e.shape != t.shape()) {
      throw CheckpointError("manifest entry " + e.name + " " + to_string(e.shape) + " does not match model array " +
                            params[i].name + " " + to_string(t.shape()));
    }
    auto dst = t.mutable_data();
    for (std::size_t k = 0; k < dst.size(); ++k) {
      std::uint32_t w;
      std::memcpy(&w, bytes.data() + e.offset + 4 * k, 4);
      dst[k] = static_cast<double>(std::bit_cast<float>(to_le(w)));
    }
  }
  return LoadedCheckpoint{std::move(model), std::move(info), m.entries};
}

}  // namespace crnmt
