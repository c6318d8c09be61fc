#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crnmt/checkpoint.hpp"
#include "crnmt/model.hpp"
#include "tiny_model.hpp"

using namespace crnmt;
using namespace crnmt::testing;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("crnmt_ckpt_" + name);
  fs::remove_all(dir);
  return dir;
}

RunConfig tiny_run_config() {
  RunConfig c;
  c.apply_preset("tiny");
  c.set("embed_dim", "8");
  c.set("enc_hidden", "6");
  c.set("dec_hidden", "8");
  c.set("attn_dim", "8");
  c.set("tgt_embed_dim", "8");
  c.set("max_positions", "8");
  c.set("conv_layers", "2");
  return c;
}

Model model_for(const RunConfig& c) {
  ModelConfig mc = c.model_config();
  return Model(mc, word_vocab(20), word_vocab(20), 77);
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Checkpoint, ManifestLayout) {
  const RunConfig cfg = tiny_run_config();
  Model model = model_for(cfg);
  const auto dir = fresh_dir("layout");
  save_checkpoint(model, {cfg, 4, 1.25}, dir);
  const auto lines = lines_of(dir / "manifest");
  ASSERT_GE(lines.size(), 3u);
  EXPECT_EQ(lines[0], "magic\tcrnmt-checkpoint");
  EXPECT_EQ(lines[1], "format_version\t1");

  const auto params = model.parameters();
  const auto entries = read_manifest_entries(dir);
  ASSERT_EQ(entries.size(), params.size());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_EQ(entries[i].name, params[i].name);
    EXPECT_EQ(entries[i].dtype, "f32");
    EXPECT_EQ(entries[i].shape, params[i].tensor.shape());
    EXPECT_EQ(entries[i].offset, offset);
    offset += 4 * params[i].tensor.numel();
  }
  EXPECT_EQ(fs::file_size(dir / "params.bin"), offset);

  // spot-check the raw bytes of one array against float32 little-endian encoding
  std::ifstream bin(dir / "params.bin", std::ios::binary);
  const auto& last = params.back();
  bin.seekg(static_cast<std::streamoff>(entries.back().offset));
  for (std::size_t k = 0; k < last.tensor.numel(); ++k) {
    unsigned char b[4];
    bin.read(reinterpret_cast<char*>(b), 4);
    const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    EXPECT_EQ(f, static_cast<float>(last.tensor.data()[k]));
  }

  const auto src_lines = lines_of(dir / "vocab.src");
  EXPECT_EQ(src_lines, model.src_vocab().tokens());
  bool has_vocab_src = false, has_epoch = false;
  for (const auto& l : lines) {
    has_vocab_src |= l == "vocab_src\tvocab.src";
    has_epoch |= l == "epoch\t4";
  }
  EXPECT_TRUE(has_vocab_src);
  EXPECT_TRUE(has_epoch);
}

TEST(Checkpoint, RoundTripParametersConfigAndTranslations) {
  const RunConfig cfg = tiny_run_config();
  Model model = model_for(cfg);
  const auto dir = fresh_dir("roundtrip");
  save_checkpoint(model, {cfg, 2, 0.5}, dir);
  LoadedCheckpoint loaded = load_checkpoint(dir);
  EXPECT_EQ(loaded.info.epoch, 2u);
  EXPECT_EQ(loaded.info.best_val_loss, 0.5);
  EXPECT_EQ(loaded.info.config.entries(), cfg.entries());
  const auto a = model.parameters(), b = loaded.model.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].tensor.numel(); ++k) {
      EXPECT_EQ(static_cast<double>(static_cast<float>(a[i].tensor.data()[k])), b[i].tensor.data()[k]);
    }
  }
  // a second save of the loaded model is byte-identical
  const auto dir2 = fresh_dir("roundtrip2");
  save_checkpoint(loaded.model, loaded.info, dir2);
  std::ifstream p1(dir / "params.bin", std::ios::binary), p2(dir2 / "params.bin", std::ios::binary);
  std::stringstream s1, s2;
  s1 << p1.rdbuf();
  s2 << p2.rdbuf();
  EXPECT_EQ(s1.str(), s2.str());

  Rng rng(3);
  std::vector<Tokens> sources;
  for (int i = 0; i < 8; ++i) sources.push_back(random_sentence(rng, 1 + rng.below(6), 20));
  EXPECT_EQ(model.translate(sources, 10), loaded.model.translate(sources, 10));
}

TEST(Checkpoint, CorruptionIsReportedNotCrashed) {
  const RunConfig cfg = tiny_run_config();
  Model model = model_for(cfg);
  const auto dir = fresh_dir("corrupt");
  save_checkpoint(model, {cfg, 1, 1.0}, dir);

  const auto size = fs::file_size(dir / "params.bin");
  fs::resize_file(dir / "params.bin", size - 7);
  EXPECT_THROW(load_checkpoint(dir), CheckpointError);
  save_checkpoint(model, {cfg, 1, 1.0}, dir);

  auto lines = lines_of(dir / "manifest");
  auto rewrite = [&](std::size_t at, const std::string& text) {
    auto copy = lines;
    copy[at] = text;
    std::ofstream out(dir / "manifest");
    for (const auto& l : copy) out << l << '\n';
  };
  rewrite(0, "magic\tsomething-else");
  EXPECT_THROW(load_checkpoint(dir), CheckpointError);
  rewrite(1, "format_version\t99");
  try {
    load_checkpoint(dir);
    FAIL() << "expected version error";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("99"), std::string::npos);
  }
  rewrite(lines.size() - 1, "bogus line");
  EXPECT_THROW(load_checkpoint(dir), CheckpointError);
  EXPECT_THROW(load_checkpoint(fresh_dir("missing")), DataError);
}
