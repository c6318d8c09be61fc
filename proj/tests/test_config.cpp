#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "crnmt/config.hpp"
#include "crnmt/errors.hpp"

using namespace crnmt;

TEST(RunConfig, PaperPresetValues) {
  RunConfig c;
  EXPECT_EQ(c.get("batch_size"), "128");
  EXPECT_EQ(c.get("lr"), "0.1");
  EXPECT_EQ(c.get("eps"), "1e-06");
  EXPECT_EQ(c.get("rho"), "0.95");
  EXPECT_EQ(c.get("conv_layers"), "3");
  EXPECT_EQ(c.get("embed_dim"), "512");
  EXPECT_EQ(c.get("val_frac"), "0.05");
  EXPECT_EQ(c.get("test_size"), "3900");
  EXPECT_EQ(c.get("position_embedding"), "on");
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, TinyPresetShrinksModel) {
  RunConfig c;
  c.apply_preset("tiny");
  EXPECT_EQ(c.get("preset"), "tiny");
  EXPECT_EQ(c.get("embed_dim"), "32");
  EXPECT_EQ(c.get("test_size"), "0");
  EXPECT_THROW(c.apply_preset("huge"), ConfigError);
}

TEST(RunConfig, SetParsesAndRejects) {
  RunConfig c;
  c.set("conv_layers", "5");
  c.set("position_embedding", "off");
  EXPECT_EQ(c.model_config().conv_layers, 5u);
  EXPECT_FALSE(c.model_config().position_embedding);
  EXPECT_THROW(c.set("no_such_key", "1"), ConfigError);
  EXPECT_THROW(c.set("batch_size", "lots"), ConfigError);
  c.set("conv_layers", "7");
  try {
    c.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("5"), std::string::npos);
  }
}

TEST(RunConfig, EntriesCoverEveryKeyAndDescribeEchoesThem) {
  RunConfig c;
  const auto entries = c.entries();
  EXPECT_EQ(entries.size(), RunConfig::keys().size());
  const std::string text = c.describe();
  for (const auto& [k, v] : entries) EXPECT_NE(text.find(k + " = " + v), std::string::npos) << k;
  RunConfig d;
  for (const auto& [k, v] : entries) d.set(k, v);
  EXPECT_EQ(d.entries(), entries);
}

TEST(ConfigFile, CommentsDashesAndErrors) {
  const auto path = std::filesystem::temp_directory_path() / "crnmt_test.cfg";
  std::ofstream(path) << "# settings\nbatch-size = 32   # inline\n\nlr=0.5\n";
  const auto kv = read_config_file(path);
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"batch_size", "32"}));
  EXPECT_EQ(kv[1], (std::pair<std::string, std::string>{"lr", "0.5"}));
  std::ofstream(path) << "batch_size 32\n";
  EXPECT_THROW(read_config_file(path), ConfigError);
  EXPECT_THROW(read_config_file("/nonexistent/x.cfg"), IoError);
}
