// Exercises the shared library through its C header only.
#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "crnmt/crnmt.h"

namespace fs = std::filesystem;

namespace {

const fs::path kToy = fs::path(CRNMT_TEST_DATA_DIR) / "toy32.tsv";

std::string take(char* s) {
  std::string out = s ? s : "";
  crnmt_string_free(s);
  return out;
}

struct Config {
  crnmt_config* ptr = nullptr;
  Config() { EXPECT_EQ(crnmt_config_create(&ptr), CRNMT_OK); }
  ~Config() { crnmt_config_destroy(ptr); }
};

// One short training run shared by the model tests.
const fs::path& trained_checkpoint() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "crnmt_capi_model";
    fs::remove_all(d);
    Config c;
    crnmt_config_apply_preset(c.ptr, "tiny");
    crnmt_config_set(c.ptr, "epochs", "3");
    if (crnmt_train(c.ptr, kToy.c_str(), d.c_str(), nullptr, nullptr) != CRNMT_OK) {
      ADD_FAILURE() << crnmt_last_error();
    }
    return d;
  }();
  return dir;
}

}  // namespace

TEST(CApi, VersionAndConfigRoundTrip) {
  EXPECT_STREQ(crnmt_version(), "1.0.0");
  Config c;
  char* v = nullptr;
  ASSERT_EQ(crnmt_config_get(c.ptr, "batch_size", &v), CRNMT_OK);
  EXPECT_EQ(take(v), "128");
  ASSERT_EQ(crnmt_config_set(c.ptr, "batch_size", "64"), CRNMT_OK);
  ASSERT_EQ(crnmt_config_get(c.ptr, "batch_size", &v), CRNMT_OK);
  EXPECT_EQ(take(v), "64");
  ASSERT_EQ(crnmt_config_describe(c.ptr, &v), CRNMT_OK);
  EXPECT_NE(take(v).find("batch_size = 64"), std::string::npos);
}

TEST(CApi, ErrorsMapToStatusCodes) {
  Config c;
  EXPECT_EQ(crnmt_config_set(c.ptr, "bogus", "1"), CRNMT_ERR_USAGE);
  EXPECT_NE(std::string(crnmt_last_error()).find("bogus"), std::string::npos);
  EXPECT_EQ(crnmt_config_apply_preset(c.ptr, "enormous"), CRNMT_ERR_USAGE);
  ASSERT_EQ(crnmt_config_set(c.ptr, "conv_layers", "7"), CRNMT_OK);
  EXPECT_EQ(crnmt_config_validate(c.ptr), CRNMT_ERR_USAGE);
  EXPECT_EQ(crnmt_config_set(nullptr, "seed", "1"), CRNMT_ERR_USAGE);

  crnmt_model* m = nullptr;
  EXPECT_EQ(crnmt_model_load("/nonexistent/checkpoint", &m), CRNMT_ERR_DATA);
  EXPECT_EQ(m, nullptr);
  Config ok;
  EXPECT_EQ(crnmt_train(ok.ptr, "/nonexistent/data.tsv", "/tmp/crnmt_never", nullptr, nullptr), CRNMT_ERR_DATA);
}

TEST(CApi, BleuOracle) {
  const char* hyp[] = {"the the the"};
  const char* ref[] = {"the cat"};
  crnmt_bleu_report r{};
  ASSERT_EQ(crnmt_bleu(hyp, ref, 1, &r), CRNMT_OK);
  EXPECT_DOUBLE_EQ(r.precisions[0], 1.0 / 3.0);
  ASSERT_EQ(crnmt_bleu(ref, ref, 1, &r), CRNMT_OK);
  EXPECT_EQ(r.bleu, 100.0);
  char* text = nullptr;
  ASSERT_EQ(crnmt_bleu_report_format(&r, &text), CRNMT_OK);
  EXPECT_NE(take(text).find("100.00"), std::string::npos);
}

TEST(CApi, TrainLoadTranslateEvaluate) {
  const auto& dir = trained_checkpoint();
  ASSERT_TRUE(fs::exists(dir / "manifest"));
  crnmt_model* m = nullptr;
  ASSERT_EQ(crnmt_model_load(dir.c_str(), &m), CRNMT_OK) << crnmt_last_error();

  const char* src[] = {"Ich bin müde.", "", "Wo ist der Bahnhof?"};
  char** out = nullptr;
  ASSERT_EQ(crnmt_translate(m, src, 3, 5, &out), CRNMT_OK) << crnmt_last_error();
  EXPECT_EQ(std::string(out[1]), "");
  for (int i = 0; i < 3; ++i) {
    std::size_t words = 0;
    for (const char* p = out[i]; *p; ++p) words += *p == ' ';
    EXPECT_LE(words, 4u);
  }
  crnmt_lines_free(out, 3);

  crnmt_bleu_report r{};
  ASSERT_EQ(crnmt_evaluate(m, kToy.c_str(), 0, 0, &r), CRNMT_OK) << crnmt_last_error();
  EXPECT_GE(r.bleu, 0.0);
  EXPECT_LE(r.bleu, 100.0);
  char* header = nullptr;
  char* row = nullptr;
  ASSERT_EQ(crnmt_bleu_report_csv(m, &r, &header, &row), CRNMT_OK);
  const std::string h = take(header);
  EXPECT_NE(h.find("conv_layers"), std::string::npos);
  EXPECT_NE(h.rfind("p1,p2,p3,p4,bp,bleu"), std::string::npos);
  EXPECT_FALSE(take(row).empty());
  EXPECT_EQ(crnmt_evaluate(m, "/nonexistent.tsv", 0, 0, &r), CRNMT_ERR_DATA);
  crnmt_model_destroy(m);
}
