#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "crnmt/config.hpp"
#include "crnmt/corpus.hpp"
#include "crnmt/evaluation.hpp"
#include "crnmt/pipeline.hpp"
#include "synthetic_corpus.hpp"

using namespace crnmt;

namespace {

Tokens t(const char* s) { return tokenize(s); }

}  // namespace

TEST(Bleu, IdentityIsHundred) {
  const std::vector<Tokens> h{t("the cat sat on the mat ."), t("a b"), t("x")};
  const auto r = bleu_corpus(h, h);
  EXPECT_EQ(r.bleu, 100.0);
  EXPECT_EQ(r.brevity_penalty, 1.0);
}

TEST(Bleu, ClippedUnigramPrecisionByHand) {
  const auto r = bleu_corpus({t("the the the")}, {t("the cat")});
  EXPECT_EQ(r.matches[0], 1u);
  EXPECT_EQ(r.totals[0], 3u);
  EXPECT_DOUBLE_EQ(r.precisions[0], 1.0 / 3.0);
  // zero bigram and trigram matches are floored at 1 / (2 * count)
  EXPECT_DOUBLE_EQ(r.precisions[1], 1.0 / 4.0);
  EXPECT_DOUBLE_EQ(r.precisions[2], 1.0 / 2.0);
  EXPECT_EQ(r.brevity_penalty, 1.0);
  const double expected = 100.0 * std::exp((std::log(1.0 / 3.0) + std::log(0.25) + std::log(0.5)) / 3.0);
  EXPECT_NEAR(r.bleu, expected, 1e-12);
}

TEST(Bleu, BrevityPenaltyForShortHypotheses) {
  const auto r = bleu_corpus({t("a b c d")}, {t("a b c d e f g h")});
  EXPECT_NEAR(r.brevity_penalty, std::exp(1.0 - 8.0 / 4.0), 1e-15);
  EXPECT_NEAR(r.bleu, 100.0 * r.brevity_penalty, 1e-12);
}

TEST(Bleu, DisjointIsSmallButFinite) {
  const auto r = bleu_corpus({t("q r s t u")}, {t("a b c d e")});
  EXPECT_NEAR(r.bleu, 100.0 * std::pow(1.0 / (10.0 * 8.0 * 6.0 * 4.0), 0.25), 1e-12);
  Tokens hyp, ref;
  for (int i = 0; i < 60; ++i) {
    hyp.push_back("h" + std::to_string(i));
    ref.push_back("r" + std::to_string(i));
  }
  const auto longer = bleu_corpus({hyp}, {ref});
  EXPECT_TRUE(std::isfinite(longer.bleu));
  EXPECT_GT(longer.bleu, 0.0);
  EXPECT_LT(longer.bleu, 1.0);
  EXPECT_EQ(bleu_corpus({Tokens{}}, {t("a b")}).bleu, 0.0);
}

TEST(Bleu, CorruptionNeverIncreasesScore) {
  std::vector<Tokens> refs{t("the quick brown fox jumps over the lazy dog"), t("we like green tea very much")};
  std::vector<Tokens> hyps = refs;
  double previous = bleu_corpus(hyps, refs).bleu;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    for (std::size_t i = 0; i < hyps[s].size(); ++i) {
      hyps[s][i] = "zzz" + std::to_string(i);
      const double now = bleu_corpus(hyps, refs).bleu;
      EXPECT_LE(now, previous + 1e-12);
      previous = now;
    }
  }
}

TEST(Bleu, RejectsMismatchedCounts) { EXPECT_ANY_THROW(bleu_corpus({t("a")}, {})); }

TEST(Bleu, ReportFormats) {
  const auto r = bleu_corpus({t("a b c d")}, {t("a b c d")});
  EXPECT_EQ(BleuReport::csv_header(), "p1,p2,p3,p4,bp,bleu");
  EXPECT_NE(r.to_text().find("BLEU = 100.00"), std::string::npos);
  EXPECT_NE(r.csv_fields().find("100"), std::string::npos);
}

TEST(Ablation, TenRowsAndReproducible) {
  std::vector<SentencePair> corpus;
  for (const auto& p : crnmt::testing::synthetic_pairs(120, 3)) corpus.push_back({tokenize(p.german), tokenize(p.english)});
  RunConfig cfg;
  cfg.apply_preset("tiny");
  cfg.set("embed_dim", "8");
  cfg.set("enc_hidden", "6");
  cfg.set("dec_hidden", "8");
  cfg.set("attn_dim", "8");
  cfg.set("tgt_embed_dim", "8");
  cfg.set("epochs", "1");
  cfg.set("train_frac", "0.8");
  cfg.set("val_frac", "0.1");
  AblationOptions opts;
  const auto rows = ablation_sweep(corpus, opts, cfg);
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[0].conv_layers, 1u);
  EXPECT_TRUE(rows[0].position_embedding);
  EXPECT_FALSE(rows[1].position_embedding);
  EXPECT_EQ(rows[9].conv_layers, 5u);

  AblationOptions one;
  one.depths = {3};
  one.position_embedding = {true};
  const auto again = ablation_sweep(corpus, one, cfg);
  ASSERT_EQ(again.size(), 1u);
  EXPECT_EQ(again[0].val_loss, rows[4].val_loss);
  EXPECT_EQ(again[0].test.bleu, rows[4].test.bleu);

  const std::string table = format_ablation_table(rows);
  EXPECT_NE(table.find("30.6"), std::string::npos);
  EXPECT_NE(table.find("27.9"), std::string::npos);
  const std::string csv = ablation_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
  EXPECT_NE(csv.find("p1,p2,p3,p4,bp,bleu"), std::string::npos);
}
