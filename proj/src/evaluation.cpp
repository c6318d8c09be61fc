#include "crnmt/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "crnmt/errors.hpp"

namespace crnmt {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Tokens& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

BleuReport bleu_corpus(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references) {
  if (hypotheses.size() != references.size()) {
    throw std::invalid_argument("bleu_corpus: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                                std::to_string(references.size()) + " references");
  }
  if (hypotheses.empty()) throw std::invalid_argument("bleu_corpus: empty corpus");
  BleuReport r;
  std::array<std::size_t, 4> ref_totals{};
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    r.hyp_length += hypotheses[s].size();
    r.ref_length += references[s].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto hyp = count_ngrams(hypotheses[s], n);
      const auto ref = count_ngrams(references[s], n);
      for (const auto& [gram, count] : hyp) {
        r.totals[n - 1] += count;
        const auto it = ref.find(gram);
        if (it != ref.end()) r.matches[n - 1] += std::min(count, it->second);
      }
      for (const auto& [gram, count] : ref) ref_totals[n - 1] += count;
    }
  }
  double log_sum = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (r.totals[n] == 0 && ref_totals[n] == 0) {
      // Neither side has n-grams of this order: nothing to compare.
      r.precisions[n] = 1.0;
      continue;
    }
    const double total = static_cast<double>(std::max<std::size_t>(r.totals[n], 1));
    r.precisions[n] = r.matches[n] > 0 ? static_cast<double>(r.matches[n]) / total : 1.0 / (2.0 * total);
    log_sum += std::log(r.precisions[n]);
    ++orders;
  }
  if (r.hyp_length == 0) {
    r.brevity_penalty = 0.0;
  } else if (r.hyp_length >= r.ref_length) {
    r.brevity_penalty = 1.0;
  } else {
    r.brevity_penalty = std::exp(1.0 - static_cast<double>(r.ref_length) / static_cast<double>(r.hyp_length));
  }
  r.bleu = 100.0 * r.brevity_penalty * (orders ? std::exp(log_sum / static_cast<double>(orders)) : 1.0);
  return r;
}

std::string BleuReport::to_text() const {
  std::ostringstream os;
  os << "BLEU = " << fixed(bleu, 2) << "  (corpus BLEU-4, zero precisions floored at 1/(2*count))\n";
  for (std::size_t n = 0; n < 4; ++n) {
    os << "  p" << n + 1 << " = " << fixed(100.0 * precisions[n], 2) << "  (" << matches[n] << "/" << totals[n]
       << ")\n";
  }
  os << "  BP = " << fixed(brevity_penalty, 4) << "  (hyp_len " << hyp_length << ", ref_len " << ref_length << ")\n";
  return os.str();
}

std::string BleuReport::csv_header() { return "p1,p2,p3,p4,bp,bleu"; }

std::string BleuReport::csv_fields() const {
  std::ostringstream os;
  for (std::size_t n = 0; n < 4; ++n) os << fixed(100.0 * precisions[n], 4) << ',';
  os << fixed(brevity_penalty, 6) << ',' << fixed(bleu, 4);
  return os.str();
}

std::vector<Tokens> translate_corpus(const Model& model, const std::vector<std::string>& sources, std::size_t max_len) {
  std::vector<Tokens> tokenized;
  tokenized.reserve(sources.size());
  for (const auto& s : sources) tokenized.push_back(tokenize(s));
  return model.translate(tokenized, max_len);
}

BleuReport evaluate_pairs(const Model& model, const std::vector<SentencePair>& pairs, std::size_t max_len) {
  std::vector<Tokens> sources, references;
  for (const auto& p : pairs) {
    sources.push_back(p.source);
    references.push_back(p.target);
  }
  return bleu_corpus(model.translate(sources, max_len), references);
}

std::vector<AblationRow> ablation_sweep(const std::vector<SentencePair>& corpus, const AblationOptions& options,
                                        const RunConfig& base, const LogFn& log) {
  if (options.depths.empty() || options.position_embedding.empty()) {
    throw std::invalid_argument("ablation_sweep: need at least one depth and one position-embedding setting");
  }
  const PreparedData data = prepare_data(corpus, base, log);
  if (data.split.test.empty()) throw DataError("ablation_sweep: the split left no test pairs");
  const std::vector<std::uint64_t> seeds = options.seeds.empty() ? std::vector<std::uint64_t>{base.train.seed}
                                                                 : options.seeds;
  std::vector<AblationRow> rows;
  for (auto depth : options.depths) {
    for (bool pos : options.position_embedding) {
      for (auto seed : seeds) {
        RunConfig cfg = base;
        cfg.train.conv_layers = depth;
        cfg.train.position_embedding = pos;
        cfg.train.seed = seed;
        if (log) log("ablation run: conv_layers=" + std::to_string(depth) + " position_embedding=" +
                     (pos ? "on" : "off") + " seed=" + std::to_string(seed));
        FitCallbacks callbacks;
        if (log) {
          callbacks.on_epoch = [&log](const EpochRecord& e) {
            log("  epoch " + std::to_string(e.epoch) + "  train_loss " + fixed(e.train_loss, 4) + "  val_loss " +
                fixed(e.val_loss, 4) + (e.improved ? "  *" : ""));
          };
        }
        TrainedModel run = train_model(data, cfg, callbacks);
        AblationRow row;
        row.conv_layers = depth;
        row.position_embedding = pos;
        row.seed = seed;
        row.epochs_run = run.fit.history.size();
        row.best_epoch = run.fit.best_epoch;
        row.val_loss = run.fit.best_loss;
        row.test = evaluate_pairs(run.model, data.split.test, cfg.max_decode_len);
        row.config = cfg.entries();
        if (log) log("  -> val_loss " + fixed(row.val_loss, 4) + ", test BLEU " + fixed(row.test.bleu, 2));
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "# full-scale reference anchors (depth 3): BLEU 30.6 with position embedding, 27.9 without\n";
  os << "depth  pos_emb  seed        epochs  best  val_loss   BLEU    p1     p2     p3     p4     BP\n";
  for (const auto& r : rows) {
    char line[256];
    std::snprintf(line, sizeof line, "%-6zu %-8s %-11llu %-7zu %-5zu %-10.4f %-7.2f %-6.1f %-6.1f %-6.1f %-6.1f %.4f\n",
                  r.conv_layers, r.position_embedding ? "on" : "off", static_cast<unsigned long long>(r.seed),
                  r.epochs_run, r.best_epoch, r.val_loss, r.test.bleu, 100 * r.test.precisions[0],
                  100 * r.test.precisions[1], 100 * r.test.precisions[2], 100 * r.test.precisions[3],
                  r.test.brevity_penalty);
    os << line;
  }
  return os.str();
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  if (rows.empty()) return {};
  for (const auto& [k, v] : rows.front().config) os << csv_escape(k) << ',';
  os << "epochs_run,best_epoch,val_loss," << BleuReport::csv_header() << '\n';
  for (const auto& r : rows) {
    for (const auto& [k, v] : r.config) os << csv_escape(v) << ',';
    os << r.epochs_run << ',' << r.best_epoch << ',' << fixed(r.val_loss, 6) << ',' << r.test.csv_fields() << '\n';
  }
  return os.str();
}

}  // namespace crnmt
