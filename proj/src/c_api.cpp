#include "crnmt/crnmt.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "crnmt/checkpoint.hpp"
#include "crnmt/config.hpp"
#include "crnmt/corpus.hpp"
#include "crnmt/errors.hpp"
#include "crnmt/evaluation.hpp"
#include "crnmt/pipeline.hpp"

struct crnmt_config {
  crnmt::RunConfig value;
};

struct crnmt_model {
  crnmt::LoadedCheckpoint checkpoint;
};

namespace {

thread_local std::string g_last_error;

crnmt_status fail(crnmt_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename Body>
crnmt_status guarded(Body&& body) {
  try {
    body();
    g_last_error.clear();
    return CRNMT_OK;
  } catch (const crnmt::ConfigError& e) {
    return fail(CRNMT_ERR_USAGE, e.what());
  } catch (const crnmt::DataError& e) {
    return fail(CRNMT_ERR_DATA, e.what());
  } catch (const std::length_error& e) {
    return fail(CRNMT_ERR_DATA, e.what());
  } catch (const crnmt::NumericalError& e) {
    return fail(CRNMT_ERR_NUMERIC, e.what());
  } catch (const std::bad_alloc&) {
    return fail(CRNMT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CRNMT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(CRNMT_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw crnmt::ConfigError(std::string(what) + " must not be null");
}

crnmt::LogFn make_log(crnmt_log_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](const std::string& msg) { fn(msg.c_str(), user); };
}

void fill_report(const crnmt::BleuReport& r, crnmt_bleu_report* out) {
  out->bleu = r.bleu;
  for (std::size_t n = 0; n < 4; ++n) {
    out->precisions[n] = r.precisions[n];
    out->matches[n] = r.matches[n];
    out->totals[n] = r.totals[n];
  }
  out->brevity_penalty = r.brevity_penalty;
  out->hyp_length = r.hyp_length;
  out->ref_length = r.ref_length;
}

crnmt::BleuReport to_report(const crnmt_bleu_report* in) {
  crnmt::BleuReport r;
  r.bleu = in->bleu;
  for (std::size_t n = 0; n < 4; ++n) {
    r.precisions[n] = in->precisions[n];
    r.matches[n] = in->matches[n];
    r.totals[n] = in->totals[n];
  }
  r.brevity_penalty = in->brevity_penalty;
  r.hyp_length = in->hyp_length;
  r.ref_length = in->ref_length;
  return r;
}

}  // namespace

extern "C" {

const char* crnmt_version(void) { return "1.0.0"; }

const char* crnmt_last_error(void) { return g_last_error.c_str(); }

void crnmt_string_free(char* s) { std::free(s); }

crnmt_status crnmt_config_create(crnmt_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new crnmt_config{};
  });
}

void crnmt_config_destroy(crnmt_config* config) { delete config; }

crnmt_status crnmt_config_apply_preset(crnmt_config* config, const char* name) {
  return guarded([&] {
    require(config, "config");
    require(name, "name");
    config->value.apply_preset(name);
  });
}

crnmt_status crnmt_config_set(crnmt_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->value.set(key, value);
  });
}

crnmt_status crnmt_config_get(const crnmt_config* config, const char* key, char** out) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(out, "out");
    *out = dup_string(config->value.get(key));
  });
}

crnmt_status crnmt_config_load_file(crnmt_config* config, const char* path, int ignore_preset) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    const auto entries = crnmt::read_config_file(path);
    if (!ignore_preset) {
      for (const auto& [k, v] : entries) {
        if (k == "preset") config->value.apply_preset(v);
      }
    }
    for (const auto& [k, v] : entries) {
      if (k != "preset") config->value.set(k, v);
    }
  });
}

crnmt_status crnmt_config_validate(const crnmt_config* config) {
  return guarded([&] {
    require(config, "config");
    config->value.validate();
  });
}

crnmt_status crnmt_config_describe(const crnmt_config* config, char** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = dup_string(config->value.describe());
  });
}

crnmt_status crnmt_train(const crnmt_config* config, const char* data_path, const char* out_dir, crnmt_log_fn log,
                         void* user_data) {
  return guarded([&] {
    require(config, "config");
    require(data_path, "data_path");
    require(out_dir, "out_dir");
    const auto& cfg = config->value;
    cfg.validate();
    const auto logger = make_log(log, user_data);
    crnmt::LoadStats stats;
    const auto pairs = crnmt::load_tsv(data_path, cfg.swap_columns, &stats);
    if (logger && stats.skipped) logger("skipped " + std::to_string(stats.skipped) + " malformed lines");
    const auto data = crnmt::prepare_data(pairs, cfg, logger);

    crnmt::FitCallbacks callbacks;
    callbacks.on_epoch = [&](const crnmt::EpochRecord& rec) {
      if (!logger) return;
      char line[160];
      std::snprintf(line, sizeof line, "epoch %zu  train_loss %.6f  val_loss %.6f%s", rec.epoch, rec.train_loss,
                    rec.val_loss, rec.improved ? "  *" : "");
      logger(line);
    };
    callbacks.on_improved = [&](const crnmt::Model& model, const crnmt::EpochRecord& rec) {
      crnmt::CheckpointInfo info{cfg, rec.epoch, data.split.validation.empty() ? rec.train_loss : rec.val_loss};
      crnmt::save_checkpoint(model, info, out_dir);
    };
    const auto trained = crnmt::train_model(data, cfg, callbacks);
    if (logger) {
      logger("best epoch " + std::to_string(trained.fit.best_epoch) + (trained.fit.early_stopped ? " (early stop)" : "") +
             "; checkpoint in " + std::string(out_dir));
      if (!data.split.test.empty()) {
        const auto report = crnmt::evaluate_pairs(trained.model, data.split.test, cfg.max_decode_len);
        logger("test split:\n" + report.to_text());
      }
    }
  });
}

crnmt_status crnmt_model_load(const char* checkpoint_dir, crnmt_model** out) {
  return guarded([&] {
    require(checkpoint_dir, "checkpoint_dir");
    require(out, "out");
    *out = new crnmt_model{crnmt::load_checkpoint(checkpoint_dir)};
  });
}

void crnmt_model_destroy(crnmt_model* model) { delete model; }

crnmt_status crnmt_model_describe(const crnmt_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = dup_string(model->checkpoint.info.config.describe());
  });
}

crnmt_status crnmt_translate(const crnmt_model* model, const char* const* sentences, size_t count, size_t max_len,
                             char*** out_lines) {
  return guarded([&] {
    require(model, "model");
    require(out_lines, "out_lines");
    if (count > 0) require(sentences, "sentences");
    std::vector<std::string> sources;
    sources.reserve(count);
    for (size_t i = 0; i < count; ++i) sources.emplace_back(sentences[i] ? sentences[i] : "");
    const size_t limit = max_len ? max_len : model->checkpoint.info.config.max_decode_len;
    const auto translations = crnmt::translate_corpus(model->checkpoint.model, sources, limit);
    char** lines = static_cast<char**>(std::calloc(count ? count : 1, sizeof(char*)));
    if (!lines) throw std::bad_alloc();
    try {
      for (size_t i = 0; i < count; ++i) lines[i] = dup_string(crnmt::detokenize(translations[i]));
    } catch (...) {
      crnmt_lines_free(lines, count);
      throw;
    }
    *out_lines = lines;
  });
}

void crnmt_lines_free(char** lines, size_t count) {
  if (!lines) return;
  for (size_t i = 0; i < count; ++i) std::free(lines[i]);
  std::free(lines);
}

crnmt_status crnmt_evaluate(const crnmt_model* model, const char* tsv_path, int swap_columns, size_t max_len,
                            crnmt_bleu_report* out) {
  return guarded([&] {
    require(model, "model");
    require(tsv_path, "tsv_path");
    require(out, "out");
    const auto pairs = crnmt::load_tsv(tsv_path, swap_columns != 0);
    const size_t limit = max_len ? max_len : model->checkpoint.info.config.max_decode_len;
    fill_report(crnmt::evaluate_pairs(model->checkpoint.model, pairs, limit), out);
  });
}

crnmt_status crnmt_bleu(const char* const* hypotheses, const char* const* references, size_t count,
                        crnmt_bleu_report* out) {
  return guarded([&] {
    require(out, "out");
    if (count > 0) {
      require(hypotheses, "hypotheses");
      require(references, "references");
    }
    std::vector<crnmt::Tokens> hyps, refs;
    for (size_t i = 0; i < count; ++i) {
      hyps.push_back(crnmt::tokenize(hypotheses[i] ? hypotheses[i] : ""));
      refs.push_back(crnmt::tokenize(references[i] ? references[i] : ""));
    }
    try {
      fill_report(crnmt::bleu_corpus(hyps, refs), out);
    } catch (const std::invalid_argument& e) {
      throw crnmt::ConfigError(e.what());
    }
  });
}

crnmt_status crnmt_bleu_report_format(const crnmt_bleu_report* report, char** out) {
  return guarded([&] {
    require(report, "report");
    require(out, "out");
    *out = dup_string(to_report(report).to_text());
  });
}

crnmt_status crnmt_bleu_report_csv(const crnmt_model* model, const crnmt_bleu_report* report, char** header,
                                   char** row) {
  return guarded([&] {
    require(model, "model");
    require(report, "report");
    require(header, "header");
    require(row, "row");
    std::string h, r;
    for (const auto& [k, v] : model->checkpoint.info.config.entries()) {
      h += k + ',';
      r += v + ',';
    }
    h += crnmt::BleuReport::csv_header();
    r += to_report(report).csv_fields();
    *header = dup_string(h);
    try {
      *row = dup_string(r);
    } catch (...) {
      crnmt_string_free(*header);
      *header = nullptr;
      throw;
    }
  });
}

crnmt_status crnmt_ablate(const crnmt_config* config, const char* data_path, const size_t* depths, size_t n_depths,
                          const int* pos_flags, size_t n_pos, const uint64_t* seeds, size_t n_seeds, char** table,
                          char** csv, crnmt_log_fn log, void* user_data) {
  return guarded([&] {
    require(config, "config");
    require(data_path, "data_path");
    require(table, "table");
    require(csv, "csv");
    crnmt::AblationOptions options;
    if (n_depths > 0) {
      require(depths, "depths");
      options.depths.assign(depths, depths + n_depths);
    }
    for (auto d : options.depths) {
      if (d < 1 || d > 5) throw crnmt::ConfigError("ablation depth " + std::to_string(d) + " outside 1..5");
    }
    if (n_pos > 0) {
      require(pos_flags, "pos_flags");
      options.position_embedding.clear();
      for (size_t i = 0; i < n_pos; ++i) options.position_embedding.push_back(pos_flags[i] != 0);
    }
    if (n_seeds > 0) {
      require(seeds, "seeds");
      options.seeds.assign(seeds, seeds + n_seeds);
    }
    const auto& cfg = config->value;
    cfg.validate();
    const auto pairs = crnmt::load_tsv(data_path, cfg.swap_columns);
    const auto rows = crnmt::ablation_sweep(pairs, options, cfg, make_log(log, user_data));
    *table = dup_string(crnmt::format_ablation_table(rows));
    try {
      *csv = dup_string(crnmt::ablation_csv(rows));
    } catch (...) {
      crnmt_string_free(*table);
      *table = nullptr;
      throw;
    }
  });
}

}  // extern "C"
