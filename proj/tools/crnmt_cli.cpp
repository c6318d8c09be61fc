// Command-line front end. Talks to the library only through crnmt/crnmt.h.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crnmt/crnmt.h"

namespace {

struct ConfigFlag {
  const char* flag;
  const char* key;
  const char* help;
};

// Every flag maps onto the configuration key of the same name.
const ConfigFlag kConfigFlags[] = {
    {"--seed", "seed", "Random seed for splitting, initialization and shuffling"},
    {"--batch-size", "batch_size", "Sentence pairs per mini-batch"},
    {"--lr", "lr", "Adadelta learning rate"},
    {"--rho", "rho", "Adadelta decay rate"},
    {"--eps", "eps", "Adadelta epsilon"},
    {"--grad-clip", "grad_clip", "Global gradient-norm clipping threshold"},
    {"--epochs", "epochs", "Maximum training epochs"},
    {"--patience", "patience", "Epochs without validation improvement before stopping"},
    {"--conv-layers", "conv_layers", "Stacked convolution layers in the encoder (1-5)"},
    {"--conv-width", "conv_width", "Convolution filter width (odd)"},
    {"--embed-dim", "embed_dim", "Source embedding and convolution width"},
    {"--enc-hidden", "enc_hidden", "Encoder GRU size per direction"},
    {"--dec-hidden", "dec_hidden", "Decoder GRU size"},
    {"--attn-dim", "attn_dim", "Attention hidden width"},
    {"--tgt-embed-dim", "tgt_embed_dim", "Target embedding width"},
    {"--max-positions", "max_positions", "Rows of the position-embedding table"},
    {"--init-range", "init_range", "Uniform initialization half-width"},
    {"--src-vocab-size", "src_vocab_size", "Source vocabulary cap (with reserved entries)"},
    {"--tgt-vocab-size", "tgt_vocab_size", "Target vocabulary cap (with reserved entries)"},
    {"--min-freq", "min_freq", "Minimum token count for the vocabulary"},
    {"--max-sentence-len", "max_sentence_len", "Drop training pairs longer than this"},
    {"--train-frac", "train_frac", "Training share of the corpus"},
    {"--val-frac", "val_frac", "Validation share of the corpus"},
    {"--test-size", "test_size", "Absolute test-set size (0: use the fractions)"},
    {"--max-decode-len", "max_decode_len", "Longest translation in tokens"},
};

void log_to_stderr(const char* message, void*) { std::cerr << message << '\n'; }

int report(crnmt_status status) {
  if (status != CRNMT_OK) std::cerr << "error: " << crnmt_last_error() << '\n';
  return static_cast<int>(status);
}

class ConfigHandle {
 public:
  ConfigHandle() {
    if (crnmt_config_create(&config_) != CRNMT_OK) throw std::runtime_error(crnmt_last_error());
  }
  ~ConfigHandle() { crnmt_config_destroy(config_); }
  ConfigHandle(const ConfigHandle&) = delete;
  ConfigHandle& operator=(const ConfigHandle&) = delete;
  crnmt_config* get() { return config_; }

 private:
  crnmt_config* config_ = nullptr;
};

class ModelHandle {
 public:
  ~ModelHandle() { crnmt_model_destroy(model_); }
  crnmt_model** out() { return &model_; }
  crnmt_model* get() { return model_; }

 private:
  crnmt_model* model_ = nullptr;
};

std::string take_string(char* s) {
  std::string out = s ? s : "";
  crnmt_string_free(s);
  return out;
}

// Flags shared by train and ablate, resolved as defaults < preset < file < flags.
struct ConfigOptions {
  std::string config_file;
  std::string preset;
  bool no_position_embedding = false;
  bool swap_columns = false;
  std::vector<std::optional<std::string>> values = std::vector<std::optional<std::string>>(std::size(kConfigFlags));

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "Configuration file of `key = value` lines");
    app->add_option("--preset", preset, "Size preset: paper or tiny");
    app->add_flag("--no-position-embedding", no_position_embedding, "Freeze the position embedding at zero");
    app->add_flag("--swap-columns", swap_columns, "Read the first TSV column as the source");
    for (std::size_t i = 0; i < std::size(kConfigFlags); ++i) {
      app->add_option(kConfigFlags[i].flag, values[i], kConfigFlags[i].help);
    }
  }

  crnmt_status resolve(crnmt_config* config) const {
    crnmt_status st = CRNMT_OK;
    if (!preset.empty() && (st = crnmt_config_apply_preset(config, preset.c_str())) != CRNMT_OK) return st;
    if (!config_file.empty() &&
        (st = crnmt_config_load_file(config, config_file.c_str(), preset.empty() ? 0 : 1)) != CRNMT_OK) {
      return st;
    }
    for (std::size_t i = 0; i < std::size(kConfigFlags); ++i) {
      if (values[i] && (st = crnmt_config_set(config, kConfigFlags[i].key, values[i]->c_str())) != CRNMT_OK) {
        return st;
      }
    }
    if (no_position_embedding && (st = crnmt_config_set(config, "position_embedding", "off")) != CRNMT_OK) return st;
    if (swap_columns && (st = crnmt_config_set(config, "swap_columns", "on")) != CRNMT_OK) return st;
    if ((st = crnmt_config_validate(config)) != CRNMT_OK) return st;
    char* text = nullptr;
    if ((st = crnmt_config_describe(config, &text)) != CRNMT_OK) return st;
    std::cerr << "effective configuration:\n" << take_string(text);
    return CRNMT_OK;
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_train(const ConfigOptions& opts, const std::string& data, const std::string& out_dir) {
  ConfigHandle config;
  if (const auto st = opts.resolve(config.get()); st != CRNMT_OK) return report(st);
  return report(crnmt_train(config.get(), data.c_str(), out_dir.c_str(), log_to_stderr, nullptr));
}

int cmd_translate(const std::string& checkpoint, const std::string& input, std::size_t max_len) {
  ModelHandle model;
  if (const auto st = crnmt_model_load(checkpoint.c_str(), model.out()); st != CRNMT_OK) return report(st);
  char* text = nullptr;
  if (crnmt_model_describe(model.get(), &text) == CRNMT_OK) {
    std::cerr << "checkpoint configuration:\n" << take_string(text);
  }

  std::vector<std::string> lines;
  std::string line;
  if (input.empty() || input == "-") {
    while (std::getline(std::cin, line)) lines.push_back(line);
  } else {
    std::ifstream in(input);
    if (!in) {
      std::cerr << "error: cannot read '" << input << "'\n";
      return CRNMT_ERR_DATA;
    }
    while (std::getline(in, line)) lines.push_back(line);
  }
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  std::vector<const char*> ptrs;
  for (const auto& l : lines) ptrs.push_back(l.c_str());
  char** out = nullptr;
  if (const auto st = crnmt_translate(model.get(), ptrs.data(), ptrs.size(), max_len, &out); st != CRNMT_OK) {
    return report(st);
  }
  for (std::size_t i = 0; i < lines.size(); ++i) std::cout << out[i] << '\n';
  crnmt_lines_free(out, lines.size());
  std::cout.flush();
  return CRNMT_OK;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& data, bool swap, std::size_t max_len,
                 const std::string& csv_path) {
  ModelHandle model;
  if (const auto st = crnmt_model_load(checkpoint.c_str(), model.out()); st != CRNMT_OK) return report(st);
  char* text = nullptr;
  if (crnmt_model_describe(model.get(), &text) == CRNMT_OK) {
    std::cerr << "checkpoint configuration:\n" << take_string(text);
  }
  crnmt_bleu_report bleu{};
  if (const auto st = crnmt_evaluate(model.get(), data.c_str(), swap ? 1 : 0, max_len, &bleu); st != CRNMT_OK) {
    return report(st);
  }
  if (crnmt_bleu_report_format(&bleu, &text) != CRNMT_OK) return report(CRNMT_ERR_INTERNAL);
  std::cout << take_string(text);
  if (!csv_path.empty()) {
    char* header = nullptr;
    char* row = nullptr;
    if (const auto st = crnmt_bleu_report_csv(model.get(), &bleu, &header, &row); st != CRNMT_OK) return report(st);
    const std::string h = take_string(header), r = take_string(row);
    bool fresh = true;
    {
      std::ifstream existing(csv_path);
      fresh = !existing || existing.peek() == std::ifstream::traits_type::eof();
    }
    std::ofstream csv(csv_path, std::ios::app);
    if (!csv) {
      std::cerr << "error: cannot write '" << csv_path << "'\n";
      return CRNMT_ERR_DATA;
    }
    if (fresh) csv << h << '\n';
    csv << r << '\n';
  }
  return CRNMT_OK;
}

int cmd_ablate(const ConfigOptions& opts, const std::string& data, const std::string& depths_arg,
               const std::string& pos_arg, const std::string& seeds_arg, const std::string& table_path,
               const std::string& csv_path) {
  std::vector<std::size_t> depths;
  std::vector<int> pos;
  std::vector<std::uint64_t> seeds;
  try {
    for (const auto& d : split_list(depths_arg)) depths.push_back(std::stoul(d));
    for (const auto& s : split_list(seeds_arg)) seeds.push_back(std::stoull(s));
  } catch (const std::exception&) {
    std::cerr << "error: --depths and --seeds take comma-separated integers\n";
    return CRNMT_ERR_USAGE;
  }
  for (const auto& p : split_list(pos_arg)) {
    if (p == "on") {
      pos.push_back(1);
    } else if (p == "off") {
      pos.push_back(0);
    } else {
      std::cerr << "error: --pos takes a comma-separated list of on/off\n";
      return CRNMT_ERR_USAGE;
    }
  }
  ConfigHandle config;
  if (const auto st = opts.resolve(config.get()); st != CRNMT_OK) return report(st);
  char* table = nullptr;
  char* csv = nullptr;
  const auto st = crnmt_ablate(config.get(), data.c_str(), depths.data(), depths.size(), pos.data(), pos.size(),
                               seeds.data(), seeds.size(), &table, &csv, log_to_stderr, nullptr);
  if (st != CRNMT_OK) return report(st);
  const std::string t = take_string(table), c = take_string(csv);
  std::cout << t;
  if (!table_path.empty()) std::ofstream(table_path) << t;
  if (!csv_path.empty()) std::ofstream(csv_path) << c;
  return CRNMT_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convolutional-recurrent neural machine translation"};
  app.require_subcommand(1);

  ConfigOptions train_opts;
  std::string train_data, train_out;
  auto* train = app.add_subcommand("train", "Train a model and write the best checkpoint");
  train->add_option("--data", train_data, "Parallel corpus (target<TAB>source[<TAB>attribution])")->required();
  train->add_option("--out", train_out, "Checkpoint directory")->required();
  train_opts.attach(train);

  std::string tr_checkpoint, tr_input;
  std::size_t tr_max_len = 0;
  auto* translate = app.add_subcommand("translate", "Translate sentences, one per line");
  translate->add_option("--checkpoint", tr_checkpoint, "Checkpoint directory")->required();
  translate->add_option("--input", tr_input, "Source file (default: standard input)");
  translate->add_option("--max-len", tr_max_len, "Longest translation (default: from checkpoint)");

  std::string ev_checkpoint, ev_data, ev_csv;
  std::size_t ev_max_len = 0;
  bool ev_swap = false;
  auto* evaluate = app.add_subcommand("evaluate", "Report corpus BLEU on a parallel file");
  evaluate->add_option("--checkpoint", ev_checkpoint, "Checkpoint directory")->required();
  evaluate->add_option("--data", ev_data, "Parallel test file")->required();
  evaluate->add_flag("--swap-columns", ev_swap, "Read the first TSV column as the source");
  evaluate->add_option("--max-len", ev_max_len, "Longest translation (default: from checkpoint)");
  evaluate->add_option("--csv", ev_csv, "Append a result row to this CSV file");

  ConfigOptions ab_opts;
  std::string ab_data, ab_depths = "1,2,3,4,5", ab_pos = "on,off", ab_seeds, ab_table, ab_csv;
  auto* ablate = app.add_subcommand("ablate", "Sweep convolution depth and position embedding");
  ablate->add_option("--data", ab_data, "Parallel corpus")->required();
  ablate->add_option("--depths", ab_depths, "Comma-separated depths")->capture_default_str();
  ablate->add_option("--pos", ab_pos, "Comma-separated on/off list")->capture_default_str();
  ablate->add_option("--seeds", ab_seeds, "Comma-separated training seeds (default: --seed)");
  ablate->add_option("--table", ab_table, "Write the text table here too");
  ablate->add_option("--csv", ab_csv, "Write machine-readable rows here");
  ab_opts.attach(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : CRNMT_ERR_USAGE;
  }

  if (*train) return cmd_train(train_opts, train_data, train_out);
  if (*translate) return cmd_translate(tr_checkpoint, tr_input, tr_max_len);
  if (*evaluate) return cmd_evaluate(ev_checkpoint, ev_data, ev_swap, ev_max_len, ev_csv);
  if (*ablate) return cmd_ablate(ab_opts, ab_data, ab_depths, ab_pos, ab_seeds, ab_table, ab_csv);
  return CRNMT_ERR_USAGE;
}
