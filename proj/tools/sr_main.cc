// sr: train state-regularized recurrent classifiers on synthetic formal
// languages, extract DFAs from them, and explain their predictions.
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sr/checkpoint.hpp"
#include "sr/explain.hpp"
#include "sr/extract.hpp"
#include "sr/io_util.hpp"
#include "sr/languages.hpp"
#include "sr/train.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------- gen-data

struct GenFile {
  std::string name;
  sr::Dataset data;
};

sr::Dataset gen_bp(int count, int dmin, int dmax, int max_len, double ratio, uint64_t seed,
                   const std::string& name) {
  sr::Rng rng(sr::derive_seed(seed, "data/bp/" + name));
  return sr::bp_generate(count, dmin, dmax, max_len, ratio, rng);
}

// Dataset presets. "small" matches the desk-scale experiments; "large"
// scales the same shapes up.
std::vector<GenFile> generate_language(const std::string& language, const std::string& preset,
                                       uint64_t seed, sr::Alphabet* alphabet_out) {
  const bool small = preset == "small";
  if (!small && preset != "large")
    throw std::invalid_argument("unknown preset '" + preset + "' (small, large)");

  std::vector<GenFile> files;
  if (language.rfind("tomita", 0) == 0 && language.size() == 7) {
    const int n = language[6] - '0';
    if (n < 1 || n > 7) throw std::invalid_argument("tomita grammar number must be 1..7");
    *alphabet_out = sr::Alphabet::binary();
    const int train_n = small ? 1600 : 8000;
    const int valid_n = small ? 400 : 2000;
    const int test_n = small ? 500 : 2000;
    const int max_len = small ? 15 : 25;
    for (const auto& [name, count] : std::vector<std::pair<std::string, int>>{
             {"train", train_n}, {"valid", valid_n}, {"test", test_n}}) {
      sr::Rng rng(sr::derive_seed(seed, "data/" + language + "/" + name));
      files.push_back({name + ".jsonl", sr::tomita_generate(n, count, max_len, rng)});
    }
    return files;
  }

  if (language == "bp") {
    *alphabet_out = sr::Alphabet::bp();
    const int scale = small ? 1 : 4;
    files.push_back({"train.jsonl", gen_bp(1008 * scale, 1, 5, 60, 601.0 / 407.0, seed,
                                           "train")});
    files.push_back({"valid.jsonl", gen_bp(268 * scale, 6, 10, 100, 142.0 / 126.0, seed,
                                           "valid")});
    struct Slice {
      const char* name;
      int dmin, dmax, max_len;
    };
    for (const Slice& s : {Slice{"test_d1_10_l100", 1, 10, 100},
                           Slice{"test_d10_20_l100", 10, 20, 100},
                           Slice{"test_d10_20_l200", 10, 20, 200},
                           Slice{"test_d5_l200", 5, 5, 200},
                           Slice{"test_d10_l200", 10, 10, 200},
                           Slice{"test_d20_l1000", 20, 20, 1000}}) {
      files.push_back({std::string(s.name) + ".jsonl",
                       gen_bp(1000, s.dmin, s.dmax, s.max_len, 1.0, seed, s.name)});
    }
    return files;
  }

  if (language == "palindrome") {
    *alphabet_out = sr::Alphabet::letters();
    const int scale = small ? 1 : 4;
    struct Slice {
      const char* name;
      int count, max_len;
    };
    for (const Slice& s : {Slice{"train", 2000 * scale, 30}, Slice{"valid", 500 * scale, 60},
                           Slice{"test_l100", 1000, 100}, Slice{"test_l200", 1000, 200},
                           Slice{"test_l500", 1000, 500}}) {
      sr::Rng rng(sr::derive_seed(seed, std::string("data/palindrome/") + s.name));
      files.push_back({std::string(s.name) + ".jsonl",
                       sr::palindrome_generate(s.count, s.max_len, rng)});
    }
    return files;
  }

  throw std::invalid_argument("unknown language '" + language +
                              "' (tomita1..tomita7, bp, palindrome)");
}

ordered_json dataset_stats(const sr::Dataset& d) {
  ordered_json s;
  int positives = 0, len_min = -1, len_max = -1, dep_min = -1, dep_max = -1;
  for (const auto& ex : d) {
    positives += ex.label == 1 ? 1 : 0;
    const int len = static_cast<int>(ex.tokens.size());
    if (len_min < 0 || len < len_min) len_min = len;
    if (len > len_max) len_max = len;
    if (ex.depth >= 0) {
      if (dep_min < 0 || ex.depth < dep_min) dep_min = ex.depth;
      if (ex.depth > dep_max) dep_max = ex.depth;
    }
  }
  s["count"] = d.size();
  s["positives"] = positives;
  s["negatives"] = static_cast<int>(d.size()) - positives;
  s["length_min"] = len_min;
  s["length_max"] = len_max;
  if (dep_min >= 0) {
    s["depth_min"] = dep_min;
    s["depth_max"] = dep_max;
  }
  return s;
}

int cmd_gen_data(const std::string& language, const std::string& preset, uint64_t seed,
                 const std::string& out_dir) {
  sr::Alphabet alphabet;
  std::vector<GenFile> files = generate_language(language, preset, seed, &alphabet);

  ordered_json manifest;
  manifest["language"] = language;
  manifest["preset"] = preset;
  manifest["seed"] = seed;
  manifest["alphabet"] = alphabet.body_tokens();
  manifest["files"] = ordered_json::object();
  for (const GenFile& f : files) {
    sr::save_dataset_jsonl(f.data, alphabet, (fs::path(out_dir) / f.name).string());
    manifest["files"][f.name] = dataset_stats(f.data);
  }
  sr::write_file_atomic((fs::path(out_dir) / "manifest.json").string(),
                        manifest.dump(2) + "\n");
  std::cout << manifest.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const std::string& config_path) {
  sr::RunConfig cfg = sr::load_run_config(config_path);
  sr::Dataset train = sr::load_dataset_jsonl(cfg.train_path, cfg.alphabet);
  sr::Dataset valid = sr::load_dataset_jsonl(cfg.valid_path, cfg.alphabet);

  sr::Rng init_rng(sr::derive_seed(cfg.seed, "init"));
  std::optional<std::pair<int, double>> k_tau;
  if (cfg.state_regularized) k_tau = {cfg.k, cfg.tau};
  sr::SrModel model = sr::make_model(cfg.cell, cfg.hidden, cfg.embed, cfg.alphabet, cfg.classes,
                                     k_tau, cfg.mode, init_rng);

  sr::FitResult result = sr::fit(model, train, valid, cfg.fit);

  ordered_json meta;
  meta["seed"] = cfg.seed;
  meta["train"] = cfg.train_path;
  meta["valid"] = cfg.valid_path;
  meta["epochs_run"] = result.history.size();
  meta["best_epoch"] = result.best_epoch;
  meta["best_valid_error"] = result.best_valid_error;
  sr::save_checkpoint(result.model, cfg.checkpoint_out, meta);

  if (!cfg.history_out.empty()) {
    std::ostringstream lines;
    for (const sr::EpochRecord& r : result.history) {
      ordered_json line;
      line["epoch"] = r.epoch;
      line["stage"] = r.stage;
      line["train_error"] = r.train_error;
      line["valid_error"] = r.valid_error;
      lines << line.dump() << "\n";
    }
    sr::write_file_atomic(cfg.history_out, lines.str());
  }

  ordered_json summary;
  summary["checkpoint"] = cfg.checkpoint_out;
  summary["epochs_run"] = result.history.size();
  summary["best_epoch"] = result.best_epoch;
  summary["best_valid_error"] = result.best_valid_error;
  summary["final_train_error"] =
      result.history.empty() ? 1.0 : result.history.back().train_error;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const std::string& checkpoint, const std::vector<std::string>& data_paths,
             uint64_t seed) {
  sr::SrModel model = sr::load_checkpoint(checkpoint);
  sr::Dataset data;
  for (const std::string& p : data_paths) {
    sr::Dataset part = sr::load_dataset_jsonl(p, model.alphabet);
    data.insert(data.end(), part.begin(), part.end());
  }
  const double error = sr::evaluate(model, data, seed);
  ordered_json out;
  out["examples"] = data.size();
  out["error"] = error;
  out["accuracy"] = 1.0 - error;
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------- extract-dfa

int cmd_extract_dfa(const std::string& checkpoint, const std::vector<std::string>& data_paths,
                    const std::string& mode, bool unsound, bool do_minimize,
                    const std::string& out_path, const std::string& dot_path) {
  if (mode != "counts" && mode != "meanprob")
    throw std::invalid_argument("unknown extraction mode '" + mode + "' (counts, meanprob)");
  sr::SrModel model = sr::load_checkpoint(checkpoint);
  sr::Dataset data;
  for (const std::string& p : data_paths) {
    sr::Dataset part = sr::load_dataset_jsonl(p, model.alphabet);
    data.insert(data.end(), part.begin(), part.end());
  }

  sr::Dfa dfa = mode == "counts" ? sr::extract_dfa_counts(model, data, unsound)
                                 : sr::extract_dfa_meanprob(model, data, unsound);
  const int raw_states = dfa.num_states();
  if (do_minimize) dfa = sr::minimize(dfa);

  if (!dot_path.empty()) sr::write_file_atomic(dot_path, sr::to_dot(dfa));
  if (!out_path.empty()) {
    sr::write_file_atomic(out_path, sr::dfa_to_json(dfa).dump(2) + "\n");
    ordered_json summary;
    summary["out"] = out_path;
    summary["mode"] = mode;
    summary["states_extracted"] = raw_states;
    summary["states"] = dfa.num_states();
    summary["minimized"] = do_minimize;
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << sr::dfa_to_json(dfa).dump(2) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- explain

// Whitespace-separated tokens; a single run of characters that is not itself
// a token is split per character ("(())" -> ( ( ) )).
std::vector<int> parse_body(const sr::Alphabet& a, const std::string& text) {
  std::istringstream iss(text);
  std::vector<std::string> parts;
  std::string w;
  while (iss >> w) parts.push_back(w);
  std::vector<int> ids;
  if (parts.size() == 1 && !a.index.count(parts[0])) {
    for (char c : parts[0]) ids.push_back(a.id(std::string(1, c)));
    return ids;
  }
  for (const std::string& p : parts) ids.push_back(a.id(p));
  return ids;
}

int cmd_explain(const std::string& checkpoint, const std::string& sequence,
                const std::string& data_path, int index, const std::string& out_path,
                const std::string& html_path) {
  sr::SrModel model = sr::load_checkpoint(checkpoint);

  std::vector<int> body;
  if (!data_path.empty()) {
    sr::Dataset data = sr::load_dataset_jsonl(data_path, model.alphabet);
    if (index < 0 || index >= static_cast<int>(data.size()))
      throw std::invalid_argument("--index out of range for '" + data_path + "'");
    body = data[static_cast<size_t>(index)].tokens;
  } else {
    body = parse_body(model.alphabet, sequence);
  }

  sr::Explanation e = sr::explain_prediction(model, body);
  ordered_json j = sr::explanation_to_json(e);
  if (!html_path.empty()) sr::write_file_atomic(html_path, sr::explanation_to_html(e));
  if (!out_path.empty()) {
    sr::write_file_atomic(out_path, j.dump(2) + "\n");
    std::cout << ordered_json{{"out", out_path}, {"prediction", e.predicted}}.dump() << "\n";
  } else {
    std::cout << j.dump(2) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- prototypes

int cmd_prototypes(const std::string& checkpoint, const std::vector<std::string>& data_paths,
                   int top_n, int ngram, int phrases_m, const std::string& out_path) {
  sr::SrModel model = sr::load_checkpoint(checkpoint);
  sr::Dataset data;
  for (const std::string& p : data_paths) {
    sr::Dataset part = sr::load_dataset_jsonl(p, model.alphabet);
    data.insert(data.end(), part.begin(), part.end());
  }

  ordered_json j;
  j["prototypes"] = sr::prototypes_to_json(sr::build_prototypes(model, data, top_n));
  if (ngram > 0)
    j["phrases"] = sr::phrases_to_json(sr::ngram_phrases(model, data, ngram, phrases_m));

  if (!out_path.empty()) {
    sr::write_file_atomic(out_path, j.dump(2) + "\n");
    std::cout << ordered_json{{"out", out_path}}.dump() << "\n";
  } else {
    std::cout << j.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"state-regularized recurrent networks: train, extract DFAs, explain"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a dataset preset as JSONL files");
  std::string gen_language, gen_preset = "small", gen_out;
  uint64_t gen_seed = 1;
  gen->add_option("--language", gen_language, "tomita1..tomita7, bp, palindrome")->required();
  gen->add_option("--preset", gen_preset, "small or large");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train a model from a JSON run config");
  std::string train_config;
  train->add_option("--config", train_config, "run config JSON path")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "error rate of a checkpoint on datasets");
  std::string eval_checkpoint;
  std::vector<std::string> eval_data;
  uint64_t eval_seed = 0;
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint JSON path")->required();
  eval->add_option("--data", eval_data, "dataset JSONL path (repeatable)")->required();
  eval->add_option("--seed", eval_seed, "seed for stochastic transition modes");

  // extract-dfa
  auto* extract = app.add_subcommand("extract-dfa", "extract a DFA from a trained model");
  std::string ex_checkpoint, ex_mode = "counts", ex_out, ex_dot;
  std::vector<std::string> ex_data;
  bool ex_unsound = false, ex_minimize = false;
  extract->add_option("--checkpoint", ex_checkpoint, "checkpoint JSON path")->required();
  extract->add_option("--data", ex_data, "dataset JSONL path (repeatable)")->required();
  extract->add_option("--mode", ex_mode, "counts or meanprob");
  extract->add_flag("--unsound", ex_unsound,
                    "allow extraction from memory cells (LSTM kinds) anyway");
  extract->add_flag("--minimize", ex_minimize, "minimize the extracted DFA");
  extract->add_option("--out", ex_out, "DFA JSON output path (default: stdout)");
  extract->add_option("--dot", ex_dot, "DOT output path");

  // explain
  auto* explain = app.add_subcommand("explain", "transition-probability explanation");
  std::string xp_checkpoint, xp_sequence, xp_data, xp_out, xp_html;
  int xp_index = 0;
  explain->add_option("--checkpoint", xp_checkpoint, "checkpoint JSON path")->required();
  auto* xp_seq_opt = explain->add_option("--sequence", xp_sequence,
                                         "body tokens (whitespace- or character-split)");
  auto* xp_data_opt =
      explain->add_option("--data", xp_data, "take the sequence from this dataset");
  explain->add_option("--index", xp_index, "record index within --data");
  explain->add_option("--out", xp_out, "JSON output path (default: stdout)");
  explain->add_option("--html", xp_html, "HTML rendering output path");
  xp_seq_opt->excludes(xp_data_opt);

  // prototypes
  auto* protos = app.add_subcommand("prototypes", "centroid prototype tokens and phrases");
  std::string pr_checkpoint, pr_out;
  std::vector<std::string> pr_data;
  int pr_top = 5, pr_ngram = 0, pr_phrases = 5;
  protos->add_option("--checkpoint", pr_checkpoint, "checkpoint JSON path")->required();
  protos->add_option("--data", pr_data, "dataset JSONL path (repeatable)")->required();
  protos->add_option("--top", pr_top, "prototype tokens per centroid");
  protos->add_option("--ngram", pr_ngram, "also report phrases of this length");
  protos->add_option("--phrases", pr_phrases, "phrases per centroid");
  protos->add_option("--out", pr_out, "JSON output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << ordered_json{{"error", e.what()}}.dump() << "\n";
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_language, gen_preset, gen_seed, gen_out);
    if (train->parsed()) return cmd_train(train_config);
    if (eval->parsed()) return cmd_eval(eval_checkpoint, eval_data, eval_seed);
    if (extract->parsed())
      return cmd_extract_dfa(ex_checkpoint, ex_data, ex_mode, ex_unsound, ex_minimize, ex_out,
                             ex_dot);
    if (explain->parsed()) {
      if (xp_data.empty() && xp_seq_opt->count() == 0)
        throw std::invalid_argument("explain needs --sequence or --data");
      return cmd_explain(xp_checkpoint, xp_sequence, xp_data, xp_index, xp_out, xp_html);
    }
    if (protos->parsed())
      return cmd_prototypes(pr_checkpoint, pr_data, pr_top, pr_ngram, pr_phrases, pr_out);
  } catch (const std::exception& e) {
    std::cerr << ordered_json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
