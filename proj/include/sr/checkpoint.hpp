#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "sr/train.hpp"

namespace sr {

// Checkpoint format 1. Every matrix is stored row-major as decimal strings
// with 17 significant digits, so a load reproduces the exact doubles and
// save -> load -> save is byte-identical. `meta` is an opaque provenance
// blob (seed, dataset, errors) carried through round-trips untouched.
nlohmann::ordered_json model_to_json(const SrModel& m,
                                     const nlohmann::ordered_json& meta = nullptr);
SrModel model_from_json(const nlohmann::ordered_json& j,
                        nlohmann::ordered_json* meta_out = nullptr);

void save_checkpoint(const SrModel& m, const std::string& path,
                     const nlohmann::ordered_json& meta = nullptr);
SrModel load_checkpoint(const std::string& path, nlohmann::ordered_json* meta_out = nullptr);

// Named alphabets understood by configs and the CLI: "binary", "letters",
// "bp".
Alphabet alphabet_from_name(const std::string& name);

// --- training run configuration ------------------------------------------------

// Parsed form of the `train` subcommand's JSON config. Parsing validates
// everything up front, before any side effect.
struct RunConfig {
  uint64_t seed = 1;

  std::string train_path;
  std::string valid_path;
  Alphabet alphabet;

  CellKind cell = CellKind::Gru;
  int hidden = 20;
  int embed = 4;
  int classes = 2;
  bool state_regularized = true;
  int k = 10;
  double tau = 1.0;
  TransitionMode mode = TransitionMode::Mixture;  // the standard training transition

  TrainConfig fit;  // fit.seed mirrors `seed`

  std::string checkpoint_out;
  std::string history_out;  // empty: no history file
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

}  // namespace sr
