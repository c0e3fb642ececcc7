#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sr/io_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int code = -1;
  std::string out, err;
};

const fs::path& work_dir() {
  static fs::path p = [] {
    fs::path d = fs::temp_directory_path() / ("sr_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return p;
}

CliResult run_cli(const std::string& args) {
  static int call = 0;
  fs::path out = work_dir() / ("stdout_" + std::to_string(call) + ".txt");
  fs::path err = work_dir() / ("stderr_" + std::to_string(call) + ".txt");
  ++call;
  std::string cmd = std::string("\"") + SR_CLI_PATH + "\" " + args + " > " + out.string() +
                    " 2> " + err.string();
  int status = std::system(cmd.c_str());
  CliResult r;
  r.code = (status == -1) ? -1 : WEXITSTATUS(status);
  r.out = sr::read_file(out.string());
  r.err = sr::read_file(err.string());
  return r;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += (c == '\n') ? 1 : 0;
  return n;
}

// Small tomita1 corpus shared by the cases below, generated once.
const fs::path& data_dir() {
  static fs::path p = [] {
    fs::path d = work_dir() / "data";
    CliResult r = run_cli("gen-data --language tomita1 --preset small --seed 7 --out " +
                          d.string());
    if (r.code != 0) throw std::runtime_error("gen-data failed: " + r.err);
    return d;
  }();
  return p;
}

std::string train_config_json(const fs::path& ckpt, const fs::path& history, bool regularized,
                              uint64_t seed, const std::string& cell = "gru") {
  json sr_section;
  if (regularized) sr_section = {{"k", 4}, {"tau", 1.0}};
  json j = {
      {"seed", seed},
      {"data",
       {{"train", (data_dir() / "train.jsonl").string()},
        {"valid", (data_dir() / "valid.jsonl").string()},
        {"alphabet", "binary"}}},
      {"model", {{"cell", cell}, {"hidden", 8}, {"embed", 3}, {"sr", sr_section}}},
      {"optimizer", {{"name", "adadelta"}}},
      {"fit", {{"epochs", 1}, {"patience", 0}}},
      {"out", {{"checkpoint", ckpt.string()}, {"history", history.string()}}},
  };
  return j.dump(2);
}

// One-epoch state-regularized checkpoint shared by the cases below.
const fs::path& sr_checkpoint() {
  static fs::path p = [] {
    fs::path ckpt = work_dir() / "model_sr.json";
    fs::path cfg = work_dir() / "train_sr.json";
    sr::write_file_atomic(cfg.string(),
                          train_config_json(ckpt, work_dir() / "history_sr.jsonl", true, 9));
    CliResult r = run_cli("train --config " + cfg.string());
    if (r.code != 0) throw std::runtime_error("train failed: " + r.err);
    return ckpt;
  }();
  return p;
}

const fs::path& plain_checkpoint() {
  static fs::path p = [] {
    fs::path ckpt = work_dir() / "model_plain.json";
    fs::path cfg = work_dir() / "train_plain.json";
    sr::write_file_atomic(cfg.string(),
                          train_config_json(ckpt, work_dir() / "history_plain.jsonl", false, 9));
    CliResult r = run_cli("train --config " + cfg.string());
    if (r.code != 0) throw std::runtime_error("train failed: " + r.err);
    return ckpt;
  }();
  return p;
}

// Regularized but memory-carrying: extraction exists only behind --unsound.
const fs::path& sr_lstm_checkpoint() {
  static fs::path p = [] {
    fs::path ckpt = work_dir() / "model_sr_lstm.json";
    fs::path cfg = work_dir() / "train_sr_lstm.json";
    sr::write_file_atomic(
        cfg.string(),
        train_config_json(ckpt, work_dir() / "history_sr_lstm.jsonl", true, 9, "lstm"));
    CliResult r = run_cli("train --config " + cfg.string());
    if (r.code != 0) throw std::runtime_error("train failed: " + r.err);
    return ckpt;
  }();
  return p;
}

}  // namespace

TEST_CASE("gen-data is deterministic and matches its manifest") {
  fs::path again = work_dir() / "data_again";
  CliResult r2 = run_cli("gen-data --language tomita1 --preset small --seed 7 --out " +
                         again.string());
  REQUIRE(r2.code == 0);

  json manifest = json::parse(sr::read_file((data_dir() / "manifest.json").string()));
  CHECK(manifest["language"] == "tomita1");
  CHECK(manifest["seed"] == 7);
  REQUIRE(manifest["files"].contains("train.jsonl"));
  CHECK(manifest["files"]["train.jsonl"]["count"] == 1600);
  CHECK(manifest["files"]["valid.jsonl"]["count"] == 400);
  CHECK(manifest["files"]["test.jsonl"]["count"] == 500);

  for (auto& [name, stats] : manifest["files"].items()) {
    std::string here = sr::read_file((data_dir() / name).string());
    CHECK(count_lines(here) == stats["count"].get<int>());
    CHECK(here == sr::read_file((again / name).string()));  // same seed, same bytes
  }
  CHECK(sr::read_file((data_dir() / "manifest.json").string()) ==
        sr::read_file((again / "manifest.json").string()));

  // The manifest is also the stdout report.
  CHECK(json::parse(r2.out) == manifest);
}

TEST_CASE("gen-data rejects unknown languages and presets") {
  CHECK(run_cli("gen-data --language tomita9 --out " + (work_dir() / "x").string()).code != 0);
  CliResult r = run_cli("gen-data --language klingon --out " + (work_dir() / "x").string());
  CHECK(r.code != 0);
  CHECK(json::parse(r.err).contains("error"));
  CHECK(run_cli("gen-data --language bp --preset huge --out " + (work_dir() / "x").string())
            .code != 0);
}

TEST_CASE("train writes checkpoint, history, and a summary") {
  fs::path ckpt = sr_checkpoint();
  REQUIRE(fs::exists(ckpt));

  json model = json::parse(sr::read_file(ckpt.string()));
  CHECK(model["format_version"] == 1);
  CHECK(model["cell"] == "gru");
  CHECK(model["meta"]["seed"] == 9);
  CHECK(model["meta"]["epochs_run"] == 1);
  CHECK(model["meta"]["best_epoch"] == 1);

  std::string history = sr::read_file((work_dir() / "history_sr.jsonl").string());
  REQUIRE(count_lines(history) == 1);
  json rec = json::parse(history.substr(0, history.find('\n')));
  CHECK(rec["epoch"] == 1);
  CHECK(rec["valid_error"] == model["meta"]["best_valid_error"]);
}

TEST_CASE("training twice with one config is byte-reproducible") {
  fs::path ckpt2 = work_dir() / "model_sr_again.json";
  fs::path cfg2 = work_dir() / "train_sr_again.json";
  sr::write_file_atomic(cfg2.string(),
                        train_config_json(ckpt2, work_dir() / "history_again.jsonl", true, 9));
  CliResult r = run_cli("train --config " + cfg2.string());
  REQUIRE(r.code == 0);

  json a = json::parse(sr::read_file(sr_checkpoint().string()));
  json b = json::parse(sr::read_file(ckpt2.string()));
  CHECK(a["weights"] == b["weights"]);
  CHECK(a["meta"]["best_valid_error"] == b["meta"]["best_valid_error"]);
}

TEST_CASE("eval reports the error rate over merged datasets") {
  CliResult r = run_cli("eval --checkpoint " + sr_checkpoint().string() + " --data " +
                        (data_dir() / "test.jsonl").string());
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j["examples"] == 500);
  double error = j["error"].get<double>();
  CHECK(error >= 0.0);
  CHECK(error <= 1.0);
  CHECK(j["accuracy"].get<double>() == doctest::Approx(1.0 - error).epsilon(1e-12));

  // Same data twice doubles the example count.
  CliResult twice = run_cli("eval --checkpoint " + sr_checkpoint().string() + " --data " +
                            (data_dir() / "test.jsonl").string() + " --data " +
                            (data_dir() / "test.jsonl").string());
  REQUIRE(twice.code == 0);
  CHECK(json::parse(twice.out)["examples"] == 1000);
}

TEST_CASE("extract-dfa emits a deterministic automaton with dot rendering") {
  fs::path dfa1 = work_dir() / "dfa1.json";
  fs::path dfa2 = work_dir() / "dfa2.json";
  fs::path dot = work_dir() / "dfa1.dot";
  std::string base = "extract-dfa --checkpoint " + sr_checkpoint().string() + " --data " +
                     (data_dir() / "test.jsonl").string() + " --minimize --dot " + dot.string();
  CliResult r1 = run_cli(base + " --out " + dfa1.string());
  REQUIRE(r1.code == 0);
  CliResult r2 = run_cli(base + " --out " + dfa2.string());
  REQUIRE(r2.code == 0);

  CHECK(sr::read_file(dfa1.string()) == sr::read_file(dfa2.string()));
  json d = json::parse(sr::read_file(dfa1.string()));
  REQUIRE(d.contains("delta"));
  int states = static_cast<int>(d["delta"].size());
  CHECK(states >= 1);
  CHECK(d["labels"].size() == d["delta"].size());
  CHECK(d["alphabet"] == json::array({"0", "1"}));

  json summary = json::parse(r1.out);
  CHECK(summary["states"] == states);
  CHECK(summary["minimized"] == true);
  CHECK(summary["mode"] == "counts");

  std::string dot_text = sr::read_file(dot.string());
  CHECK(dot_text.rfind("digraph", 0) == 0);

  // Without --out the DFA itself goes to stdout.
  CliResult direct = run_cli("extract-dfa --checkpoint " + sr_checkpoint().string() +
                             " --data " + (data_dir() / "test.jsonl").string());
  REQUIRE(direct.code == 0);
  CHECK(json::parse(direct.out).contains("delta"));

  // meanprob is a valid mode; junk is not.
  CHECK(run_cli(base + " --mode meanprob --out " + dfa2.string()).code == 0);
  CHECK(run_cli(base + " --mode magic --out " + dfa2.string()).code != 0);
}

TEST_CASE("memory cells extract only behind the unsound flag") {
  std::string base = "extract-dfa --checkpoint " + sr_lstm_checkpoint().string() + " --data " +
                     (data_dir() / "test.jsonl").string();
  CliResult refuse = run_cli(base);
  CHECK(refuse.code != 0);
  json err = json::parse(refuse.err);
  REQUIRE(err.contains("error"));
  CHECK(err["error"].get<std::string>().find("unsound") != std::string::npos);
  CHECK(err["error"].get<std::string>().find("gru") != std::string::npos);

  CliResult forced = run_cli(base + " --unsound");
  CHECK(forced.code == 0);
  CHECK(json::parse(forced.out).contains("delta"));
}

TEST_CASE("models without centroids cannot be extracted at all") {
  std::string base = "extract-dfa --checkpoint " + plain_checkpoint().string() + " --data " +
                     (data_dir() / "test.jsonl").string();
  for (const std::string& args : {base, base + " --unsound"}) {
    CliResult r = run_cli(args);
    CHECK(r.code != 0);
    CHECK(json::parse(r.err)["error"].get<std::string>().find("state-regularized") !=
          std::string::npos);
  }
}

TEST_CASE("explain scores every body token") {
  CliResult r = run_cli("explain --checkpoint " + sr_checkpoint().string() +
                        " --sequence \"1 0 1\"");
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  CHECK(j.contains("prediction"));
  CHECK(j.contains("centroid"));
  REQUIRE(j["tokens"].size() == 3);
  CHECK(j["tokens"][0]["text"] == "1");
  for (const auto& tok : j["tokens"]) {
    double p = tok["p"].get<double>();
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }

  // Unseparated sequences split per character; html rendering works.
  fs::path html = work_dir() / "explain.html";
  CliResult packed = run_cli("explain --checkpoint " + sr_checkpoint().string() +
                             " --sequence 101 --html " + html.string());
  REQUIRE(packed.code == 0);
  CHECK(json::parse(packed.out)["tokens"].size() == 3);
  CHECK(sr::read_file(html.string()).find("<span") != std::string::npos);

  // Records can come from a dataset file instead.
  std::string first_line = sr::read_file((data_dir() / "test.jsonl").string());
  first_line = first_line.substr(0, first_line.find('\n'));
  size_t len = json::parse(first_line)["tokens"].size();
  CliResult from_data = run_cli("explain --checkpoint " + sr_checkpoint().string() +
                                " --data " + (data_dir() / "test.jsonl").string() +
                                " --index 0");
  REQUIRE(from_data.code == 0);
  CHECK(json::parse(from_data.out)["tokens"].size() == len);

  CHECK(run_cli("explain --checkpoint " + sr_checkpoint().string() + " --data " +
                (data_dir() / "test.jsonl").string() + " --index 100000")
            .code != 0);
}

TEST_CASE("prototypes report per-centroid tokens and optional phrases") {
  CliResult r = run_cli("prototypes --checkpoint " + sr_checkpoint().string() + " --data " +
                        (data_dir() / "train.jsonl").string() + " --top 3 --ngram 2");
  REQUIRE(r.code == 0);
  json j = json::parse(r.out);
  REQUIRE(j.contains("prototypes"));
  CHECK(j["prototypes"].size() == 4);  // one table per centroid
  for (const auto& entry : j["prototypes"]) CHECK(entry["tokens"].size() <= 3);
  REQUIRE(j.contains("phrases"));
  CHECK(j["phrases"].size() == 4);

  CliResult no_phrases = run_cli("prototypes --checkpoint " + sr_checkpoint().string() +
                                 " --data " + (data_dir() / "train.jsonl").string());
  REQUIRE(no_phrases.code == 0);
  CHECK_FALSE(json::parse(no_phrases.out).contains("phrases"));

  // Prototype extraction needs the stochastic component.
  CHECK(run_cli("prototypes --checkpoint " + plain_checkpoint().string() + " --data " +
                (data_dir() / "train.jsonl").string())
            .code != 0);
}

TEST_CASE("failures land on stderr as json with a nonzero exit") {
  CliResult bad_cfg = run_cli("train --config /nonexistent/cfg.json");
  CHECK(bad_cfg.code == 1);
  json err = json::parse(bad_cfg.err);
  REQUIRE(err.contains("error"));
  CHECK(err["error"].get<std::string>().find("/nonexistent/cfg.json") != std::string::npos);

  CliResult no_sub = run_cli("");
  CHECK(no_sub.code != 0);
  CHECK(json::parse(no_sub.err).contains("error"));

  CliResult bad_flag = run_cli("eval --no-such-flag");
  CHECK(bad_flag.code != 0);

  CliResult missing_ckpt = run_cli("eval --checkpoint /nonexistent/m.json --data " +
                                   (data_dir() / "test.jsonl").string());
  CHECK(missing_ckpt.code == 1);
  CHECK(json::parse(missing_ckpt.err)["error"].get<std::string>().find("checkpoint") !=
        std::string::npos);

  CliResult help = run_cli("--help");
  CHECK(help.code == 0);
  CHECK(help.out.find("gen-data") != std::string::npos);
}
