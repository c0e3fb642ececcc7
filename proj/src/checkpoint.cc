#include "sr/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <stdexcept>

#include "sr/io_util.hpp"

namespace sr {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + s.size() || s.empty())
    throw std::invalid_argument("checkpoint: bad number '" + s + "'");
  return v;
}

nlohmann::ordered_json mat_to_json(const Mat& m) {
  nlohmann::ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  auto data = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(format_double(m(i, c)));
  j["data"] = std::move(data);
  return j;
}

template <class Json>
Mat mat_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw std::invalid_argument("checkpoint: matrix entry must have rows/cols/data");
  int rows = j.at("rows").template get<int>();
  int cols = j.at("cols").template get<int>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<int>(data.size()) != rows * cols)
    throw std::invalid_argument("checkpoint: matrix data length disagrees with rows*cols");
  Mat m(rows, cols);
  int idx = 0;
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c)
      m(i, c) = parse_double(data.at(idx++).template get<std::string>());
  return m;
}

}  // namespace

nlohmann::ordered_json model_to_json(const SrModel& m, const nlohmann::ordered_json& meta) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["cell"] = cell_kind_name(m.params.kind);
  j["hidden"] = m.params.hidden;
  j["embed"] = m.params.embed;
  j["classes"] = m.params.classes;
  j["alphabet"] = m.alphabet.body_tokens();
  if (m.sr) {
    nlohmann::ordered_json sr;
    sr["k"] = m.sr->k;
    sr["tau"] = format_double(m.sr->tau);
    sr["mode"] = transition_mode_name(m.sr->mode);
    j["sr"] = std::move(sr);
  } else {
    j["sr"] = nullptr;
  }
  nlohmann::ordered_json weights;
  for (const auto& name : cell_param_names(m.params.kind))
    weights[name] = mat_to_json(m.params.at(name));
  if (m.sr) weights["S"] = mat_to_json(m.sr->centroids);
  j["weights"] = std::move(weights);
  j["meta"] = meta;
  return j;
}

SrModel model_from_json(const nlohmann::ordered_json& j, nlohmann::ordered_json* meta_out) {
  if (!j.is_object()) throw std::invalid_argument("checkpoint: top level must be an object");
  if (!j.contains("format_version") || j.at("format_version").get<int>() != 1)
    throw std::invalid_argument("checkpoint: unsupported format_version");

  SrModel m;
  m.params.kind = cell_kind_from_name(j.at("cell").get<std::string>());
  m.params.hidden = j.at("hidden").get<int>();
  m.params.embed = j.at("embed").get<int>();
  m.params.classes = j.at("classes").get<int>();
  m.alphabet = Alphabet::make(j.at("alphabet").get<std::vector<std::string>>());
  m.params.alphabet = m.alphabet.size();
  if (m.params.hidden <= 0 || m.params.embed <= 0 || m.params.classes < 2)
    throw std::invalid_argument("checkpoint: bad model dimensions");

  const auto& weights = j.at("weights");
  for (const auto& name : cell_param_names(m.params.kind)) {
    if (!weights.contains(name))
      throw std::invalid_argument("checkpoint: weight '" + name + "' missing");
    m.params.w[name] = mat_from_json(weights.at(name));
  }

  if (j.contains("sr") && !j.at("sr").is_null()) {
    SRConfig sr;
    sr.k = j.at("sr").at("k").get<int>();
    sr.tau = parse_double(j.at("sr").at("tau").get<std::string>());
    sr.mode = transition_mode_from_name(j.at("sr").at("mode").get<std::string>());
    if (sr.k <= 0 || sr.tau <= 0.0) throw std::invalid_argument("checkpoint: bad sr section");
    if (!weights.contains("S")) throw std::invalid_argument("checkpoint: centroids 'S' missing");
    sr.centroids = mat_from_json(weights.at("S"));
    if (sr.centroids.rows() != m.params.hidden || sr.centroids.cols() != sr.k)
      throw std::invalid_argument("checkpoint: centroid shape disagrees with hidden/k");
    m.sr = std::move(sr);
  }

  if (meta_out) *meta_out = j.contains("meta") ? j.at("meta") : nlohmann::ordered_json(nullptr);

  // Holistic shape check: one pass over an empty body exercises every weight.
  try {
    forward_sequence(m, {});
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("checkpoint: inconsistent weights: ") + e.what());
  }
  return m;
}

void save_checkpoint(const SrModel& m, const std::string& path,
                     const nlohmann::ordered_json& meta) {
  write_file_atomic(path, model_to_json(m, meta).dump(2) + "\n");
}

SrModel load_checkpoint(const std::string& path, nlohmann::ordered_json* meta_out) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(read_file(path));
  } catch (const std::exception& e) {  // unreadable file or broken json
    throw std::invalid_argument("checkpoint '" + path + "': " + e.what());
  }
  return model_from_json(j, meta_out);
}

Alphabet alphabet_from_name(const std::string& name) {
  if (name == "binary") return Alphabet::binary();
  if (name == "letters") return Alphabet::letters();
  if (name == "bp") return Alphabet::bp();
  throw std::invalid_argument("unknown alphabet '" + name + "' (binary, letters, bp)");
}

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key))
    throw std::invalid_argument(std::string("config: missing ") + where + "." + key);
  return j.at(key);
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();

  const auto& data = require(j, "data", "");
  cfg.train_path = require(data, "train", "data").get<std::string>();
  cfg.valid_path = require(data, "valid", "data").get<std::string>();
  const auto& alpha = require(data, "alphabet", "data");
  if (alpha.is_string()) {
    cfg.alphabet = alphabet_from_name(alpha.get<std::string>());
  } else if (alpha.is_array()) {
    cfg.alphabet = Alphabet::make(alpha.get<std::vector<std::string>>());
  } else {
    throw std::invalid_argument("config: data.alphabet must be a name or a token array");
  }

  const auto& model = require(j, "model", "");
  cfg.cell = cell_kind_from_name(require(model, "cell", "model").get<std::string>());
  cfg.hidden = require(model, "hidden", "model").get<int>();
  cfg.embed = require(model, "embed", "model").get<int>();
  if (model.contains("classes")) cfg.classes = model.at("classes").get<int>();
  if (cfg.hidden <= 0 || cfg.embed <= 0 || cfg.classes < 2)
    throw std::invalid_argument("config: model dimensions must be positive (classes >= 2)");
  const auto& sr = require(model, "sr", "model");
  if (sr.is_null()) {
    cfg.state_regularized = false;
  } else {
    cfg.state_regularized = true;
    cfg.k = require(sr, "k", "model.sr").get<int>();
    cfg.tau = require(sr, "tau", "model.sr").get<double>();
    if (sr.contains("mode"))
      cfg.mode = transition_mode_from_name(sr.at("mode").get<std::string>());
    if (cfg.k <= 0 || cfg.tau <= 0.0)
      throw std::invalid_argument("config: model.sr.k and model.sr.tau must be positive");
  }

  const auto& opt = require(j, "optimizer", "");
  const std::string opt_name = require(opt, "name", "optimizer").get<std::string>();
  OptimizerConfig& oc = cfg.fit.optimizer;
  if (opt_name == "adadelta") {
    oc.kind = OptimizerConfig::Kind::Adadelta;
    if (opt.contains("rho")) oc.rho = opt.at("rho").get<double>();
    if (opt.contains("eps")) oc.eps = opt.at("eps").get<double>();
    if (oc.rho <= 0.0 || oc.rho >= 1.0 || oc.eps <= 0.0)
      throw std::invalid_argument("config: adadelta wants 0 < rho < 1 and eps > 0");
  } else if (opt_name == "rmsprop") {
    oc.kind = OptimizerConfig::Kind::RmsProp;
    if (opt.contains("lr")) oc.lr = opt.at("lr").get<double>();
    if (opt.contains("momentum")) oc.momentum = opt.at("momentum").get<double>();
    if (opt.contains("decay")) oc.decay = opt.at("decay").get<double>();
    if (opt.contains("eps")) oc.rms_eps = opt.at("eps").get<double>();
    if (oc.lr <= 0.0 || oc.momentum < 0.0 || oc.momentum >= 1.0 || oc.decay <= 0.0 ||
        oc.decay >= 1.0 || oc.rms_eps <= 0.0)
      throw std::invalid_argument("config: bad rmsprop settings");
  } else {
    throw std::invalid_argument("config: unknown optimizer '" + opt_name +
                                "' (adadelta, rmsprop)");
  }

  if (j.contains("fit")) {
    const auto& fit = j.at("fit");
    if (fit.contains("epochs")) cfg.fit.epochs = fit.at("epochs").get<int>();
    if (fit.contains("patience")) cfg.fit.patience = fit.at("patience").get<int>();
    if (fit.contains("curriculum_stages"))
      cfg.fit.curriculum_stages = fit.at("curriculum_stages").get<int>();
    if (fit.contains("stage_epoch_cap"))
      cfg.fit.stage_epoch_cap = fit.at("stage_epoch_cap").get<int>();
    if (fit.contains("clip_norm")) cfg.fit.clip_norm = fit.at("clip_norm").get<double>();
    if (cfg.fit.epochs <= 0 || cfg.fit.patience < 0 || cfg.fit.curriculum_stages < 1 ||
        cfg.fit.stage_epoch_cap < 1)
      throw std::invalid_argument("config: bad fit settings");
  }
  cfg.fit.seed = cfg.seed;

  const auto& out = require(j, "out", "");
  cfg.checkpoint_out = require(out, "checkpoint", "out").get<std::string>();
  if (out.contains("history")) cfg.history_out = out.at("history").get<std::string>();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const std::exception& e) {  // unreadable file or broken json
    throw std::invalid_argument("config '" + path + "': " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace sr
