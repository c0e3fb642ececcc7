#include "sr/explain.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sr {

namespace {

void require_sr(const SrModel& m, const char* who) {
  if (!m.sr) throw std::invalid_argument(std::string(who) + ": model is not state-regularized");
}

}  // namespace

BodyTrace body_trace(const SrModel& m, const std::vector<int>& body) {
  require_sr(m, "body_trace");
  ForwardResult r = forward_sequence(m, body);
  BodyTrace t;
  t.tokens = body;
  // trace covers start + body; drop the start step to align with tokens.
  for (size_t i = 1; i < r.trace.steps.size(); ++i) t.alphas.push_back(r.trace.steps[i].alpha);
  return t;
}

PrototypeTable build_prototypes_from_traces(const std::vector<BodyTrace>& traces, int k,
                                            const std::vector<std::string>& token_names,
                                            int top_n) {
  if (k <= 0) throw std::invalid_argument("build_prototypes: k must be positive");
  if (top_n < 0) throw std::invalid_argument("build_prototypes: top_n must be >= 0");

  struct Best {
    double p = 0.0;
    long first_seen = 0;
  };
  // per centroid: token id -> best probability + earliest sighting
  std::vector<std::map<int, Best>> best(static_cast<size_t>(k));
  long counter = 0;
  for (const auto& tr : traces) {
    if (tr.alphas.size() != tr.tokens.size())
      throw std::invalid_argument("build_prototypes: trace misaligned with tokens");
    for (size_t t = 0; t < tr.tokens.size(); ++t) {
      const Vec& alpha = tr.alphas[t];
      int j = argmax_lowest(alpha);
      double p = alpha(j);
      auto& slot = best[static_cast<size_t>(j)];
      auto it = slot.find(tr.tokens[t]);
      ++counter;
      if (it == slot.end()) {
        slot[tr.tokens[t]] = {p, counter};
      } else if (p > it->second.p) {
        it->second.p = p;  // first_seen keeps the original sighting
      }
    }
  }

  PrototypeTable table(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j) {
    std::vector<std::pair<int, Best>> entries(best[static_cast<size_t>(j)].begin(),
                                              best[static_cast<size_t>(j)].end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      if (a.second.p != b.second.p) return a.second.p > b.second.p;
      return a.second.first_seen < b.second.first_seen;
    });
    for (const auto& [tok, info] : entries) {
      if (static_cast<int>(table[static_cast<size_t>(j)].size()) >= top_n) break;
      table[static_cast<size_t>(j)].push_back(
          {token_names.at(static_cast<size_t>(tok)), info.p});
    }
  }
  return table;
}

PrototypeTable build_prototypes(const SrModel& m, const Dataset& data, int top_n) {
  require_sr(m, "build_prototypes");
  std::vector<BodyTrace> traces;
  traces.reserve(data.size());
  for (const auto& ex : data) traces.push_back(body_trace(m, ex.tokens));
  return build_prototypes_from_traces(traces, m.sr->k, m.alphabet.body_tokens(), top_n);
}

int classify_centroid(const SrModel& m, int centroid) {
  require_sr(m, "classify_centroid");
  if (centroid < 0 || centroid >= m.sr->k)
    throw std::invalid_argument("classify_centroid: centroid out of range");
  const CellParams& p = m.params;
  CellState st;
  st.h = m.sr->centroids.col(centroid);
  if (cell_has_memory(p.kind)) st.c = Vec::Zero(p.hidden);
  Vec x = p.at("embedding").row(m.alphabet.end_id()).transpose();
  CellStepValues out = cell_step(p, st, x);
  Vec features;
  if (cell_has_memory(p.kind)) {
    features.resize(2 * p.hidden);
    features << out.u, *out.c;
  } else {
    features = out.u;
  }
  Vec logits = p.at("W_y") * features + p.at("b_y").col(0);
  return argmax_lowest(logits);
}

Explanation explain_prediction(const SrModel& m, const std::vector<int>& body) {
  require_sr(m, "explain_prediction");
  ForwardResult r = forward_sequence(m, body);
  Explanation e;
  e.predicted = r.predicted;
  const TraceStep& last = r.trace.steps.back();
  e.centroid = last.state;
  for (size_t i = 1; i < r.trace.steps.size(); ++i) {
    e.tokens.push_back(m.alphabet.token(body[i - 1]));
    e.p.push_back(r.trace.steps[i].alpha(e.centroid));
  }
  return e;
}

std::vector<CentroidPhrases> ngram_phrases_from_traces(
    const std::vector<BodyTrace>& traces, int k, const std::vector<std::string>& token_names,
    const std::vector<int>& centroid_class, int n, int top_m) {
  if (n <= 0) throw std::invalid_argument("ngram_phrases: n must be positive");
  if (top_m < 0) throw std::invalid_argument("ngram_phrases: top_m must be >= 0");
  if (static_cast<int>(centroid_class.size()) != k)
    throw std::invalid_argument("ngram_phrases: class list length and k disagree");

  struct Best {
    double score = 0.0;
    long first_seen = 0;
  };
  std::vector<std::map<std::string, Best>> best(static_cast<size_t>(k));
  long counter = 0;
  for (const auto& tr : traces) {
    if (tr.alphas.size() != tr.tokens.size())
      throw std::invalid_argument("ngram_phrases: trace misaligned with tokens");
    const int len = static_cast<int>(tr.tokens.size());
    for (int t = 0; t + n <= len; ++t) {
      std::string phrase;
      for (int i = 0; i < n; ++i) {
        if (i) phrase += ' ';
        phrase += token_names.at(static_cast<size_t>(tr.tokens[static_cast<size_t>(t + i)]));
      }
      ++counter;
      for (int j = 0; j < k; ++j) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += tr.alphas[static_cast<size_t>(t + i)](j);
        mean /= static_cast<double>(n);
        auto& slot = best[static_cast<size_t>(j)];
        auto it = slot.find(phrase);
        if (it == slot.end()) {
          slot[phrase] = {mean, counter};
        } else if (mean > it->second.score) {
          it->second.score = mean;
        }
      }
    }
  }

  std::vector<CentroidPhrases> out;
  for (int j = 0; j < k; ++j) {
    CentroidPhrases cp;
    cp.centroid = j;
    cp.class_id = centroid_class[static_cast<size_t>(j)];
    std::vector<std::pair<std::string, Best>> entries(best[static_cast<size_t>(j)].begin(),
                                                      best[static_cast<size_t>(j)].end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      if (a.second.score != b.second.score) return a.second.score > b.second.score;
      return a.second.first_seen < b.second.first_seen;
    });
    for (const auto& [phrase, info] : entries) {
      if (static_cast<int>(cp.phrases.size()) >= top_m) break;
      cp.phrases.push_back({phrase, info.score});
    }
    out.push_back(std::move(cp));
  }
  return out;
}

std::vector<CentroidPhrases> ngram_phrases(const SrModel& m, const Dataset& data, int n,
                                           int top_m) {
  require_sr(m, "ngram_phrases");
  std::vector<BodyTrace> traces;
  traces.reserve(data.size());
  for (const auto& ex : data) traces.push_back(body_trace(m, ex.tokens));
  std::vector<int> classes(static_cast<size_t>(m.sr->k));
  for (int j = 0; j < m.sr->k; ++j) classes[static_cast<size_t>(j)] = classify_centroid(m, j);
  return ngram_phrases_from_traces(traces, m.sr->k, m.alphabet.body_tokens(), classes, n, top_m);
}

Vec transition_features(const SrModel& m, const std::vector<int>& body) {
  require_sr(m, "transition_features");
  ForwardResult r = forward_sequence(m, body);
  const auto& steps = r.trace.steps;
  if (steps.size() == 1) return steps[0].alpha;  // empty body: start step only
  Vec mean = Vec::Zero(m.sr->k);
  for (size_t i = 1; i < steps.size(); ++i) mean += steps[i].alpha;
  return mean / static_cast<double>(steps.size() - 1);
}

nlohmann::ordered_json explanation_to_json(const Explanation& e) {
  nlohmann::ordered_json j;
  j["prediction"] = e.predicted;
  j["centroid"] = e.centroid;
  j["tokens"] = nlohmann::ordered_json::array();
  for (size_t i = 0; i < e.tokens.size(); ++i) {
    nlohmann::ordered_json t;
    t["text"] = e.tokens[i];
    t["p"] = e.p[i];
    j["tokens"].push_back(std::move(t));
  }
  return j;
}

namespace {

std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string explanation_to_html(const Explanation& e) {
  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>explanation</title></head>\n";
  os << "<body style=\"font-family: monospace; font-size: 18px;\">\n";
  os << "<p>prediction: " << e.predicted << ", centroid: " << e.centroid << "</p>\n<p>\n";
  for (size_t i = 0; i < e.tokens.size(); ++i) {
    os << "<span style=\"background-color: rgba(255,120,0," << e.p[i] << ");\">"
       << html_escape(e.tokens[i]) << "</span> ";
  }
  os << "\n</p>\n</body></html>\n";
  return os.str();
}

nlohmann::ordered_json prototypes_to_json(const PrototypeTable& t) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (size_t c = 0; c < t.size(); ++c) {
    nlohmann::ordered_json entry;
    entry["centroid"] = c;
    entry["tokens"] = nlohmann::ordered_json::array();
    for (const auto& p : t[c]) {
      nlohmann::ordered_json tok;
      tok["token"] = p.token;
      tok["p"] = p.p;
      entry["tokens"].push_back(std::move(tok));
    }
    j.push_back(std::move(entry));
  }
  return j;
}

nlohmann::ordered_json phrases_to_json(const std::vector<CentroidPhrases>& phrases) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& cp : phrases) {
    nlohmann::ordered_json entry;
    entry["centroid"] = cp.centroid;
    entry["class"] = cp.class_id;
    entry["phrases"] = nlohmann::ordered_json::array();
    for (const auto& p : cp.phrases) {
      nlohmann::ordered_json ph;
      ph["phrase"] = p.phrase;
      ph["score"] = p.score;
      entry["phrases"].push_back(std::move(ph));
    }
    j.push_back(std::move(entry));
  }
  return j;
}

}  // namespace sr
