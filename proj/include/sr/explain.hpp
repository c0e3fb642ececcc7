#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sr/train.hpp"

namespace sr {

// Per-sequence record the interpretability ops work from: body tokens plus
// the transition distribution of each body step (start step excluded).
struct BodyTrace {
  std::vector<int> tokens;
  std::vector<Vec> alphas;
};

BodyTrace body_trace(const SrModel& m, const std::vector<int>& body);

struct ProtoEntry {
  std::string token;
  double p = 0.0;
};

// prototypes[j] = up to N distinct tokens with the highest transition
// probability observed while entering centroid j (argmax credit), ties
// resolved in favor of the token seen earlier in the dataset.
using PrototypeTable = std::vector<std::vector<ProtoEntry>>;

PrototypeTable build_prototypes(const SrModel& m, const Dataset& data, int top_n);
PrototypeTable build_prototypes_from_traces(const std::vector<BodyTrace>& traces, int k,
                                            const std::vector<std::string>& token_names,
                                            int top_n);

// Which class the end-of-sequence classifier assigns to a centroid.
int classify_centroid(const SrModel& m, int centroid);

struct Explanation {
  int predicted = -1;
  int centroid = -1;                // decisive: argmax of the last stochastic step
  std::vector<std::string> tokens;  // body tokens, aligned 1:1 with p
  std::vector<double> p;            // transition probability into `centroid`
};

Explanation explain_prediction(const SrModel& m, const std::vector<int>& body);

struct PhraseEntry {
  std::string phrase;
  double score = 0.0;
};

struct CentroidPhrases {
  int centroid = -1;
  int class_id = -1;
  std::vector<PhraseEntry> phrases;
};

// Sliding n-token windows scored by the mean transition probability into each
// centroid; top_m distinct phrases per centroid, tagged with the centroid's
// class. Sequences shorter than n contribute nothing.
std::vector<CentroidPhrases> ngram_phrases(const SrModel& m, const Dataset& data, int n,
                                           int top_m);
std::vector<CentroidPhrases> ngram_phrases_from_traces(const std::vector<BodyTrace>& traces,
                                                       int k,
                                                       const std::vector<std::string>& token_names,
                                                       const std::vector<int>& centroid_class,
                                                       int n, int top_m);

// Mean transition distribution over the body steps (the start step's alpha
// for an empty body): a fixed-length sequence embedding.
Vec transition_features(const SrModel& m, const std::vector<int>& body);

// --- emitters -----------------------------------------------------------------

nlohmann::ordered_json explanation_to_json(const Explanation& e);
std::string explanation_to_html(const Explanation& e);
nlohmann::ordered_json prototypes_to_json(const PrototypeTable& t);
nlohmann::ordered_json phrases_to_json(const std::vector<CentroidPhrases>& p);

}  // namespace sr
