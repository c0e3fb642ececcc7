#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

namespace sr {

// Total DFA over an ordered token alphabet. States are dense indices; labels
// carry the external identity of each state (centroid index, "sink", ...).
struct Dfa {
  std::vector<std::string> alphabet;
  std::vector<std::string> labels;        // one per state
  std::vector<std::vector<int>> delta;    // [state][symbol] -> state
  std::vector<bool> accepting;
  int start = 0;

  int num_states() const { return static_cast<int>(delta.size()); }
  void validate() const;  // totality, ranges, consistent sizes
  int symbol_id(const std::string& token) const;  // throws on unknown token
};

bool dfa_accepts(const Dfa& d, const std::vector<int>& word);
bool dfa_accepts(const Dfa& d, const std::vector<std::string>& word);

// Hopcroft partition refinement over the reachable part; state labels of a
// merged class come from its lowest original state.
Dfa minimize(const Dfa& d);

struct EquivResult {
  bool equivalent = false;
  std::vector<int> counterexample;  // shortest word on which the two differ
};

// Product-construction equivalence. Requires identical alphabets.
EquivResult equivalent(const Dfa& a, const Dfa& b);

// Deterministic DOT text: sorted states and edges, accepting states drawn
// with a double circle, nodes named by their labels.
std::string to_dot(const Dfa& d);

nlohmann::ordered_json dfa_to_json(const Dfa& d);
Dfa dfa_from_json(const nlohmann::json& j);

// --- extraction -------------------------------------------------------------

// Observed transitions: (state, symbol, next) -> visit count and the sum of
// the max transition probability seen on those visits.
struct TransitionStats {
  struct Cell {
    long count = 0;
    double prob_sum = 0.0;
  };
  std::map<std::tuple<int, int, int>, Cell> table;
};

enum class ExtractionRule {
  Counts,    // delta = argmax visit count
  MeanProb,  // delta = argmax mean of recorded max probabilities
};

// What extraction needs from a model: a hard walk that is forced through the
// centroid of the argmax transition at every step. Implementations may carry
// internal per-sequence state (begin() resets it).
class ExtractionWalker {
 public:
  virtual ~ExtractionWalker() = default;
  virtual int state_count() const = 0;
  // Reset and process the start token from the zero state; returns the
  // argmax centroid, i.e. the DFA start state.
  virtual int begin() = 0;
  // Advance over one body symbol; returns (argmax centroid, max probability).
  virtual std::pair<int, double> step(int symbol) = 0;
  // End-of-sequence classification of a centroid.
  virtual bool accepting(int state) = 0;
};

// Builds a DFA from argmax-to-argmax walks over the dataset. Unreachable
// states are dropped, unseen (state, symbol) pairs go to an explicit
// non-accepting sink, and ties in the argmax resolve to the lowest next
// state. Throws on an empty dataset.
Dfa extract_dfa(ExtractionWalker& walker, const std::vector<std::vector<int>>& sequences,
                const std::vector<std::string>& alphabet, ExtractionRule rule,
                TransitionStats* stats_out = nullptr);

}  // namespace sr
