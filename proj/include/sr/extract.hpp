#pragma once

#include <map>
#include <optional>

#include "sr/automata.hpp"
#include "sr/train.hpp"

namespace sr {

// Argmax walk over a state-regularized model: the model runs its own
// deterministic dynamics (the trained transition mode with the argmax pick
// standing in for any sampling) and the walk records the argmax centroid at
// every step. The same (centroid, token) pair can therefore be observed with
// different successors on different occurrences — the count/mean tables
// resolve those by majority. For memory-less cells the regularized h carries
// all cross-step information, so the recorded chain converges to the model's
// underlying automaton as the transitions sharpen. Memory cells carry hidden
// context in c that no finite chain can represent, so they are rejected
// unless `unsound` is set (the walk then carries c along, and the result is
// an approximation with no soundness story).
class SrModelWalker : public ExtractionWalker {
 public:
  SrModelWalker(const SrModel& m, bool unsound = false);

  int state_count() const override;
  int begin() override;
  std::pair<int, double> step(int symbol) override;
  bool accepting(int state) override;

 private:
  std::pair<int, double> advance(int token);

  const SrModel& m_;
  bool memory_ = false;
  int current_ = -1;
  CellState st_;
  std::map<int, bool> accept_cache_;
};

// Transition-frequency extraction (delta = argmax visit count).
Dfa extract_dfa_counts(const SrModel& m, const Dataset& data, bool unsound = false,
                       TransitionStats* stats_out = nullptr);

// Mean-transition-probability extraction (delta = argmax mean of the max
// transition probability).
Dfa extract_dfa_meanprob(const SrModel& m, const Dataset& data, bool unsound = false,
                         TransitionStats* stats_out = nullptr);

}  // namespace sr
