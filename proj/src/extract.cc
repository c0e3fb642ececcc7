#include "sr/extract.hpp"

#include <stdexcept>

namespace sr {

SrModelWalker::SrModelWalker(const SrModel& m, bool unsound) : m_(m) {
  if (!m.sr) throw std::invalid_argument("extract: model is not state-regularized");
  memory_ = cell_has_memory(m.params.kind);
  if (memory_ && !unsound)
    throw std::invalid_argument(
        "extract: cell state carries unbounded memory, so the argmax walk is unsound; "
        "train a memory-less cell (gru, elman) for a sound extraction, or force this "
        "one with the unsound flag");
}

int SrModelWalker::state_count() const { return m_.sr->k; }

namespace {

Vec embedding_row(const CellParams& p, int token) {
  return p.at("embedding").row(token).transpose();
}

}  // namespace

// One deterministic model step from the current running state: advance the
// cell, read off alpha, record its argmax, and update h exactly the way the
// rng-free forward pass does (sampling replaced by the argmax pick, mixture
// modes keep the soft state).
std::pair<int, double> SrModelWalker::advance(int token) {
  CellStepValues out = cell_step(m_.params, st_, embedding_row(m_.params, token));
  Vec alpha = transition_distribution(*m_.sr, out.u);
  current_ = argmax_lowest(alpha);
  st_.h = m_.sr->mode == TransitionMode::Sampled ? Vec(m_.sr->centroids.col(current_))
                                                 : Vec(m_.sr->centroids * alpha);
  if (memory_) st_.c = *out.c;
  return {current_, alpha(current_)};
}

int SrModelWalker::begin() {
  st_.h = Vec::Zero(m_.params.hidden);
  if (memory_) st_.c = Vec::Zero(m_.params.hidden);
  return advance(m_.alphabet.start_id()).first;
}

std::pair<int, double> SrModelWalker::step(int symbol) {
  if (current_ < 0) throw std::logic_error("walker: step before begin");
  if (symbol < 0 || symbol >= m_.alphabet.body_size())
    throw std::invalid_argument("walker: symbol id out of range");
  return advance(symbol);
}

bool SrModelWalker::accepting(int state) {
  auto it = accept_cache_.find(state);
  if (it != accept_cache_.end()) return it->second;
  CellState st;
  st.h = m_.sr->centroids.col(state);
  if (memory_) st.c = Vec::Zero(m_.params.hidden);
  CellStepValues out = cell_step(m_.params, st, embedding_row(m_.params, m_.alphabet.end_id()));
  Vec features;
  if (memory_) {
    features.resize(2 * m_.params.hidden);
    features << out.u, *out.c;
  } else {
    features = out.u;
  }
  Vec logits = m_.params.at("W_y") * features + m_.params.at("b_y").col(0);
  bool accept = argmax_lowest(logits) == 1;
  accept_cache_[state] = accept;
  return accept;
}

namespace {

std::vector<std::vector<int>> bodies(const Dataset& data) {
  std::vector<std::vector<int>> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(ex.tokens);
  return out;
}

}  // namespace

Dfa extract_dfa_counts(const SrModel& m, const Dataset& data, bool unsound,
                       TransitionStats* stats_out) {
  SrModelWalker walker(m, unsound);
  return extract_dfa(walker, bodies(data), m.alphabet.body_tokens(), ExtractionRule::Counts,
                     stats_out);
}

Dfa extract_dfa_meanprob(const SrModel& m, const Dataset& data, bool unsound,
                         TransitionStats* stats_out) {
  SrModelWalker walker(m, unsound);
  return extract_dfa(walker, bodies(data), m.alphabet.body_tokens(), ExtractionRule::MeanProb,
                     stats_out);
}

}  // namespace sr
