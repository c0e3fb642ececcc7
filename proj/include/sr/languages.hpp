#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "sr/automata.hpp"
#include "sr/rng.hpp"

namespace sr {

// Ordered token list with the reserved start/end markers appended after the
// body tokens. Body token ids are 0..body_size()-1.
struct Alphabet {
  std::vector<std::string> tokens;
  std::map<std::string, int> index;

  static Alphabet make(std::vector<std::string> body);
  static Alphabet binary();   // 0 1
  static Alphabet letters();  // a..z
  static Alphabet bp();       // a..z ( )

  int size() const { return static_cast<int>(tokens.size()); }
  int body_size() const { return size() - 2; }
  int start_id() const { return size() - 2; }
  int end_id() const { return size() - 1; }
  int id(const std::string& token) const;  // throws on unknown token
  const std::string& token(int id) const;
  std::vector<std::string> body_tokens() const;
};

extern const char* const kStartToken;  // "<s>"
extern const char* const kEndToken;    // "</s>"

struct LabeledSequence {
  std::vector<int> tokens;  // body token ids, no start/end
  int label = 0;            // 0 = reject, 1 = accept (or class id)
  int depth = -1;           // max nesting depth where meaningful, else -1
};

using Dataset = std::vector<LabeledSequence>;

// --- deterministic pushdown automaton ----------------------------------------

// Acceptance by final state. Transition keys are (state, input, stack top)
// with input -1 for epsilon moves; a transition replaces the stack top with
// `push` (front of `push` becomes the new top). Determinism is validated:
// a configuration with an epsilon move admits no input move.
struct Dpda {
  int num_states = 0;
  std::vector<std::string> input_alphabet;
  std::vector<std::string> stack_alphabet;
  int start_state = 0;
  int initial_stack = 0;
  std::vector<bool> accepting;
  std::map<std::tuple<int, int, int>, std::pair<int, std::vector<int>>> delta;

  void validate() const;
  // Runs on body symbol ids; a stuck configuration rejects.
  bool run(const std::vector<int>& word) const;
};

// Single working state, counter on the stack: push on '(', pop on ')',
// letters are wildcards, accept on the bottom marker.
Dpda bp_dpda();

// Balanced-parentheses membership via the DPDA above. Ids are Alphabet::bp()
// body ids; out-of-range ids throw.
bool bp_oracle(const std::vector<int>& body);

// Max prefix nesting depth (open minus close, floored at zero). Defined for
// unbalanced strings too, so negatives carry depth metadata.
int bp_depth(const std::vector<int>& body);

bool palindrome_oracle(const std::vector<int>& body);  // even length, w == reverse(w)

// --- Tomita grammars ---------------------------------------------------------

// Reference automaton over {0,1} for grammar n in 1..7:
//   1: 1*
//   2: (10)*
//   3: no odd-length 0-run immediately after an odd-length 1-run
//   4: no 000 substring
//   5: even number of 0s and even number of 1s
//   6: (#0 - #1) divisible by 3
//   7: 0*1*0*1*0*
Dfa tomita_reference_dfa(int n);

// Independent scan predicate for the same grammar (used to cross-check the
// tables above).
bool tomita_oracle(int n, const std::vector<int>& body);

// --- generators ---------------------------------------------------------------

// Balanced parentheses with exact-depth positives and single-edit negatives
// (re-checked to be rejecting). pos_neg_ratio is positives : negatives.
Dataset bp_generate(int count, int depth_min, int depth_max, int max_len, double pos_neg_ratio,
                    Rng& rng);

// Even-length palindromes w . reverse(w) over a..z; negatives are uniform
// even-length letter strings re-checked not to be palindromes.
Dataset palindrome_generate(int count, int max_len, Rng& rng);

// Balanced accept/reject sample for Tomita grammar n, lengths 0..max_len.
// Sparse positive sets (grammars 1 and 2) are synthesized from the pattern,
// everything else is rejection-sampled against the reference automaton.
Dataset tomita_generate(int n, int count, int max_len, Rng& rng);

// Cumulative curriculum stages ordered by difficulty: depth when present,
// length otherwise. Stage i holds every example whose difficulty is at or
// below the floor(v*i/stages)-th of the v distinct difficulty values; the
// last stage is always the full dataset.
std::vector<Dataset> curriculum_split(const Dataset& data, int stages);

// --- JSONL ---------------------------------------------------------------------

// One record per line: {"tokens": [...], "label": 0|1, "depth": d, "length": n}.
void save_dataset_jsonl(const Dataset& data, const Alphabet& alphabet, const std::string& path);
// Unknown tokens throw; extra fields are ignored; depth is optional.
Dataset load_dataset_jsonl(const std::string& path, const Alphabet& alphabet);

}  // namespace sr
