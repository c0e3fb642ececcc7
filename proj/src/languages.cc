#include "sr/languages.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "sr/io_util.hpp"

namespace sr {

const char* const kStartToken = "<s>";
const char* const kEndToken = "</s>";

Alphabet Alphabet::make(std::vector<std::string> body) {
  Alphabet a;
  for (auto& t : body) {
    if (t == kStartToken || t == kEndToken)
      throw std::invalid_argument("alphabet: reserved token '" + t + "' in body");
    a.tokens.push_back(std::move(t));
  }
  a.tokens.push_back(kStartToken);
  a.tokens.push_back(kEndToken);
  for (int i = 0; i < static_cast<int>(a.tokens.size()); ++i) {
    if (a.index.count(a.tokens[i]))
      throw std::invalid_argument("alphabet: duplicate token '" + a.tokens[i] + "'");
    a.index[a.tokens[i]] = i;
  }
  return a;
}

Alphabet Alphabet::binary() { return make({"0", "1"}); }

Alphabet Alphabet::letters() {
  std::vector<std::string> body;
  for (char c = 'a'; c <= 'z'; ++c) body.push_back(std::string(1, c));
  return make(std::move(body));
}

Alphabet Alphabet::bp() {
  std::vector<std::string> body;
  for (char c = 'a'; c <= 'z'; ++c) body.push_back(std::string(1, c));
  body.push_back("(");
  body.push_back(")");
  return make(std::move(body));
}

int Alphabet::id(const std::string& token) const {
  auto it = index.find(token);
  if (it == index.end()) throw std::invalid_argument("alphabet: unknown token '" + token + "'");
  return it->second;
}

const std::string& Alphabet::token(int id) const {
  if (id < 0 || id >= size()) throw std::invalid_argument("alphabet: token id out of range");
  return tokens[static_cast<size_t>(id)];
}

std::vector<std::string> Alphabet::body_tokens() const {
  return std::vector<std::string>(tokens.begin(), tokens.end() - 2);
}

// --- DPDA ----------------------------------------------------------------------

void Dpda::validate() const {
  if (num_states <= 0) throw std::invalid_argument("dpda: no states");
  if (static_cast<int>(accepting.size()) != num_states)
    throw std::invalid_argument("dpda: accepting size mismatch");
  if (start_state < 0 || start_state >= num_states)
    throw std::invalid_argument("dpda: start state out of range");
  const int ni = static_cast<int>(input_alphabet.size());
  const int ns = static_cast<int>(stack_alphabet.size());
  if (initial_stack < 0 || initial_stack >= ns)
    throw std::invalid_argument("dpda: initial stack symbol out of range");
  std::set<std::pair<int, int>> has_epsilon;
  for (const auto& [key, target] : delta) {
    auto [state, input, top] = key;
    if (state < 0 || state >= num_states || input < -1 || input >= ni || top < 0 || top >= ns)
      throw std::invalid_argument("dpda: transition key out of range");
    if (target.first < 0 || target.first >= num_states)
      throw std::invalid_argument("dpda: transition target out of range");
    for (int s : target.second)
      if (s < 0 || s >= ns) throw std::invalid_argument("dpda: pushed symbol out of range");
    if (input == -1) has_epsilon.insert({state, top});
  }
  // Determinism: an epsilon move on (state, top) excludes input moves there.
  for (const auto& [key, target] : delta) {
    auto [state, input, top] = key;
    (void)target;
    if (input != -1 && has_epsilon.count({state, top}))
      throw std::invalid_argument("dpda: nondeterministic configuration (epsilon + input move)");
  }
}

bool Dpda::run(const std::vector<int>& word) const {
  int state = start_state;
  std::vector<int> stack{initial_stack};  // back() is the top

  auto apply = [&](const std::pair<int, std::vector<int>>& t) {
    state = t.first;
    stack.pop_back();
    for (auto it = t.second.rbegin(); it != t.second.rend(); ++it) stack.push_back(*it);
  };
  auto epsilon_closure = [&]() {
    while (!stack.empty()) {
      auto it = delta.find({state, -1, stack.back()});
      if (it == delta.end()) break;
      apply(it->second);
    }
  };

  epsilon_closure();
  for (int sym : word) {
    if (sym < 0 || sym >= static_cast<int>(input_alphabet.size()))
      throw std::invalid_argument("dpda: input symbol out of range");
    if (stack.empty()) return false;
    auto it = delta.find({state, sym, stack.back()});
    if (it == delta.end()) return false;  // stuck
    apply(it->second);
    epsilon_closure();
  }
  return accepting[static_cast<size_t>(state)];
}

Dpda bp_dpda() {
  // States: 0 = accepting rest state (stack at bottom marker), 1 = inside a
  // nest. Stack: 0 = bottom marker, 1 = open-paren counter.
  Dpda d;
  d.num_states = 2;
  d.input_alphabet = Alphabet::bp().body_tokens();
  d.stack_alphabet = {"Z", "X"};
  d.start_state = 0;
  d.initial_stack = 0;
  d.accepting = {true, false};
  const int OPEN = 26, CLOSE = 27;
  for (int a = 0; a < 26; ++a) {
    d.delta[{0, a, 0}] = {0, {0}};  // letters are wildcards
    d.delta[{1, a, 1}] = {1, {1}};
  }
  d.delta[{0, OPEN, 0}] = {1, {1, 0}};
  d.delta[{1, OPEN, 1}] = {1, {1, 1}};
  d.delta[{1, CLOSE, 1}] = {1, {}};
  d.delta[{1, -1, 0}] = {0, {0}};  // counter emptied: back to the rest state
  d.validate();
  return d;
}

namespace {

const Dpda& cached_bp_dpda() {
  static const Dpda d = bp_dpda();
  return d;
}

constexpr int kBpOpen = 26;
constexpr int kBpClose = 27;

}  // namespace

bool bp_oracle(const std::vector<int>& body) {
  for (int t : body)
    if (t < 0 || t >= 28) throw std::invalid_argument("bp_oracle: symbol id out of range");
  return cached_bp_dpda().run(body);
}

int bp_depth(const std::vector<int>& body) {
  int depth = 0, counter = 0;
  for (int t : body) {
    if (t == kBpOpen) ++counter;
    if (t == kBpClose) --counter;
    depth = std::max(depth, counter);
  }
  return depth;
}

bool palindrome_oracle(const std::vector<int>& body) {
  if (body.size() % 2 != 0) return false;
  for (size_t i = 0, j = body.size(); i < j; ++i, --j)
    if (body[i] != body[j - 1]) return false;
  return true;
}

// --- Tomita grammars -----------------------------------------------------------

Dfa tomita_reference_dfa(int n) {
  Dfa d;
  d.alphabet = {"0", "1"};
  auto states = [&](std::vector<std::vector<int>> delta, std::vector<bool> accepting) {
    d.delta = std::move(delta);
    d.accepting = std::move(accepting);
    for (int s = 0; s < d.num_states(); ++s) d.labels.push_back(std::to_string(s));
    d.start = 0;
    d.validate();
  };
  switch (n) {
    case 1:  // 1*
      states({{1, 0}, {1, 1}}, {true, false});
      break;
    case 2:  // (10)*
      states({{2, 1}, {0, 2}, {2, 2}}, {true, false, false});
      break;
    case 3: {
      // 0: neutral, 1: odd 1-run, 2: odd 0-run after odd 1-run,
      // 3: even 0-run after odd 1-run, 4: dead.
      states({{0, 1}, {2, 0}, {3, 4}, {2, 1}, {4, 4}},
             {true, true, false, true, false});
      break;
    }
    case 4:  // no 000
      states({{1, 0}, {2, 0}, {3, 0}, {3, 3}}, {true, true, true, false});
      break;
    case 5: {
      // parity of (#0, #1): 0=(e,e) 1=(o,e) 2=(e,o) 3=(o,o)
      states({{1, 2}, {0, 3}, {3, 0}, {2, 1}}, {true, false, false, false});
      break;
    }
    case 6: {
      // (#0 - #1) mod 3: on '0' +1, on '1' +2 (mod 3)
      states({{1, 2}, {2, 0}, {0, 1}}, {true, false, false});
      break;
    }
    case 7:  // 0*1*0*1*0*
      states({{0, 1}, {2, 1}, {2, 3}, {4, 3}, {4, 5}, {5, 5}},
             {true, true, true, true, true, false});
      break;
    default:
      throw std::invalid_argument("tomita_reference_dfa: grammar must be 1..7");
  }
  return d;
}

bool tomita_oracle(int n, const std::vector<int>& body) {
  for (int t : body)
    if (t != 0 && t != 1) throw std::invalid_argument("tomita_oracle: symbol out of range");
  switch (n) {
    case 1:
      return std::all_of(body.begin(), body.end(), [](int t) { return t == 1; });
    case 2: {
      if (body.size() % 2 != 0) return false;
      for (size_t i = 0; i < body.size(); i += 2)
        if (body[i] != 1 || body[i + 1] != 0) return false;
      return true;
    }
    case 3: {
      // Scan maximal runs; reject an odd 0-run right after an odd 1-run.
      size_t i = 0;
      const size_t n2 = body.size();
      while (i < n2) {
        size_t j = i;
        while (j < n2 && body[j] == body[i]) ++j;
        size_t run = j - i;
        if (body[i] == 1 && run % 2 == 1 && j < n2) {
          size_t k = j;
          while (k < n2 && body[k] == 0) ++k;
          if ((k - j) % 2 == 1) return false;
        }
        i = j;
      }
      return true;
    }
    case 4: {
      int zeros = 0;
      for (int t : body) {
        zeros = (t == 0) ? zeros + 1 : 0;
        if (zeros >= 3) return false;
      }
      return true;
    }
    case 5: {
      int c0 = 0, c1 = 0;
      for (int t : body) (t == 0 ? c0 : c1)++;
      return c0 % 2 == 0 && c1 % 2 == 0;
    }
    case 6: {
      int diff = 0;
      for (int t : body) diff += (t == 0) ? 1 : -1;
      return ((diff % 3) + 3) % 3 == 0;
    }
    case 7: {
      size_t i = 0;
      const size_t n2 = body.size();
      for (int phase = 0; phase < 5; ++phase) {
        int want = (phase % 2 == 0) ? 0 : 1;
        while (i < n2 && body[i] == want) ++i;
      }
      return i == n2;
    }
    default:
      throw std::invalid_argument("tomita_oracle: grammar must be 1..7");
  }
}

// --- generators ------------------------------------------------------------------

namespace {

// Random balanced string with depth <= cap, letters as filler. `budget` is a
// soft cap on the number of emitted segments.
void bp_fill(std::vector<int>& out, int cap, int budget, Rng& rng) {
  int segments = 1 + rng.uniform_int(budget);
  for (int s = 0; s < segments; ++s) {
    double roll = rng.uniform();
    if (roll < 0.5 || cap == 0) {
      out.push_back(rng.uniform_int(26));  // letter
    } else {
      out.push_back(kBpOpen);
      if (budget > 1 && rng.uniform() < 0.6) bp_fill(out, cap - 1, budget / 2, rng);
      out.push_back(kBpClose);
    }
  }
}

// Balanced string whose max nesting depth is exactly `depth`, length <= max_len.
std::vector<int> bp_positive(int depth, int max_len, Rng& rng) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<int> s;
    int slack = max_len - 2 * depth;
    int budget = slack > 1 ? 1 + rng.uniform_int(std::min(slack, 8)) : 1;
    if (depth == 0) {
      s.clear();
      int len = rng.uniform_int(std::min(max_len, 12) + 1);
      for (int i = 0; i < len; ++i) s.push_back(rng.uniform_int(26));
    } else {
      // One chain guarantees the target depth; siblings stay at or below it.
      if (slack > 0 && rng.flip()) bp_fill(s, depth, std::max(1, budget / 2), rng);
      std::vector<int> suffix;
      for (int level = 0; level < depth; ++level) {
        s.push_back(kBpOpen);
        suffix.push_back(kBpClose);
        if (slack > 0 && rng.uniform() < 0.3) {
          int letters = 1 + rng.uniform_int(2);
          for (int i = 0; i < letters; ++i) s.push_back(rng.uniform_int(26));
        }
      }
      s.insert(s.end(), suffix.begin(), suffix.end());
      if (slack > 0 && rng.flip()) bp_fill(s, depth, std::max(1, budget / 2), rng);
    }
    if (static_cast<int>(s.size()) <= max_len && bp_depth(s) == depth && bp_oracle(s)) return s;
  }
  throw std::runtime_error("bp_positive: could not satisfy depth/length constraints");
}

// Single-edit corruption of a balanced string; any one-paren edit unbalances
// the counts, and the oracle re-check keeps the contract explicit.
std::vector<int> bp_negative(const std::vector<int>& positive, int max_len, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<int> s = positive;
    std::vector<int> paren_pos;
    for (int i = 0; i < static_cast<int>(s.size()); ++i)
      if (s[i] == kBpOpen || s[i] == kBpClose) paren_pos.push_back(i);
    int op = paren_pos.empty() ? 1 : rng.uniform_int(3);
    if (op == 0) {  // delete one paren
      s.erase(s.begin() + paren_pos[static_cast<size_t>(rng.uniform_int(
                  static_cast<int>(paren_pos.size())))]);
    } else if (op == 1) {  // insert one paren
      if (static_cast<int>(s.size()) >= max_len) continue;
      int pos = rng.uniform_int(static_cast<int>(s.size()) + 1);
      s.insert(s.begin() + pos, rng.flip() ? kBpOpen : kBpClose);
    } else {  // flip one paren
      int i = paren_pos[static_cast<size_t>(rng.uniform_int(static_cast<int>(paren_pos.size())))];
      s[i] = (s[i] == kBpOpen) ? kBpClose : kBpOpen;
    }
    if (!bp_oracle(s)) return s;
  }
  throw std::runtime_error("bp_negative: corruption failed to produce a rejecting string");
}

}  // namespace

Dataset bp_generate(int count, int depth_min, int depth_max, int max_len, double pos_neg_ratio,
                    Rng& rng) {
  if (count <= 0) throw std::invalid_argument("bp_generate: count must be positive");
  if (depth_min < 0 || depth_max < depth_min)
    throw std::invalid_argument("bp_generate: bad depth range");
  if (pos_neg_ratio <= 0.0) throw std::invalid_argument("bp_generate: ratio must be positive");
  if (2 * depth_max > max_len)
    throw std::invalid_argument("bp_generate: depth " + std::to_string(depth_max) +
                                " does not fit max_len " + std::to_string(max_len));
  int n_pos = static_cast<int>(
      std::lround(static_cast<double>(count) * pos_neg_ratio / (1.0 + pos_neg_ratio)));
  n_pos = std::min(std::max(n_pos, 1), count - 1);

  Dataset out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    int depth = depth_min + rng.uniform_int(depth_max - depth_min + 1);
    std::vector<int> pos = bp_positive(depth, max_len, rng);
    LabeledSequence ex;
    if (i < n_pos) {
      ex.tokens = std::move(pos);
      ex.label = 1;
    } else {
      ex.tokens = bp_negative(pos, max_len, rng);
      ex.label = 0;
    }
    ex.depth = bp_depth(ex.tokens);
    out.push_back(std::move(ex));
  }
  rng.shuffle(out);
  return out;
}

Dataset palindrome_generate(int count, int max_len, Rng& rng) {
  if (count <= 0 || max_len < 2)
    throw std::invalid_argument("palindrome_generate: bad count or max_len");
  int n_pos = count / 2;
  Dataset out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    LabeledSequence ex;
    int half = 1 + rng.uniform_int(max_len / 2);
    if (i < n_pos) {
      std::vector<int> w(static_cast<size_t>(half));
      for (auto& t : w) t = rng.uniform_int(26);
      ex.tokens = w;
      ex.tokens.insert(ex.tokens.end(), w.rbegin(), w.rend());
      ex.label = 1;
    } else {
      // Even lengths only, so length parity carries no label signal.
      do {
        ex.tokens.assign(static_cast<size_t>(2 * half), 0);
        for (auto& t : ex.tokens) t = rng.uniform_int(26);
      } while (palindrome_oracle(ex.tokens));
      ex.label = 0;
    }
    out.push_back(std::move(ex));
  }
  rng.shuffle(out);
  return out;
}

Dataset tomita_generate(int n, int count, int max_len, Rng& rng) {
  if (count <= 0 || max_len < 1) throw std::invalid_argument("tomita_generate: bad count/max_len");
  Dfa ref = tomita_reference_dfa(n);
  int n_pos = count / 2;
  int n_neg = count - n_pos;

  auto random_word = [&](int len) {
    std::vector<int> w(static_cast<size_t>(len));
    for (auto& t : w) t = rng.uniform_int(2);
    return w;
  };

  Dataset out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < n_pos; ++i) {
    std::vector<int> w;
    if (n == 1) {
      w.assign(static_cast<size_t>(rng.uniform_int(max_len + 1)), 1);
    } else if (n == 2) {
      int reps = rng.uniform_int(max_len / 2 + 1);
      for (int r = 0; r < reps; ++r) {
        w.push_back(1);
        w.push_back(0);
      }
    } else {
      int guard = 0;
      do {
        w = random_word(rng.uniform_int(max_len + 1));
        if (++guard > 100000)
          throw std::runtime_error("tomita_generate: positive sampling stalled");
      } while (!dfa_accepts(ref, w));
    }
    out.push_back({std::move(w), 1, -1});
  }
  for (int i = 0; i < n_neg; ++i) {
    std::vector<int> w;
    int guard = 0;
    do {
      w = random_word(rng.uniform_int(max_len + 1));
      if (++guard > 100000) throw std::runtime_error("tomita_generate: negative sampling stalled");
    } while (dfa_accepts(ref, w));
    out.push_back({std::move(w), 0, -1});
  }
  rng.shuffle(out);
  return out;
}

std::vector<Dataset> curriculum_split(const Dataset& data, int stages) {
  if (stages <= 0) throw std::invalid_argument("curriculum_split: stages must be positive");
  if (data.empty()) throw std::invalid_argument("curriculum_split: empty dataset");

  bool use_depth = std::any_of(data.begin(), data.end(),
                               [](const LabeledSequence& e) { return e.depth >= 0; });
  auto difficulty = [&](const LabeledSequence& e) {
    return use_depth ? e.depth : static_cast<int>(e.tokens.size());
  };

  std::set<int> values;
  for (const auto& e : data) values.insert(difficulty(e));
  std::vector<int> sorted(values.begin(), values.end());
  const int v = static_cast<int>(sorted.size());

  std::vector<Dataset> out;
  for (int i = 1; i <= stages; ++i) {
    int take = std::max(1, v * i / stages);
    if (i == stages) take = v;
    int cutoff = sorted[static_cast<size_t>(take - 1)];
    Dataset stage;
    for (const auto& e : data)
      if (difficulty(e) <= cutoff) stage.push_back(e);
    out.push_back(std::move(stage));
  }
  return out;
}

// --- JSONL -------------------------------------------------------------------------

void save_dataset_jsonl(const Dataset& data, const Alphabet& alphabet, const std::string& path) {
  std::string body;
  for (const auto& e : data) {
    nlohmann::ordered_json j;
    std::vector<std::string> toks;
    toks.reserve(e.tokens.size());
    for (int t : e.tokens) {
      if (t < 0 || t >= alphabet.body_size())
        throw std::invalid_argument("save_dataset_jsonl: body token id out of range");
      toks.push_back(alphabet.token(t));
    }
    j["tokens"] = toks;
    j["label"] = e.label;
    j["depth"] = e.depth;
    j["length"] = e.tokens.size();
    body += j.dump();
    body += '\n';
  }
  write_file_atomic(path, body);
}

Dataset load_dataset_jsonl(const std::string& path, const Alphabet& alphabet) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file '" + path + "'");
  Dataset out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    LabeledSequence ex;
    for (const auto& t : j.at("tokens")) {
      int id = alphabet.id(t.get<std::string>());
      if (id >= alphabet.body_size())
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": reserved token in body");
      ex.tokens.push_back(id);
    }
    ex.label = j.at("label").get<int>();
    if (j.contains("depth")) ex.depth = j.at("depth").get<int>();
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace sr
