#include "sr/automata.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sr {

void Dfa::validate() const {
  const int n = num_states();
  const int m = static_cast<int>(alphabet.size());
  if (n == 0) throw std::invalid_argument("dfa: no states");
  if (static_cast<int>(labels.size()) != n || static_cast<int>(accepting.size()) != n)
    throw std::invalid_argument("dfa: labels/accepting size mismatch");
  if (start < 0 || start >= n) throw std::invalid_argument("dfa: start state out of range");
  for (const auto& row : delta) {
    if (static_cast<int>(row.size()) != m)
      throw std::invalid_argument("dfa: transition table is not total");
    for (int t : row)
      if (t < 0 || t >= n) throw std::invalid_argument("dfa: transition target out of range");
  }
}

int Dfa::symbol_id(const std::string& token) const {
  for (int i = 0; i < static_cast<int>(alphabet.size()); ++i)
    if (alphabet[i] == token) return i;
  throw std::invalid_argument("dfa: token '" + token + "' not in alphabet");
}

bool dfa_accepts(const Dfa& d, const std::vector<int>& word) {
  int q = d.start;
  for (int s : word) {
    if (s < 0 || s >= static_cast<int>(d.alphabet.size()))
      throw std::invalid_argument("dfa_accepts: symbol id out of range");
    q = d.delta[q][s];
  }
  return d.accepting[q];
}

bool dfa_accepts(const Dfa& d, const std::vector<std::string>& word) {
  std::vector<int> ids;
  ids.reserve(word.size());
  for (const auto& t : word) ids.push_back(d.symbol_id(t));
  return dfa_accepts(d, ids);
}

namespace {

// Reachable states in BFS order from start.
std::vector<int> reachable_order(const Dfa& d) {
  std::vector<int> order;
  std::vector<bool> seen(d.delta.size(), false);
  std::deque<int> q{d.start};
  seen[d.start] = true;
  while (!q.empty()) {
    int s = q.front();
    q.pop_front();
    order.push_back(s);
    for (int t : d.delta[s])
      if (!seen[t]) {
        seen[t] = true;
        q.push_back(t);
      }
  }
  return order;
}

Dfa restrict_to(const Dfa& d, const std::vector<int>& keep) {
  std::vector<int> remap(d.delta.size(), -1);
  for (int i = 0; i < static_cast<int>(keep.size()); ++i) remap[keep[i]] = i;
  Dfa out;
  out.alphabet = d.alphabet;
  out.start = remap[d.start];
  for (int s : keep) {
    out.labels.push_back(d.labels[s]);
    out.accepting.push_back(d.accepting[s]);
    std::vector<int> row;
    row.reserve(d.alphabet.size());
    for (int t : d.delta[s]) row.push_back(remap[t]);
    out.delta.push_back(std::move(row));
  }
  return out;
}

}  // namespace

Dfa minimize(const Dfa& d) {
  d.validate();
  Dfa trimmed = restrict_to(d, reachable_order(d));
  const int n = trimmed.num_states();
  const int m = static_cast<int>(trimmed.alphabet.size());

  // Hopcroft: refine {F, Q\F} with (block, symbol) splitters.
  std::vector<int> block_of(n, 0);
  std::vector<std::vector<int>> blocks;
  {
    std::vector<int> acc, rej;
    for (int s = 0; s < n; ++s) (trimmed.accepting[s] ? acc : rej).push_back(s);
    if (!acc.empty()) blocks.push_back(acc);
    if (!rej.empty()) blocks.push_back(rej);
    for (int b = 0; b < static_cast<int>(blocks.size()); ++b)
      for (int s : blocks[b]) block_of[s] = b;
  }

  // Reverse transitions: rev[symbol][state] = predecessors.
  std::vector<std::vector<std::vector<int>>> rev(m, std::vector<std::vector<int>>(n));
  for (int s = 0; s < n; ++s)
    for (int a = 0; a < m; ++a) rev[a][trimmed.delta[s][a]].push_back(s);

  std::deque<std::pair<int, int>> work;  // (block, symbol)
  for (int b = 0; b < static_cast<int>(blocks.size()); ++b)
    for (int a = 0; a < m; ++a) work.emplace_back(b, a);

  std::vector<int> touched_count;  // per block: members hit by the splitter
  std::vector<std::vector<int>> touched_members;

  while (!work.empty()) {
    auto [splitter, symbol] = work.front();
    work.pop_front();

    // X = predecessors of the splitter block under `symbol`.
    std::set<int> hit_blocks;
    touched_count.assign(blocks.size(), 0);
    touched_members.assign(blocks.size(), {});
    for (int t : blocks[splitter])
      for (int s : rev[symbol][t]) {
        int b = block_of[s];
        if (touched_members[b].empty()) hit_blocks.insert(b);
        touched_members[b].push_back(s);
        ++touched_count[b];
      }

    for (int b : hit_blocks) {
      if (touched_count[b] == static_cast<int>(blocks[b].size())) continue;  // no split
      // Split block b into touched / untouched.
      std::vector<int> inside = touched_members[b];
      std::vector<bool> is_inside(n, false);
      for (int s : inside) is_inside[s] = true;
      std::vector<int> outside;
      for (int s : blocks[b])
        if (!is_inside[s]) outside.push_back(s);

      int nb = static_cast<int>(blocks.size());
      blocks[b] = std::move(inside);
      blocks.push_back(std::move(outside));
      for (int s : blocks[nb]) block_of[s] = nb;

      // Queue both halves for every symbol. (The smaller-half trick needs
      // in-place replacement of stale worklist entries to stay correct;
      // queueing both is unconditionally sound and cheap at this scale.)
      for (int a = 0; a < m; ++a) {
        work.emplace_back(b, a);
        work.emplace_back(nb, a);
      }
      touched_members.emplace_back();
      touched_count.push_back(0);
    }
  }

  // Quotient automaton; block order fixed by the lowest member state so the
  // output is deterministic.
  std::vector<int> block_order(blocks.size());
  for (int b = 0; b < static_cast<int>(blocks.size()); ++b) {
    block_order[b] = *std::min_element(blocks[b].begin(), blocks[b].end());
  }
  std::vector<int> perm(blocks.size());
  for (int i = 0; i < static_cast<int>(perm.size()); ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(),
            [&](int x, int y) { return block_order[x] < block_order[y]; });
  std::vector<int> new_id(blocks.size());
  for (int i = 0; i < static_cast<int>(perm.size()); ++i) new_id[perm[i]] = i;

  Dfa out;
  out.alphabet = trimmed.alphabet;
  out.labels.resize(blocks.size());
  out.accepting.resize(blocks.size());
  out.delta.resize(blocks.size());
  for (int b = 0; b < static_cast<int>(blocks.size()); ++b) {
    int rep = block_order[b];
    int id = new_id[b];
    out.labels[id] = trimmed.labels[rep];
    out.accepting[id] = trimmed.accepting[rep];
    out.delta[id].resize(m);
    for (int a = 0; a < m; ++a) out.delta[id][a] = new_id[block_of[trimmed.delta[rep][a]]];
  }
  out.start = new_id[block_of[trimmed.start]];
  out.validate();
  return out;
}

EquivResult equivalent(const Dfa& a, const Dfa& b) {
  a.validate();
  b.validate();
  if (a.alphabet != b.alphabet)
    throw std::invalid_argument("equivalent: alphabets differ");
  const int m = static_cast<int>(a.alphabet.size());
  const int nb = b.num_states();

  auto key = [nb](int x, int y) { return x * nb + y; };
  std::map<int, std::pair<int, int>> parent;  // pair key -> (parent key, symbol)
  std::deque<std::pair<int, int>> q;
  q.emplace_back(a.start, b.start);
  parent[key(a.start, b.start)] = {-1, -1};

  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop_front();
    if (a.accepting[x] != b.accepting[y]) {
      // Walk the BFS tree back for the (shortest) counterexample.
      std::vector<int> word;
      int cur = key(x, y);
      while (parent[cur].first != -1) {
        word.push_back(parent[cur].second);
        cur = parent[cur].first;
      }
      std::reverse(word.begin(), word.end());
      return EquivResult{false, word};
    }
    for (int s = 0; s < m; ++s) {
      int nx = a.delta[x][s], ny = b.delta[y][s];
      int kk = key(nx, ny);
      if (!parent.count(kk)) {
        parent[kk] = {key(x, y), s};
        q.emplace_back(nx, ny);
      }
    }
  }
  return EquivResult{true, {}};
}

std::string to_dot(const Dfa& d) {
  d.validate();
  std::ostringstream os;
  os << "digraph dfa {\n";
  os << "  rankdir=LR;\n";
  os << "  __start [shape=point];\n";
  for (int s = 0; s < d.num_states(); ++s) {
    os << "  q" << s << " [label=\"" << d.labels[s] << "\", shape="
       << (d.accepting[s] ? "doublecircle" : "circle") << "];\n";
  }
  os << "  __start -> q" << d.start << ";\n";
  // One edge per (state, target), symbols joined, everything in fixed order.
  for (int s = 0; s < d.num_states(); ++s) {
    std::map<int, std::vector<std::string>> by_target;
    for (int a = 0; a < static_cast<int>(d.alphabet.size()); ++a)
      by_target[d.delta[s][a]].push_back(d.alphabet[a]);
    for (const auto& [t, symbols] : by_target) {
      os << "  q" << s << " -> q" << t << " [label=\"";
      for (size_t i = 0; i < symbols.size(); ++i) {
        if (i) os << ",";
        os << symbols[i];
      }
      os << "\"];\n";
    }
  }
  os << "}\n";
  return os.str();
}

nlohmann::ordered_json dfa_to_json(const Dfa& d) {
  d.validate();
  nlohmann::ordered_json j;
  j["alphabet"] = d.alphabet;
  j["labels"] = d.labels;
  j["start"] = d.start;
  j["accepting"] = std::vector<int>(d.accepting.begin(), d.accepting.end());
  j["delta"] = d.delta;
  return j;
}

Dfa dfa_from_json(const nlohmann::json& j) {
  Dfa d;
  d.alphabet = j.at("alphabet").get<std::vector<std::string>>();
  d.labels = j.at("labels").get<std::vector<std::string>>();
  d.start = j.at("start").get<int>();
  for (int v : j.at("accepting").get<std::vector<int>>()) d.accepting.push_back(v != 0);
  d.delta = j.at("delta").get<std::vector<std::vector<int>>>();
  d.validate();
  return d;
}

Dfa extract_dfa(ExtractionWalker& walker, const std::vector<std::vector<int>>& sequences,
                const std::vector<std::string>& alphabet, ExtractionRule rule,
                TransitionStats* stats_out) {
  if (sequences.empty()) throw std::invalid_argument("extract_dfa: empty dataset");
  const int m = static_cast<int>(alphabet.size());
  const int k = walker.state_count();

  TransitionStats stats;
  int q0 = -1;
  for (const auto& seq : sequences) {
    int q = walker.begin();
    if (q0 == -1) q0 = q;
    for (int sym : seq) {
      if (sym < 0 || sym >= m)
        throw std::invalid_argument("extract_dfa: symbol id out of range");
      auto [next, p] = walker.step(sym);
      auto& cell = stats.table[{q, sym, next}];
      cell.count += 1;
      cell.prob_sum += p;
      q = next;
    }
  }

  // delta over observed (state, symbol) pairs; -1 marks "unseen" for now.
  std::vector<std::vector<int>> delta(k, std::vector<int>(m, -1));
  {
    // Group table entries per (state, symbol); map order makes ties resolve
    // to the lowest next state on equal scores.
    int cs = -1, ca = -1;
    double best_score = 0.0;
    int best_next = -1;
    auto flush = [&]() {
      if (cs >= 0) delta[cs][ca] = best_next;
    };
    for (const auto& [key, cell] : stats.table) {
      auto [s, a, next] = key;
      double score = (rule == ExtractionRule::Counts)
                         ? static_cast<double>(cell.count)
                         : cell.prob_sum / static_cast<double>(cell.count);
      if (s != cs || a != ca) {
        flush();
        cs = s;
        ca = a;
        best_score = score;
        best_next = next;
      } else if (score > best_score) {
        best_score = score;
        best_next = next;
      }
    }
    flush();
  }

  // Reachable centroids from q0 under the chosen delta; unseen cells lead to
  // the sink.
  std::vector<bool> seen(k, false);
  bool sink_used = false;
  std::deque<int> bfs{q0};
  seen[q0] = true;
  std::vector<int> kept;
  while (!bfs.empty()) {
    int s = bfs.front();
    bfs.pop_front();
    kept.push_back(s);
    for (int a = 0; a < m; ++a) {
      int t = delta[s][a];
      if (t < 0) {
        sink_used = true;
      } else if (!seen[t]) {
        seen[t] = true;
        bfs.push_back(t);
      }
    }
  }
  std::sort(kept.begin(), kept.end());

  Dfa out;
  out.alphabet = alphabet;
  std::vector<int> remap(k, -1);
  for (int i = 0; i < static_cast<int>(kept.size()); ++i) {
    remap[kept[i]] = i;
    out.labels.push_back(std::to_string(kept[i]));
    out.accepting.push_back(walker.accepting(kept[i]));
  }
  int sink = -1;
  if (sink_used) {
    sink = static_cast<int>(kept.size());
    out.labels.push_back("sink");
    out.accepting.push_back(false);
  }
  for (int s : kept) {
    std::vector<int> row(m, sink);
    for (int a = 0; a < m; ++a)
      if (delta[s][a] >= 0) row[a] = remap[delta[s][a]];
    out.delta.push_back(std::move(row));
  }
  if (sink_used) out.delta.push_back(std::vector<int>(m, sink));
  out.start = remap[q0];
  out.validate();
  if (stats_out) *stats_out = std::move(stats);
  return out;
}

}  // namespace sr
