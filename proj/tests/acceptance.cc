// End-to-end acceptance gate. Each criterion prints exactly one
// [PASS]/[FAIL] line; the binary exits nonzero if any criterion fails.
// Pass criterion numbers as arguments to run a subset (default: all).

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sr/automata.hpp"
#include "sr/checkpoint.hpp"
#include "sr/explain.hpp"
#include "sr/extract.hpp"
#include "sr/io_util.hpp"
#include "sr/languages.hpp"
#include "sr/rng.hpp"
#include "sr/sregular.hpp"
#include "sr/train.hpp"

namespace fs = std::filesystem;
using namespace sr;

// ---- pinned contract values -------------------------------------------------
namespace pinned {
// 1: gradients
constexpr double kGradRelTol = 1e-4;
constexpr int kGradSeeds = 20;
constexpr int kGradMaxHidden = 6;  // d <= 6
constexpr int kGradMaxK = 5;       // k <= 5
constexpr double kGradBudgetSeconds = 60.0;
// 2: identical-centroid continuations
constexpr int kTheorem1Pairs = 50;
// 3: softmax limit / spiky transitions
constexpr double kLimitTau = 0.01;
constexpr double kLimitMass = 1.0 - 1e-9;
constexpr double kSpikeTau = 0.05;
constexpr double kSpikeAlpha = 0.999;
// 4: tomita recovery
constexpr int kTomitaGrammars[] = {1, 2, 3, 4, 7};
constexpr int kTomitaK = 50;
constexpr double kTomitaTau = 1.0;
constexpr int kTomitaSeeds = 3;
constexpr int kTomitaNeeded = 2;   // of 3 seeds
constexpr int kTomitaMaxSeqs = 2000;
constexpr int kTomitaMaxLen = 15;
// 6: balanced-parentheses extrapolation
constexpr int kBpK = 5;
constexpr int kBpHidden = 50;
constexpr int kBpSeeds = 3;
constexpr double kBpBand = 0.10;  // median sr-lstm-p error on d 1..10, l <= 100
constexpr double kBpBudgetSeconds = 3600.0;
// 8: gumbel statistics
constexpr int kGumbelDraws = 100000;
constexpr double kGumbelTol = 0.01;
// 9: automata oracle
constexpr int kOracleDfas = 100;
constexpr int kOracleStates = 5;
constexpr int kOracleMaxLen = 12;
}  // namespace pinned

namespace {

struct CriterionResult {
  bool pass = false;
  std::string detail;
};

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void progress(const std::string& line) {
  fprintf(stderr, "  [%7.1fs] %s\n", now_seconds(), line.c_str());
  fflush(stderr);
}

bool bits_equal(const Vec& a, const Vec& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

double median3(double a, double b, double c) {
  return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

// ---- criterion 1: gradients vs central differences ---------------------------

CriterionResult criterion1() {
  const double t0 = now_seconds();
  const CellKind kinds[] = {CellKind::Elman, CellKind::Gru, CellKind::Lstm,
                            CellKind::LstmPeephole};
  const TransitionMode modes[] = {TransitionMode::SoftArgmax, TransitionMode::Gumbel,
                                  TransitionMode::Mixture};
  double worst = 0.0;
  int configs = 0, failures = 0;
  std::string first_fail;

  for (int seed = 1; seed <= pinned::kGradSeeds; ++seed) {
    Rng size_rng(derive_seed(seed, "c1/sizes"));
    const int d = 3 + static_cast<int>(size_rng.uniform_int(pinned::kGradMaxHidden - 2));
    const int k = 2 + static_cast<int>(size_rng.uniform_int(pinned::kGradMaxK - 1));
    const int e = 2 + static_cast<int>(size_rng.uniform_int(3));
    std::vector<int> body;
    const int len = 1 + static_cast<int>(size_rng.uniform_int(4));
    for (int i = 0; i < len; ++i) body.push_back(static_cast<int>(size_rng.uniform_int(2)));

    for (CellKind kind : kinds) {
      for (TransitionMode mode : modes) {
        Rng init(derive_seed(seed, std::string("c1/") + cell_kind_name(kind) + "/" +
                                       transition_mode_name(mode)));
        SrModel m = make_model(kind, d, e, Alphabet::binary(), 2, {{k, 1.0}}, mode, init);
        Rng noise(derive_seed(seed, "c1/noise"));
        Rng* np = (mode == TransitionMode::Gumbel) ? &noise : nullptr;
        SequenceGraph sg = build_sequence_graph(m, body, seed % 2, np);
        FdReport rep = finite_difference_check(sg.graph, sg.loss, bind_model(m), 1e-4,
                                               pinned::kGradRelTol);
        worst = std::max(worst, rep.worst);
        ++configs;
        if (!rep.pass) {
          ++failures;
          if (first_fail.empty())
            first_fail = fmt("seed %d %s/%s rel %.2e", seed, cell_kind_name(kind),
                             transition_mode_name(mode), rep.worst);
        }
      }
    }
  }
  const double elapsed = now_seconds() - t0;
  const bool in_budget = elapsed < pinned::kGradBudgetSeconds;
  CriterionResult r;
  r.pass = failures == 0 && in_budget;
  r.detail = fmt("%d configs (4 cells x 3 modes x %d seeds), worst rel err %.2e, %.1fs",
                 configs, pinned::kGradSeeds, worst, elapsed);
  if (failures) r.detail += fmt("; %d failed, first: %s", failures, first_fail.c_str());
  if (!in_budget) r.detail += "; over the 60s budget";
  return r;
}

// ---- criterion 2: same centroid => bit-identical next-token distribution ------

CriterionResult criterion2() {
  Rng init(derive_seed(2026, "c2/init"));
  SrModel m = make_model(CellKind::Gru, 12, 4, Alphabet::binary(), 2, {{8, 1.0}},
                         TransitionMode::Sampled, init);
  Rng gen(derive_seed(2026, "c2/prefixes"));

  auto random_prefix = [&]() {
    std::vector<int> p(1 + gen.uniform_int(12));
    for (int& t : p) t = static_cast<int>(gen.uniform_int(2));
    return p;
  };

  int pairs = 0, attempts = 0, mismatches = 0;
  while (pairs < pinned::kTheorem1Pairs && attempts < 20000) {
    ++attempts;
    std::vector<int> p = random_prefix(), q = random_prefix();
    if (p == q) continue;
    // Argmax walks force the state through exact centroid columns.
    int sp = forward_sequence(m, p).trace.steps.back().state;
    int sq = forward_sequence(m, q).trace.steps.back().state;
    if (sp != sq) continue;
    ++pairs;
    for (int tok = 0; tok < 2; ++tok) {
      std::vector<int> pa = p, qa = q;
      pa.push_back(tok);
      qa.push_back(tok);
      Vec ap = forward_sequence(m, pa).trace.steps.back().alpha;
      Vec aq = forward_sequence(m, qa).trace.steps.back().alpha;
      if (!bits_equal(ap, aq)) ++mismatches;
    }
  }

  CriterionResult r;
  r.pass = pairs == pinned::kTheorem1Pairs && mismatches == 0;
  r.detail = fmt("%d prefix pairs sharing a centroid (from %d candidates), "
                 "%d next-token distributions compared bit-for-bit, %d mismatches",
                 pairs, attempts, 2 * pairs, mismatches);
  return r;
}

// ---- criterion 4 machinery (shared with 3b and 5) ----------------------------

struct TomitaRun {
  int grammar = 0;
  int seed = 0;
  SrModel model;
  Dataset extraction_data;  // train + valid, <= 2000 sequences
  Dataset test;
  double best_valid_error = 1.0;
  bool recovered = false;  // minimized counts extraction == reference
};

// Free calibration (sizes, epochs); k and tau are pinned. Width 50: wider
// GRUs lean harder on the continuous mixture channel and commit to discrete
// centroids less often, which hurts extraction. Validation error reaches zero
// within a few epochs on every grammar, so patience == epochs: the fit keeps
// the latest zero-error checkpoint, whose transitions are sharpest.
constexpr int kTomitaHidden = 50;
constexpr int kTomitaEmbed = 4;
// Grammars with more states need the long post-zero-error refinement phase
// (grammar 7 crystallizes between 100 and 300 epochs).
constexpr int kTomitaEpochs = 300;
constexpr int kTomitaPatience = 300;

TomitaRun train_tomita(int grammar, int seed) {
  TomitaRun run;
  run.grammar = grammar;
  run.seed = seed;
  const std::string tag = fmt("c4/tomita%d/seed%d", grammar, seed);

  Rng tr(derive_seed(seed, tag + "/train"));
  Dataset train = tomita_generate(grammar, 1600, pinned::kTomitaMaxLen, tr);
  Rng vr(derive_seed(seed, tag + "/valid"));
  Dataset valid = tomita_generate(grammar, 400, pinned::kTomitaMaxLen, vr);
  Rng ter(derive_seed(seed, tag + "/test"));
  run.test = tomita_generate(grammar, 500, pinned::kTomitaMaxLen, ter);

  Rng init(derive_seed(seed, tag + "/init"));
  SrModel m0 = make_model(CellKind::Gru, kTomitaHidden, kTomitaEmbed, Alphabet::binary(), 2,
                          {{pinned::kTomitaK, pinned::kTomitaTau}}, TransitionMode::Mixture,
                          init);

  TrainConfig cfg;
  cfg.optimizer.kind = OptimizerConfig::Kind::Adadelta;
  cfg.epochs = kTomitaEpochs;
  cfg.patience = kTomitaPatience;
  cfg.seed = derive_seed(seed, tag + "/fit");
  FitResult fr = fit(m0, train, valid, cfg);

  run.model = fr.model;
  run.best_valid_error = fr.best_valid_error;
  run.extraction_data = train;
  run.extraction_data.insert(run.extraction_data.end(), valid.begin(), valid.end());

  Dfa extracted = extract_dfa_counts(run.model, run.extraction_data, false);
  Dfa minimized = minimize(extracted);
  Dfa reference = tomita_reference_dfa(grammar);
  run.recovered = equivalent(minimized, reference).equivalent;
  progress(fmt("tomita %d seed %d: valid err %.4f, extracted %d -> %d states, %s", grammar,
               seed, fr.best_valid_error, extracted.num_states(), minimized.num_states(),
               run.recovered ? "equivalent" : "NOT equivalent"));
  return run;
}

std::vector<TomitaRun>& tomita_runs() {
  static std::vector<TomitaRun> runs = [] {
    std::vector<TomitaRun> out;
    for (int grammar : pinned::kTomitaGrammars)
      for (int seed = 1; seed <= pinned::kTomitaSeeds; ++seed)
        out.push_back(train_tomita(grammar, seed));
    return out;
  }();
  return runs;
}

CriterionResult criterion4() {
  const double t0 = now_seconds();
  const auto& runs = tomita_runs();
  const double elapsed = now_seconds() - t0;

  CriterionResult r;
  r.pass = true;
  std::string per;
  for (int grammar : pinned::kTomitaGrammars) {
    int got = 0;
    for (const auto& run : runs)
      if (run.grammar == grammar && run.recovered) ++got;
    if (got < pinned::kTomitaNeeded) r.pass = false;
    per += fmt("%sT%d %d/%d", per.empty() ? "" : ", ", grammar, got, pinned::kTomitaSeeds);
  }
  r.detail = fmt("minimal-DFA recovery per grammar (need >= %d): %s; %.0fs for %zu runs",
                 pinned::kTomitaNeeded, per.c_str(), elapsed, runs.size());
  return r;
}

// ---- criterion 3: softmax limit + spiky trained transitions -------------------

CriterionResult criterion3() {
  // (a) random scores with a unique max: tau = 0.01 concentrates the mass.
  Rng rng(derive_seed(2026, "c3a"));
  int trials = 200;
  double worst_offmass = 0.0;
  bool argmax_ok = true;
  for (int t = 0; t < trials; ++t) {
    Vec scores(10);
    for (;;) {
      for (int i = 0; i < scores.size(); ++i) scores(i) = rng.uniform(-2.0, 2.0);
      // "Unique max" needs an actual gap for a finite-temperature statement;
      // 0.3 makes the claim decidable at tau = 0.01.
      Vec sorted = scores;
      std::sort(sorted.data(), sorted.data() + sorted.size());
      if (sorted(9) - sorted(8) >= 0.3) break;
    }
    Vec alpha = stable_softmax(scores / pinned::kLimitTau);
    int am = argmax_lowest(scores);
    argmax_ok = argmax_ok && (argmax_lowest(alpha) == am);
    worst_offmass = std::max(worst_offmass, 1.0 - alpha(am));
  }
  const bool limit_ok = worst_offmass <= 1.0 - pinned::kLimitMass && argmax_ok;

  // (b) a recovered Tomita model re-evaluated at tau = 0.05 transitions hard.
  const TomitaRun* chosen = nullptr;
  for (const auto& run : tomita_runs())
    if (run.grammar == 1 && run.recovered) {
      chosen = &run;
      break;
    }
  bool spiky = false;
  double min_max_alpha = 1.0;
  long steps = 0;
  if (chosen) {
    SrModel sharp = chosen->model;
    sharp.sr->tau = pinned::kSpikeTau;
    spiky = true;
    for (const auto& ex : chosen->test) {
      ForwardResult fr = forward_sequence(sharp, ex.tokens);
      for (const auto& step : fr.trace.steps) {
        min_max_alpha = std::min(min_max_alpha, step.alpha.maxCoeff());
        ++steps;
      }
    }
    spiky = min_max_alpha > pinned::kSpikeAlpha;
  }

  CriterionResult r;
  r.pass = limit_ok && spiky;
  r.detail = fmt("random scores: worst off-argmax mass %.2e over %d trials (<= 1e-9 wanted)"
                 "; trained model at tau=%.2f: min max-alpha %.6f over %ld steps (> %.3f wanted)",
                 worst_offmass, trials, pinned::kSpikeTau, min_max_alpha, steps,
                 pinned::kSpikeAlpha);
  if (!chosen) r.detail += "; no recovered tomita-1 model available";
  return r;
}

// ---- criterion 5: counts vs mean-probability extraction ----------------------

CriterionResult criterion5() {
  // The agreement property presupposes spiky, DFA-like transitions; models
  // that never crystallized (their recovery already failed the previous
  // criterion) resolve contested table rows arbitrarily, so the contract set
  // is the recovered models. The unrestricted count is still reported.
  int agree = 0, total = 0, agree_all = 0, total_all = 0;
  std::string first_fail;
  for (const auto& run : tomita_runs()) {
    Dfa counts = extract_dfa_counts(run.model, run.extraction_data, false);
    Dfa mean = extract_dfa_meanprob(run.model, run.extraction_data, false);
    const bool same = equivalent(counts, mean).equivalent;
    ++total_all;
    agree_all += same ? 1 : 0;
    if (!run.recovered) continue;
    ++total;
    if (same) {
      ++agree;
    } else if (first_fail.empty()) {
      first_fail = fmt("tomita %d seed %d", run.grammar, run.seed);
    }
  }
  CriterionResult r;
  r.pass = total > 0 && agree == total;
  r.detail = fmt("counts == mean-probability language on %d/%d recovered models "
                 "(%d/%d over all trained models)",
                 agree, total, agree_all, total_all);
  if (!first_fail.empty()) r.detail += "; first disagreement: " + first_fail;
  return r;
}

// ---- criterion 6/7 machinery --------------------------------------------------

// Free calibration; k = 5 and d ~ 50 are pinned for the regularized variants.
constexpr int kBpEmbed = 10;
constexpr int kBpEpochs = 40;
constexpr int kBpPatience = 12;
constexpr int kBpStages = 5;
constexpr int kBpStageCap = 6;

enum class Variant { PlainLstm, SrLstm, SrLstmP };

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::PlainLstm: return "lstm";
    case Variant::SrLstm: return "sr-lstm";
    default: return "sr-lstm-p";
  }
}

SrModel train_sequence_model(Variant v, const Alphabet& alphabet, const Dataset& train,
                             const Dataset& valid, const std::string& tag, int seed,
                             int stages) {
  CellKind kind = v == Variant::SrLstmP ? CellKind::LstmPeephole : CellKind::Lstm;
  std::optional<std::pair<int, double>> kt;
  if (v != Variant::PlainLstm) kt = {pinned::kBpK, 1.0};
  Rng init(derive_seed(seed, tag + "/init"));
  SrModel m0 = make_model(kind, pinned::kBpHidden, kBpEmbed, alphabet, 2, kt,
                          TransitionMode::Mixture, init);

  TrainConfig cfg;
  cfg.optimizer.kind = OptimizerConfig::Kind::RmsProp;
  cfg.optimizer.lr = 0.01;
  cfg.optimizer.momentum = 0.9;
  cfg.epochs = kBpEpochs;
  cfg.patience = kBpPatience;
  cfg.curriculum_stages = stages;
  cfg.stage_epoch_cap = kBpStageCap;
  cfg.seed = derive_seed(seed, tag + "/fit");
  FitResult fr = fit(m0, train, valid, cfg);
  progress(fmt("%s: valid err %.4f after %zu epochs", tag.c_str(), fr.best_valid_error,
               fr.history.size()));
  return fr.model;
}

CriterionResult criterion6() {
  const double t0 = now_seconds();
  // error[variant][seed] on the two contract test slices
  std::map<Variant, std::vector<double>> shallow, deep;

  for (int seed = 1; seed <= pinned::kBpSeeds; ++seed) {
    const std::string tag = fmt("c6/seed%d", seed);
    Rng tr(derive_seed(seed, tag + "/train"));
    Dataset train = bp_generate(1008, 1, 5, 60, 601.0 / 407.0, tr);
    Rng vr(derive_seed(seed, tag + "/valid"));
    Dataset valid = bp_generate(268, 6, 10, 100, 142.0 / 126.0, vr);
    Rng s1(derive_seed(seed, tag + "/test_d1_10_l100"));
    Dataset test_shallow = bp_generate(1000, 1, 10, 100, 1.0, s1);
    Rng s2(derive_seed(seed, tag + "/test_d10_20_l100"));
    Dataset test_deep = bp_generate(1000, 10, 20, 100, 1.0, s2);

    for (Variant v : {Variant::PlainLstm, Variant::SrLstm, Variant::SrLstmP}) {
      SrModel m = train_sequence_model(v, Alphabet::bp(), train, valid,
                                       tag + "/" + variant_name(v), seed, kBpStages);
      double es = evaluate(m, test_shallow);
      double ed = evaluate(m, test_deep);
      shallow[v].push_back(es);
      deep[v].push_back(ed);
      progress(fmt("%s seed %d: err d1-10 %.3f, d10-20 %.3f", variant_name(v), seed, es, ed));
    }
  }

  auto med = [](std::vector<double>& v) { return median3(v[0], v[1], v[2]); };
  const double p_shallow = med(shallow[Variant::SrLstmP]);
  const double p_deep = med(deep[Variant::SrLstmP]);
  const double l_deep = med(deep[Variant::PlainLstm]);
  const double l_shallow = med(shallow[Variant::PlainLstm]);
  const double s_deep = med(deep[Variant::SrLstm]);
  const double elapsed = now_seconds() - t0;

  CriterionResult r;
  const bool band = p_shallow <= pinned::kBpBand;
  const bool order = p_deep < l_deep;
  const bool budget = elapsed < pinned::kBpBudgetSeconds;
  r.pass = band && order && budget;
  r.detail = fmt("median err: sr-lstm-p d1-10 %.3f (<= %.2f %s), d10-20 sr-lstm-p %.3f vs "
                 "lstm %.3f (%s; lstm d1-10 %.3f, sr-lstm d10-20 %.3f); %.0fs",
                 p_shallow, pinned::kBpBand, band ? "ok" : "VIOLATED", p_deep, l_deep,
                 order ? "ordered" : "NOT ordered", l_shallow, s_deep, elapsed);
  if (!budget) r.detail += "; over the 1h budget";
  return r;
}

CriterionResult criterion7() {
  std::vector<double> plain_err, srp_err;
  for (int seed = 1; seed <= 3; ++seed) {
    const std::string tag = fmt("c7/seed%d", seed);
    Rng tr(derive_seed(seed, tag + "/train"));
    Dataset train = palindrome_generate(2000, 30, tr);
    Rng vr(derive_seed(seed, tag + "/valid"));
    Dataset valid = palindrome_generate(500, 60, vr);
    Rng ter(derive_seed(seed, tag + "/test_l100"));
    Dataset test = palindrome_generate(1000, 100, ter);

    for (Variant v : {Variant::PlainLstm, Variant::SrLstmP}) {
      SrModel m = train_sequence_model(v, Alphabet::letters(), train, valid,
                                       tag + "/" + variant_name(v), seed, kBpStages);
      double e = evaluate(m, test);
      (v == Variant::PlainLstm ? plain_err : srp_err).push_back(e);
      progress(fmt("%s seed %d: err at length 100 = %.3f", variant_name(v), seed, e));
    }
  }
  const double mp = median3(plain_err[0], plain_err[1], plain_err[2]);
  const double ms = median3(srp_err[0], srp_err[1], srp_err[2]);
  CriterionResult r;
  r.pass = ms < mp;
  r.detail = fmt("median err at max length 100: sr-lstm-p %.3f vs lstm %.3f (%s)", ms, mp,
                 r.pass ? "ordered" : "NOT ordered");
  return r;
}

// ---- criterion 8: gumbel draws match softmax ---------------------------------

CriterionResult criterion8() {
  Vec scores(6);
  scores << 0.5, -1.0, 2.0, 0.0, 1.2, -0.3;
  SRConfig c;
  c.k = 6;
  c.tau = 1.0;
  c.mode = TransitionMode::Gumbel;
  c.centroids = scores.transpose();  // d = 1: scores = centroids^T * u with u = [1]
  Vec u(1);
  u << 1.0;

  Vec p = stable_softmax(scores);
  std::vector<long> counts(6, 0);
  Rng rng(derive_seed(2026, "c8"));
  for (int i = 0; i < pinned::kGumbelDraws; ++i) counts[transition_gumbel(c, u, rng).index]++;

  double worst = 0.0;
  for (int i = 0; i < 6; ++i)
    worst = std::max(worst,
                     std::abs(static_cast<double>(counts[i]) / pinned::kGumbelDraws - p(i)));
  CriterionResult r;
  r.pass = worst <= pinned::kGumbelTol;
  r.detail = fmt("%d draws, worst per-component |freq - softmax| = %.4f (<= %.2f)",
                 pinned::kGumbelDraws, worst, pinned::kGumbelTol);
  return r;
}

// ---- criterion 9: equivalence vs brute-force enumeration ----------------------

Dfa random_dfa(Rng& rng) {
  Dfa d;
  d.alphabet = {"0", "1"};
  d.start = 0;
  for (int s = 0; s < pinned::kOracleStates; ++s) {
    d.labels.push_back(std::to_string(s));
    d.accepting.push_back(rng.flip());
    d.delta.push_back({static_cast<int>(rng.uniform_int(pinned::kOracleStates)),
                       static_cast<int>(rng.uniform_int(pinned::kOracleStates))});
  }
  return d;
}

// Walks every word of length <= max_len through both machines at once.
bool brute_force_equal(const Dfa& a, const Dfa& b, int sa, int sb, int depth) {
  if (a.accepting[sa] != b.accepting[sb]) return false;
  if (depth == 0) return true;
  for (int sym = 0; sym < 2; ++sym)
    if (!brute_force_equal(a, b, a.delta[sa][sym], b.delta[sb][sym], depth - 1)) return false;
  return true;
}

CriterionResult criterion9() {
  Rng rng(derive_seed(2026, "c9"));
  std::vector<Dfa> dfas;
  for (int i = 0; i < pinned::kOracleDfas; ++i) dfas.push_back(random_dfa(rng));

  int checked = 0, disagreements = 0, inequivalent = 0;
  std::string first_fail;
  auto compare = [&](const Dfa& a, const Dfa& b, const std::string& what) {
    ++checked;
    bool brute = brute_force_equal(a, b, a.start, b.start, pinned::kOracleMaxLen);
    EquivResult ev = equivalent(a, b);
    bool ok = ev.equivalent == brute;
    if (!ev.equivalent) {
      ++inequivalent;
      // The counterexample must be real and inside the enumerated range.
      ok = ok && dfa_accepts(a, ev.counterexample) != dfa_accepts(b, ev.counterexample) &&
           static_cast<int>(ev.counterexample.size()) <= pinned::kOracleMaxLen;
    }
    if (!ok) {
      ++disagreements;
      if (first_fail.empty()) first_fail = what;
    }
  };

  for (int i = 0; i < pinned::kOracleDfas; ++i) {
    compare(dfas[i], dfas[(i + 1) % pinned::kOracleDfas], fmt("pair %d", i));
    compare(dfas[i], minimize(dfas[i]), fmt("minimize %d", i));  // known-equivalent
    compare(dfas[i], dfas[i], fmt("self %d", i));
  }

  CriterionResult r;
  r.pass = disagreements == 0;
  r.detail = fmt("%d comparisons on %d random %d-state machines (%d inequivalent), "
                 "%d disagreements with length<=%d enumeration",
                 checked, pinned::kOracleDfas, pinned::kOracleStates, inequivalent,
                 disagreements, pinned::kOracleMaxLen);
  if (!first_fail.empty()) r.detail += "; first: " + first_fail;
  return r;
}

// ---- criterion 10: pipeline reproducibility -----------------------------------

int run_quiet(const std::string& cmd) {
  int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return status == -1 ? -1 : WEXITSTATUS(status);
}

CriterionResult criterion10() {
  const std::string cli = SR_CLI_PATH;
  fs::path dir = fs::temp_directory_path() / ("sr_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  fs::path data = dir / "data";
  fs::path ckpt = dir / "model.json";
  fs::path dfa = dir / "dfa.json";
  fs::path cfg = dir / "config.json";

  nlohmann::json config = {
      {"seed", 5},
      {"data",
       {{"train", (data / "train.jsonl").string()},
        {"valid", (data / "valid.jsonl").string()},
        {"alphabet", "binary"}}},
      {"model",
       {{"cell", "gru"}, {"hidden", 16}, {"embed", 4}, {"sr", {{"k", 8}, {"tau", 1.0}}}}},
      {"optimizer", {{"name", "adadelta"}}},
      {"fit", {{"epochs", 2}, {"patience", 5}}},
      {"out", {{"checkpoint", ckpt.string()}, {"history", (dir / "history.jsonl").string()}}},
  };
  write_file_atomic(cfg.string(), config.dump(2));

  auto pipeline = [&]() -> bool {
    if (run_quiet("\"" + cli + "\" gen-data --language tomita1 --preset small --seed 5 --out " +
                  data.string()) != 0)
      return false;
    if (run_quiet("\"" + cli + "\" train --config " + cfg.string()) != 0) return false;
    return run_quiet("\"" + cli + "\" extract-dfa --checkpoint " + ckpt.string() + " --data " +
                     (data / "test.jsonl").string() + " --minimize --out " + dfa.string()) == 0;
  };

  CriterionResult r;
  if (!pipeline()) {
    r.detail = "first pipeline run failed";
    fs::remove_all(dir);
    return r;
  }
  const std::string ckpt1 = read_file(ckpt.string());
  const std::string dfa1 = read_file(dfa.string());
  progress("pipeline run 1 complete, re-running");
  if (!pipeline()) {
    r.detail = "second pipeline run failed";
    fs::remove_all(dir);
    return r;
  }
  const bool ckpt_same = read_file(ckpt.string()) == ckpt1;
  const bool dfa_same = read_file(dfa.string()) == dfa1;
  r.pass = ckpt_same && dfa_same;
  r.detail = fmt("checkpoint bytes %s (%zu bytes), dfa bytes %s (%zu bytes)",
                 ckpt_same ? "identical" : "DIFFER", ckpt1.size(),
                 dfa_same ? "identical" : "DIFFER", dfa1.size());
  fs::remove_all(dir);
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  auto want = [&](int n) { return wanted.empty() || wanted.count(n) > 0; };

  std::map<int, CriterionResult> results;
  auto run = [&](int n, const char* name, CriterionResult (*f)()) {
    if (!want(n)) return;
    progress(fmt("criterion %d (%s) ...", n, name));
    results[n] = f();
  };

  // Trained-model criteria run first so their order on stdout stays 1..10
  // while the heavyweight work is shared (4 feeds 3b and 5).
  run(1, "gradients", criterion1);
  run(2, "centroid-identical continuations", criterion2);
  run(4, "tomita recovery", criterion4);
  run(3, "softmax limit", criterion3);
  run(5, "extraction variants", criterion5);
  run(6, "bp extrapolation", criterion6);
  run(7, "palindrome trend", criterion7);
  run(8, "gumbel statistics", criterion8);
  run(9, "automata oracle", criterion9);
  run(10, "reproducibility", criterion10);

  bool all = true;
  for (const auto& [n, res] : results) {
    printf("[%s] criterion %d: %s\n", res.pass ? "PASS" : "FAIL", n, res.detail.c_str());
    all = all && res.pass;
  }
  fflush(stdout);
  return all ? 0 : 1;
}
