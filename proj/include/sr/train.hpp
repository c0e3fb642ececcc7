#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sr/cells.hpp"
#include "sr/languages.hpp"
#include "sr/sregular.hpp"

namespace sr {

// A recurrent classifier, optionally state-regularized. Without `sr` the cell
// output feeds the next step directly (the plain baseline).
struct SrModel {
  CellParams params;
  std::optional<SRConfig> sr;
  Alphabet alphabet;

  CellKind kind() const { return params.kind; }
  bool state_regularized() const { return sr.has_value(); }
};

// Fresh model: weights via init_params, centroids uniform in [-0.5, 0.5].
SrModel make_model(CellKind kind, int hidden, int embed, const Alphabet& alphabet, int classes,
                   const std::optional<std::pair<int, double>>& k_tau, TransitionMode mode,
                   Rng& rng);

// Name -> live matrix for every trainable tensor (cell weights, classifier,
// embedding, and the centroids as "S").
std::vector<std::pair<std::string, Mat*>> trainable_params(SrModel& m);

// --- sequence protocol -------------------------------------------------------

// One stochastic step: the transition distribution and the centroid index
// (argmax, or the sampled index in Sampled mode).
struct TraceStep {
  Vec alpha;
  int state = -1;
};

// Per-step record over start + body steps; the closing end-token step has no
// stochastic component and is not recorded.
struct TransitionTrace {
  std::vector<TraceStep> steps;
};

struct ForwardResult {
  Vec logits;
  int predicted = -1;
  double loss = -1.0;  // set when a label was supplied
  TransitionTrace trace;
};

// Runs start token, body tokens (each cell step followed by the stochastic
// component when the model is state-regularized), then the end token without
// the stochastic component; classifies from [h; c] (h alone for memory-less
// cells). `rng` feeds Sampled draws and Gumbel noise; when null, Sampled
// follows the argmax transition and Gumbel noise is zero (the noiseless
// distribution).
ForwardResult forward_sequence(const SrModel& m, const std::vector<int>& body, Rng* rng = nullptr,
                               int label = -1);

// Unrolled graph of the same protocol, for training.
struct SequenceGraph {
  Graph graph;
  Expr logits;
  Expr loss;                    // valid when built with a label
  std::vector<Expr> alphas;     // per stochastic step
  std::vector<int> sample_ids;  // StSample node per step, -1 otherwise
};

SequenceGraph build_sequence_graph(const SrModel& m, const std::vector<int>& body, int label,
                                   Rng* rng);

Bindings bind_model(const SrModel& m);

// loss = -log softmax(logits)[label]
double loss_cross_entropy(const Vec& logits, int label);

// --- optimizers ----------------------------------------------------------------

struct OptimizerConfig {
  enum class Kind { Adadelta, RmsProp } kind = Kind::Adadelta;
  // Adadelta
  double rho = 0.95;
  double eps = 1e-6;
  // RMSprop with momentum: sq = decay*sq + (1-decay)*g^2;
  // m = momentum*m + g/sqrt(sq + eps); x -= lr*m
  double lr = 0.01;
  double momentum = 0.9;
  double decay = 0.9;
  double rms_eps = 1e-8;
};

class Optimizer {
 public:
  explicit Optimizer(const OptimizerConfig& cfg) : cfg_(cfg) {}
  void step(const std::vector<std::pair<std::string, Mat*>>& params, const GradientMap& grads);

 private:
  OptimizerConfig cfg_;
  std::map<std::string, Mat> acc1_, acc2_;  // per-parameter state
};

// --- fit / evaluate --------------------------------------------------------------

struct TrainConfig {
  OptimizerConfig optimizer;
  int epochs = 50;
  int patience = 5;            // stop once epochs-since-best reaches this
  int curriculum_stages = 1;
  int stage_epoch_cap = 10;    // advance a stage after this many epochs regardless
  double stage_advance_accuracy = 0.99;
  double clip_norm = 5.0;      // gradient infinity-norm cap; <= 0 disables
  uint64_t seed = 1;
};

struct EpochRecord {
  int epoch = 0;
  int stage = 0;
  double train_error = 0.0;  // on the active curriculum stage
  double valid_error = 0.0;
};

struct FitResult {
  SrModel model;  // parameters of the best-validation epoch
  std::vector<EpochRecord> history;
  double best_valid_error = 1.0;
  int best_epoch = 0;
};

// Per-example updates in seeded shuffle order. Curriculum stages are
// cumulative subsets; a stage advances once its training accuracy reaches
// stage_advance_accuracy or its epoch cap is hit. Training stops after
// `patience` consecutive epochs without a validation improvement (patience 0
// stops after the first epoch) and returns the best-validation snapshot.
FitResult fit(const SrModel& start, const Dataset& train, const Dataset& valid,
              const TrainConfig& cfg);

// Error rate. Deterministic: stochastic modes draw from a stream derived
// from `seed`.
double evaluate(const SrModel& m, const Dataset& data, uint64_t seed = 0);

}  // namespace sr
