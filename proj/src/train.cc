#include "sr/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sr {

SrModel make_model(CellKind kind, int hidden, int embed, const Alphabet& alphabet, int classes,
                   const std::optional<std::pair<int, double>>& k_tau, TransitionMode mode,
                   Rng& rng) {
  SrModel m;
  m.params = init_params(kind, hidden, embed, alphabet.size(), classes, rng);
  m.alphabet = alphabet;
  if (k_tau) {
    SRConfig sr;
    sr.k = k_tau->first;
    sr.tau = k_tau->second;
    sr.mode = mode;
    sr.centroids = init_centroids(hidden, sr.k, rng);
    m.sr = std::move(sr);
  }
  return m;
}

std::vector<std::pair<std::string, Mat*>> trainable_params(SrModel& m) {
  std::vector<std::pair<std::string, Mat*>> out;
  for (auto& [name, mat] : m.params.w) out.emplace_back(name, &mat);
  if (m.sr) out.emplace_back("S", &m.sr->centroids);
  return out;
}

Bindings bind_model(const SrModel& m) {
  Bindings b = bind_cell_params(m.params);
  if (m.sr) b["S"] = &m.sr->centroids;
  return b;
}

SequenceGraph build_sequence_graph(const SrModel& m, const std::vector<int>& body, int label,
                                   Rng* rng) {
  const CellParams& p = m.params;
  for (int t : body)
    if (t < 0 || t >= m.alphabet.body_size())
      throw std::invalid_argument("sequence: body token id out of range");
  if (label >= p.classes)
    throw std::invalid_argument("sequence: label out of range");

  SequenceGraph sg;
  Graph& g = sg.graph;
  ParamExprs pe = declare_cell_params(g, p);
  std::optional<Expr> S;
  if (m.sr) {
    if (m.sr->centroids.rows() != p.hidden || m.sr->centroids.cols() != m.sr->k)
      throw std::invalid_argument("sequence: centroid shape disagrees with config");
    S = g.input("S", p.hidden, m.sr->k);
  }

  Expr h = g.constant(Mat::Zero(p.hidden, 1));
  std::optional<Expr> c;
  if (cell_has_memory(p.kind)) c = g.constant(Mat::Zero(p.hidden, 1));

  auto cell = [&](int token) {
    Expr x = gather(pe.at("embedding"), token);
    CellStepExprs step = cell_step_expr(g, p.kind, pe, x, h, c);
    if (step.c) c = step.c;
    return step.u;
  };

  auto stochastic = [&](Expr u) -> Expr {
    if (!m.sr) return u;
    const double tau = m.sr->tau;
    Expr alpha{};
    switch (m.sr->mode) {
      case TransitionMode::Gumbel: {
        Vec noise = rng ? draw_gumbel_noise(m.sr->k, *rng) : Vec(Vec::Zero(m.sr->k));
        alpha = sr_alpha_gumbel(g, *S, u, noise, tau);
        break;
      }
      default:
        alpha = sr_alpha(g, *S, u, tau);
        break;
    }
    sg.alphas.push_back(alpha);
    if (m.sr->mode == TransitionMode::Sampled) {
      double draw = rng ? rng->uniform() : -1.0;  // no rng: argmax transition
      Expr next = st_sample(*S, alpha, draw);
      sg.sample_ids.push_back(next.id);
      return next;
    }
    sg.sample_ids.push_back(-1);
    return sr_mixture(g, *S, alpha);
  };

  h = stochastic(cell(m.alphabet.start_id()));
  for (int t : body) h = stochastic(cell(t));
  Expr u_end = cell(m.alphabet.end_id());

  Expr features = cell_has_memory(p.kind) ? concat(u_end, *c) : u_end;
  sg.logits = pe.at("W_y") * features + pe.at("b_y");
  if (label >= 0) {
    Expr probs = softmax(sg.logits);
    sg.loss = scale(log(gather(probs, label)), -1.0);
  }
  return sg;
}

ForwardResult forward_sequence(const SrModel& m, const std::vector<int>& body, Rng* rng,
                               int label) {
  SequenceGraph sg = build_sequence_graph(m, body, label, rng);
  Evaluation ev(sg.graph);
  ev.forward(bind_model(m));

  ForwardResult out;
  out.logits = ev.value(sg.logits).col(0);
  out.predicted = argmax_lowest(out.logits);
  if (label >= 0) out.loss = ev.value(sg.loss)(0, 0);
  for (size_t i = 0; i < sg.alphas.size(); ++i) {
    TraceStep step;
    step.alpha = ev.value(sg.alphas[i]).col(0);
    step.state = sg.sample_ids[i] >= 0 ? ev.chosen_index(sg.sample_ids[i])
                                       : argmax_lowest(step.alpha);
    out.trace.steps.push_back(std::move(step));
  }
  return out;
}

double loss_cross_entropy(const Vec& logits, int label) {
  if (label < 0 || label >= logits.size())
    throw std::invalid_argument("loss_cross_entropy: label out of range");
  Vec p = stable_softmax(logits);
  return -std::log(p(label));
}

void Optimizer::step(const std::vector<std::pair<std::string, Mat*>>& params,
                     const GradientMap& grads) {
  for (const auto& [name, mat] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) throw std::invalid_argument("optimizer: no gradient for '" + name + "'");
    const Mat& g = git->second;
    if (g.rows() != mat->rows() || g.cols() != mat->cols())
      throw std::invalid_argument("optimizer: gradient shape mismatch for '" + name + "'");

    Mat& a1 = acc1_[name];
    Mat& a2 = acc2_[name];
    if (a1.size() == 0) {
      a1 = Mat::Zero(g.rows(), g.cols());
      a2 = Mat::Zero(g.rows(), g.cols());
    }

    if (cfg_.kind == OptimizerConfig::Kind::Adadelta) {
      // a1 = E[g^2], a2 = E[dx^2]
      a1 = cfg_.rho * a1 + (1.0 - cfg_.rho) * g.cwiseProduct(g);
      Mat dx = (-((a2.array() + cfg_.eps).sqrt() / (a1.array() + cfg_.eps).sqrt()) * g.array())
                   .matrix();
      a2 = cfg_.rho * a2 + (1.0 - cfg_.rho) * dx.cwiseProduct(dx);
      *mat += dx;
    } else {
      // a1 = sq, a2 = momentum buffer
      a1 = cfg_.decay * a1 + (1.0 - cfg_.decay) * g.cwiseProduct(g);
      a2 = cfg_.momentum * a2 + (g.array() / (a1.array() + cfg_.rms_eps).sqrt()).matrix();
      *mat -= cfg_.lr * a2;
    }
  }
}

namespace {

double max_abs(const GradientMap& grads) {
  double m = 0.0;
  for (const auto& [name, g] : grads) {
    (void)name;
    if (g.size() > 0) m = std::max(m, g.cwiseAbs().maxCoeff());
  }
  return m;
}

struct Snapshot {
  std::map<std::string, Mat> weights;
  Mat centroids;
};

Snapshot take_snapshot(const SrModel& m) {
  Snapshot s;
  s.weights = m.params.w;
  if (m.sr) s.centroids = m.sr->centroids;
  return s;
}

void restore_snapshot(SrModel& m, const Snapshot& s) {
  m.params.w = s.weights;
  if (m.sr) m.sr->centroids = s.centroids;
}

}  // namespace

FitResult fit(const SrModel& start, const Dataset& train, const Dataset& valid,
              const TrainConfig& cfg) {
  if (train.empty() || valid.empty()) throw std::invalid_argument("fit: empty dataset");
  if (cfg.epochs <= 0) throw std::invalid_argument("fit: epochs must be positive");

  FitResult result;
  result.model = start;
  SrModel& model = result.model;

  std::vector<Dataset> stages = curriculum_split(train, cfg.curriculum_stages);
  Rng rng_shuffle(derive_seed(cfg.seed, "shuffle"));
  Rng rng_draws(derive_seed(cfg.seed, "gumbel"));
  const bool needs_draws =
      model.sr && (model.sr->mode == TransitionMode::Sampled ||
                   model.sr->mode == TransitionMode::Gumbel);

  Optimizer opt(cfg.optimizer);
  auto params = trainable_params(model);

  int stage = 0;
  int epochs_in_stage = 0;
  double best_valid = std::numeric_limits<double>::infinity();
  Snapshot best = take_snapshot(model);
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const Dataset& active = stages[static_cast<size_t>(stage)];
    std::vector<int> order(active.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng_shuffle.shuffle(order);

    for (int idx : order) {
      const LabeledSequence& ex = active[static_cast<size_t>(idx)];
      SequenceGraph sg =
          build_sequence_graph(model, ex.tokens, ex.label, needs_draws ? &rng_draws : nullptr);
      Evaluation ev(sg.graph);
      ev.forward(bind_model(model));
      GradientMap grads = ev.backward(sg.loss);
      if (cfg.clip_norm > 0.0) {
        double m = max_abs(grads);
        if (m > cfg.clip_norm) {
          double scale_by = cfg.clip_norm / m;
          for (auto& [name, g] : grads) {
            (void)name;
            g *= scale_by;
          }
        }
      }
      opt.step(params, grads);
    }
    ++epochs_in_stage;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.stage = stage;
    rec.train_error = evaluate(model, active, cfg.seed);
    rec.valid_error = evaluate(model, valid, cfg.seed);
    result.history.push_back(rec);

    // Ties keep the latest snapshot: once validation error plateaus (often at
    // exactly zero on formal languages) the fit keeps refining, and the most
    // trained of the equally-good checkpoints has the sharpest transitions.
    if (rec.valid_error <= best_valid) {
      best_valid = rec.valid_error;
      best = take_snapshot(model);
      result.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }

    if (stage + 1 < static_cast<int>(stages.size()) &&
        (1.0 - rec.train_error >= cfg.stage_advance_accuracy ||
         epochs_in_stage >= cfg.stage_epoch_cap)) {
      ++stage;
      epochs_in_stage = 0;
    }

    if (since_best >= cfg.patience) break;
  }

  restore_snapshot(model, best);
  result.best_valid_error = best_valid;
  return result;
}

double evaluate(const SrModel& m, const Dataset& data, uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const bool needs_draws = m.sr && (m.sr->mode == TransitionMode::Sampled ||
                                    m.sr->mode == TransitionMode::Gumbel);
  Rng rng(derive_seed(seed, "eval"));
  long wrong = 0;
  for (const auto& ex : data) {
    ForwardResult r = forward_sequence(m, ex.tokens, needs_draws ? &rng : nullptr);
    if (r.predicted != ex.label) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

}  // namespace sr
