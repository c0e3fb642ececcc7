#include "sr/cells.hpp"

#include <cmath>
#include <stdexcept>

namespace sr {

bool cell_has_memory(CellKind kind) {
  return kind == CellKind::Lstm || kind == CellKind::LstmPeephole;
}

const char* cell_kind_name(CellKind kind) {
  switch (kind) {
    case CellKind::Elman: return "elman";
    case CellKind::Gru: return "gru";
    case CellKind::Lstm: return "lstm";
    case CellKind::LstmPeephole: return "lstm_p";
  }
  return "?";
}

CellKind cell_kind_from_name(const std::string& name) {
  if (name == "elman") return CellKind::Elman;
  if (name == "gru") return CellKind::Gru;
  if (name == "lstm") return CellKind::Lstm;
  if (name == "lstm_p") return CellKind::LstmPeephole;
  throw std::invalid_argument("unknown cell kind '" + name + "'");
}

Mat& CellParams::at(const std::string& name) {
  auto it = w.find(name);
  if (it == w.end()) throw std::invalid_argument("cell parameter '" + name + "' missing");
  return it->second;
}

const Mat& CellParams::at(const std::string& name) const {
  auto it = w.find(name);
  if (it == w.end()) throw std::invalid_argument("cell parameter '" + name + "' missing");
  return it->second;
}

int CellParams::classifier_inputs() const {
  return cell_has_memory(kind) ? 2 * hidden : hidden;
}

std::vector<std::string> cell_param_names(CellKind kind) {
  std::vector<std::string> names;
  switch (kind) {
    case CellKind::Elman:
      names = {"W_h", "U_h", "b_h"};
      break;
    case CellKind::Gru:
      names = {"W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h"};
      break;
    case CellKind::Lstm:
      names = {"W_f", "U_f", "b_f", "W_i", "U_i", "b_i",
               "W_o", "U_o", "b_o", "W_c", "U_c", "b_c"};
      break;
    case CellKind::LstmPeephole:
      names = {"W_f", "U_f", "b_f", "W_i", "U_i", "b_i", "W_o", "U_o", "b_o",
               "W_c", "U_c", "b_c", "p_f", "p_i", "p_o"};
      break;
  }
  names.push_back("embedding");
  names.push_back("W_y");
  names.push_back("b_y");
  return names;
}

namespace {

// Row-major fill so the draw sequence is independent of Eigen's storage.
Mat sample_uniform(int rows, int cols, double r, Rng& rng) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-r, r);
  return m;
}

std::pair<int, int> param_shape(const std::string& name, int d, int e, int alphabet, int classes,
                                int classifier_inputs) {
  if (name == "embedding") return {alphabet, e};
  if (name == "W_y") return {classes, classifier_inputs};
  if (name == "b_y") return {classes, 1};
  if (name[0] == 'W') return {d, e};
  if (name[0] == 'U') return {d, d};
  if (name[0] == 'b' || name[0] == 'p') return {d, 1};
  throw std::invalid_argument("unknown cell parameter '" + name + "'");
}

}  // namespace

CellParams init_params(CellKind kind, int d, int e, int alphabet_size, int classes, Rng& rng) {
  if (d <= 0 || e <= 0 || alphabet_size < 3 || classes < 2)
    throw std::invalid_argument("init_params: bad dimensions");
  CellParams p;
  p.kind = kind;
  p.hidden = d;
  p.embed = e;
  p.alphabet = alphabet_size;
  p.classes = classes;
  const double r = 1.0 / std::sqrt(static_cast<double>(d));
  for (const auto& name : cell_param_names(kind)) {
    auto [rows, cols] = param_shape(name, d, e, alphabet_size, classes, p.classifier_inputs());
    if (name[0] == 'b')
      p.w[name] = Mat::Zero(rows, cols);
    else
      p.w[name] = sample_uniform(rows, cols, r, rng);
  }
  return p;
}

ParamExprs declare_cell_params(Graph& g, const CellParams& p) {
  ParamExprs pe;
  for (const auto& name : cell_param_names(p.kind)) {
    const Mat& m = p.at(name);
    pe[name] = g.input(name, static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  }
  return pe;
}

Bindings bind_cell_params(const CellParams& p) {
  Bindings b;
  for (const auto& [name, m] : p.w) b[name] = &m;
  return b;
}

namespace {

Expr pexpr(const ParamExprs& pe, const std::string& name) {
  auto it = pe.find(name);
  if (it == pe.end()) throw std::invalid_argument("cell parameter expr '" + name + "' missing");
  return it->second;
}

// W x + U h + b
Expr affine(const ParamExprs& pe, const char* gate, Expr x, Expr h) {
  std::string s(gate);
  return pexpr(pe, "W_" + s) * x + pexpr(pe, "U_" + s) * h + pexpr(pe, "b_" + s);
}

}  // namespace

CellStepExprs cell_step_expr(Graph& g, CellKind kind, const ParamExprs& pe, Expr x, Expr h_prev,
                             std::optional<Expr> c_prev) {
  const bool memory = cell_has_memory(kind);
  if (memory && !c_prev)
    throw std::invalid_argument("cell_step: cell state required for memory cells");
  if (!memory && c_prev)
    throw std::invalid_argument("cell_step: cell state passed to a memory-less cell");

  CellStepExprs out;
  switch (kind) {
    case CellKind::Elman: {
      out.u = sigmoid(affine(pe, "h", x, h_prev));
      break;
    }
    case CellKind::Gru: {
      Expr ones = g.constant(Mat::Ones(h_prev.rows(), 1));
      Expr z = sigmoid(affine(pe, "z", x, h_prev));
      Expr r = sigmoid(affine(pe, "r", x, h_prev));
      Expr cand = tanh(pexpr(pe, "W_h") * x + pexpr(pe, "U_h") * cmul(r, h_prev) +
                       pexpr(pe, "b_h"));
      out.u = cmul(z, cand) + cmul(ones - z, h_prev);
      break;
    }
    case CellKind::Lstm: {
      Expr f = sigmoid(affine(pe, "f", x, h_prev));
      Expr i = sigmoid(affine(pe, "i", x, h_prev));
      Expr o = sigmoid(affine(pe, "o", x, h_prev));
      Expr cand = tanh(affine(pe, "c", x, h_prev));
      Expr c = cmul(f, *c_prev) + cmul(i, cand);
      out.c = c;
      out.u = cmul(o, tanh(c));
      break;
    }
    case CellKind::LstmPeephole: {
      // f and i peek at the previous cell state, o at the new one.
      Expr f = sigmoid(affine(pe, "f", x, h_prev) + cmul(pexpr(pe, "p_f"), *c_prev));
      Expr i = sigmoid(affine(pe, "i", x, h_prev) + cmul(pexpr(pe, "p_i"), *c_prev));
      Expr cand = tanh(affine(pe, "c", x, h_prev));
      Expr c = cmul(f, *c_prev) + cmul(i, cand);
      Expr o = sigmoid(affine(pe, "o", x, h_prev) + cmul(pexpr(pe, "p_o"), c));
      out.c = c;
      out.u = cmul(o, tanh(c));
      break;
    }
  }
  return out;
}

CellStepValues cell_step(const CellParams& p, const CellState& state, const Vec& token_embedding) {
  if (state.h.size() != p.hidden)
    throw std::invalid_argument("cell_step: hidden state has wrong length");
  if (token_embedding.size() != p.embed)
    throw std::invalid_argument("cell_step: embedding has wrong length");
  const bool memory = cell_has_memory(p.kind);
  if (memory && (!state.c || state.c->size() != p.hidden))
    throw std::invalid_argument("cell_step: cell state required for memory cells");
  if (!memory && state.c)
    throw std::invalid_argument("cell_step: cell state passed to a memory-less cell");

  Graph g;
  ParamExprs pe = declare_cell_params(g, p);
  Expr x = g.constant(token_embedding);
  Expr h = g.constant(state.h);
  std::optional<Expr> c;
  if (memory) c = g.constant(*state.c);
  CellStepExprs step = cell_step_expr(g, p.kind, pe, x, h, c);

  Evaluation ev(g);
  ev.forward(bind_cell_params(p));
  CellStepValues out;
  out.u = ev.value(step.u).col(0);
  if (step.c) out.c = ev.value(*step.c).col(0);
  return out;
}

}  // namespace sr
