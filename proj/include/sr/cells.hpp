#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sr/rng.hpp"
#include "sr/tape.hpp"

namespace sr {

enum class CellKind { Elman, Gru, Lstm, LstmPeephole };

// Lstm and LstmPeephole carry a cell-state vector across steps.
bool cell_has_memory(CellKind kind);
const char* cell_kind_name(CellKind kind);
CellKind cell_kind_from_name(const std::string& name);

// One recurrent cell plus the sequence-level classifier and the token
// embedding table. Weight matrices are kept in a name-keyed map so the
// optimizer, checkpoints and gradient plumbing can enumerate them uniformly.
struct CellParams {
  CellKind kind = CellKind::Gru;
  int hidden = 0;    // d
  int embed = 0;     // e
  int alphabet = 0;  // embedding rows: body tokens + start + end
  int classes = 2;
  std::map<std::string, Mat> w;

  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  // Classifier reads [h; c] for memory cells, h alone otherwise.
  int classifier_inputs() const;
};

// Parameter names for a kind, in initialization order.
std::vector<std::string> cell_param_names(CellKind kind);

// Weights uniform in [-r, r] with r = 1/sqrt(d); biases zero. The draw order
// (name order, then row-major within each matrix) is fixed, so a seed fully
// determines the result.
CellParams init_params(CellKind kind, int d, int e, int alphabet_size, int classes, Rng& rng);

struct CellState {
  Vec h;
  std::optional<Vec> c;
};

// --- graph builders -------------------------------------------------------

using ParamExprs = std::map<std::string, Expr>;

// Declares every weight of `p` as a named graph input.
ParamExprs declare_cell_params(Graph& g, const CellParams& p);
// Bindings pointing at the live weight matrices of `p`.
Bindings bind_cell_params(const CellParams& p);

struct CellStepExprs {
  Expr u;                 // cell output (pre state-regularization)
  std::optional<Expr> c;  // new cell state, memory kinds only
};

// Appends one cell step. h_prev is required; c_prev is required for memory
// kinds and rejected otherwise.
CellStepExprs cell_step_expr(Graph& g, CellKind kind, const ParamExprs& pe, Expr x, Expr h_prev,
                             std::optional<Expr> c_prev);

// --- value-level step ------------------------------------------------------

struct CellStepValues {
  Vec u;
  std::optional<Vec> c;
};

CellStepValues cell_step(const CellParams& p, const CellState& state, const Vec& token_embedding);

}  // namespace sr
