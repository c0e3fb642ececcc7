#pragma once

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace sr {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Primitive operations of the expression graph.
enum class Op {
  Input,
  Constant,
  Add,
  Sub,
  CMul,  // elementwise product
  MatMul,
  Transpose,
  Scale,  // scalar constant * tensor
  Sigmoid,
  Tanh,
  Log,
  Softmax,  // column vector, max-subtracted
  Dot,
  Gather,  // one row, returned as a column vector
  Concat,  // vertical
  StSample,
};

const char* op_name(Op op);

struct Node {
  Op op = Op::Constant;
  int a = -1, b = -1;      // operand node ids
  int rows = 0, cols = 0;  // result shape, fixed at build time
  double scalar = 0.0;     // Scale factor; StSample uniform draw
  int index = -1;          // Gather row
  Mat payload;             // Constant value
  std::string name;        // Input leaf name
};

class Graph;

// Lightweight handle to one node of a Graph.
struct Expr {
  Graph* g = nullptr;
  int id = -1;
  bool valid() const { return g != nullptr && id >= 0; }
  int rows() const;
  int cols() const;
};

// Append-only expression graph over dense binary64 matrices. Nodes are in
// topological order by construction and shapes are fixed and checked when a
// node is created, so shape errors surface at build time with the offending
// node named. A Graph is immutable once built; all per-run state lives in
// Evaluation, so one Graph can be shared read-only between threads.
class Graph {
 public:
  // Named leaf, bound at evaluation time. Names must be unique.
  Expr input(const std::string& name, int rows, int cols = 1);
  Expr constant(Mat value);
  Expr make(Node n);  // shape-checked append; used by the free builders

  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
  const std::map<std::string, int>& inputs() const { return inputs_; }

 private:
  std::vector<Node> nodes_;
  std::map<std::string, int> inputs_;
};

Expr add(Expr a, Expr b);
Expr sub(Expr a, Expr b);
Expr cmul(Expr a, Expr b);
Expr matmul(Expr a, Expr b);
Expr transpose(Expr a);
Expr scale(Expr a, double s);
Expr sigmoid(Expr a);
Expr tanh(Expr a);
Expr log(Expr a);
Expr softmax(Expr a);
Expr dot(Expr a, Expr b);
Expr gather(Expr a, int row);
Expr concat(Expr a, Expr b);

// Forward: the centroid column selected by inverse-CDF sampling of alpha at
// the uniform draw recorded in the node (bit-equal to centroids.col(j)).
// A negative draw means the deterministic limit: pick the argmax of alpha.
// Backward: gradients of the mixture centroids * alpha, i.e. the sampling is
// treated as straight-through.
Expr st_sample(Expr centroids, Expr alpha, double uniform_draw);

inline Expr operator+(Expr a, Expr b) { return add(a, b); }
inline Expr operator-(Expr a, Expr b) { return sub(a, b); }
inline Expr operator*(Expr a, Expr b) { return matmul(a, b); }
inline Expr operator*(double s, Expr a) { return scale(a, s); }

using Bindings = std::map<std::string, const Mat*>;
using GradientMap = std::map<std::string, Mat>;

// Forward/backward state for one Graph. forward() may be called repeatedly
// with different bindings (storage is reused); value(), chosen_index() and
// backward() refer to the most recent forward run. Evaluation of one graph
// instance is single-threaded.
class Evaluation {
 public:
  explicit Evaluation(const Graph& g);

  void forward(const Bindings& bindings);

  const Mat& value(int id) const;
  const Mat& value(Expr e) const { return value(e.id); }

  // Index picked by a StSample node in the last forward run.
  int chosen_index(Expr e) const;
  int chosen_index(int id) const;

  // Reverse sweep from a scalar (1x1) output in fixed topological order.
  // Returns a gradient for every named input; inputs the output does not
  // depend on get zero matrices. Gradients sum over multiple use sites.
  GradientMap backward(Expr output) const;

 private:
  const Graph* g_;
  std::vector<Mat> val_;
  std::vector<int> aux_;
  bool ran_ = false;
};

struct FdEntry {
  std::string name;
  double max_rel_error = 0.0;
};

struct FdReport {
  double tolerance = 0.0;
  double worst = 0.0;
  bool pass = false;
  std::vector<FdEntry> entries;
};

// Central-difference check of backward() at the given bindings: every
// coefficient of every named input is perturbed by +-step and the analytic
// gradient is compared with relative error |a-b| / max(|a|, |b|, 1e-6); the
// floor treats coefficients below 1e-6 as numerically zero for O(1) outputs.
FdReport finite_difference_check(const Graph& g, Expr output, const Bindings& bindings,
                                 double step, double tolerance);

}  // namespace sr
