#include "sr/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace sr {

const char* op_name(Op op) {
  switch (op) {
    case Op::Input: return "input";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::CMul: return "cmul";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Scale: return "scale";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::Log: return "log";
    case Op::Softmax: return "softmax";
    case Op::Dot: return "dot";
    case Op::Gather: return "gather";
    case Op::Concat: return "concat";
    case Op::StSample: return "st_sample";
  }
  return "?";
}

namespace {

[[noreturn]] void fail(const std::string& what) { throw std::invalid_argument(what); }

std::string shape_str(int r, int c) { return std::to_string(r) + "x" + std::to_string(c); }

void check_same_graph(Expr a, Expr b, const char* who) {
  if (!a.valid() || !b.valid()) fail(std::string(who) + ": invalid expression handle");
  if (a.g != b.g) fail(std::string(who) + ": operands belong to different graphs");
}

void check_valid(Expr a, const char* who) {
  if (!a.valid()) fail(std::string(who) + ": invalid expression handle");
}

const Node& nd(Expr e) { return e.g->node(e.id); }

std::string node_ref(Expr e) {
  return std::string(op_name(nd(e).op)) + " node " + std::to_string(e.id);
}

// Inverse-CDF pick: smallest i with cumulative mass above the draw. Falls
// back to the last index when rounding leaves the total a hair under 1.
int inverse_cdf(const Mat& alpha, double u) {
  double acc = 0.0;
  int k = static_cast<int>(alpha.rows());
  for (int i = 0; i < k; ++i) {
    acc += alpha(i, 0);
    if (u < acc) return i;
  }
  return k - 1;
}

}  // namespace

int Expr::rows() const { return nd(*this).rows; }
int Expr::cols() const { return nd(*this).cols; }

Expr Graph::input(const std::string& name, int rows, int cols) {
  if (name.empty()) fail("input: empty name");
  if (inputs_.count(name)) fail("input: duplicate name '" + name + "'");
  if (rows <= 0 || cols <= 0) fail("input '" + name + "': bad shape " + shape_str(rows, cols));
  Node n;
  n.op = Op::Input;
  n.rows = rows;
  n.cols = cols;
  n.name = name;
  Expr e = make(std::move(n));
  inputs_[name] = e.id;
  return e;
}

Expr Graph::constant(Mat value) {
  Node n;
  n.op = Op::Constant;
  n.rows = static_cast<int>(value.rows());
  n.cols = static_cast<int>(value.cols());
  n.payload = std::move(value);
  return make(std::move(n));
}

Expr Graph::make(Node n) {
  nodes_.push_back(std::move(n));
  return Expr{this, static_cast<int>(nodes_.size()) - 1};
}

namespace {

Expr elementwise2(Op op, Expr a, Expr b, const char* who) {
  check_same_graph(a, b, who);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail(std::string(who) + ": shape mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
         shape_str(b.rows(), b.cols()) + " (" + node_ref(a) + ", " + node_ref(b) + ")");
  Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.rows = a.rows();
  n.cols = a.cols();
  return a.g->make(std::move(n));
}

Expr elementwise1(Op op, Expr a, const char* who) {
  check_valid(a, who);
  Node n;
  n.op = op;
  n.a = a.id;
  n.rows = a.rows();
  n.cols = a.cols();
  return a.g->make(std::move(n));
}

}  // namespace

Expr add(Expr a, Expr b) { return elementwise2(Op::Add, a, b, "add"); }
Expr sub(Expr a, Expr b) { return elementwise2(Op::Sub, a, b, "sub"); }
Expr cmul(Expr a, Expr b) { return elementwise2(Op::CMul, a, b, "cmul"); }

Expr matmul(Expr a, Expr b) {
  check_same_graph(a, b, "matmul");
  if (a.cols() != b.rows())
    fail("matmul: inner dimensions " + shape_str(a.rows(), a.cols()) + " * " +
         shape_str(b.rows(), b.cols()) + " (" + node_ref(a) + ", " + node_ref(b) + ")");
  Node n;
  n.op = Op::MatMul;
  n.a = a.id;
  n.b = b.id;
  n.rows = a.rows();
  n.cols = b.cols();
  return a.g->make(std::move(n));
}

Expr transpose(Expr a) {
  check_valid(a, "transpose");
  Node n;
  n.op = Op::Transpose;
  n.a = a.id;
  n.rows = a.cols();
  n.cols = a.rows();
  return a.g->make(std::move(n));
}

Expr scale(Expr a, double s) {
  check_valid(a, "scale");
  Node n;
  n.op = Op::Scale;
  n.a = a.id;
  n.rows = a.rows();
  n.cols = a.cols();
  n.scalar = s;
  return a.g->make(std::move(n));
}

Expr sigmoid(Expr a) { return elementwise1(Op::Sigmoid, a, "sigmoid"); }
Expr tanh(Expr a) { return elementwise1(Op::Tanh, a, "tanh"); }
Expr log(Expr a) { return elementwise1(Op::Log, a, "log"); }

Expr softmax(Expr a) {
  check_valid(a, "softmax");
  if (a.cols() != 1) fail("softmax: expected a column vector, got " +
                          shape_str(a.rows(), a.cols()) + " (" + node_ref(a) + ")");
  return elementwise1(Op::Softmax, a, "softmax");
}

Expr dot(Expr a, Expr b) {
  check_same_graph(a, b, "dot");
  if (a.cols() != 1 || b.cols() != 1 || a.rows() != b.rows())
    fail("dot: expected equal-length column vectors, got " + shape_str(a.rows(), a.cols()) +
         " and " + shape_str(b.rows(), b.cols()));
  Node n;
  n.op = Op::Dot;
  n.a = a.id;
  n.b = b.id;
  n.rows = 1;
  n.cols = 1;
  return a.g->make(std::move(n));
}

Expr gather(Expr a, int row) {
  check_valid(a, "gather");
  if (row < 0 || row >= a.rows())
    fail("gather: row " + std::to_string(row) + " out of range for " +
         shape_str(a.rows(), a.cols()) + " (" + node_ref(a) + ")");
  Node n;
  n.op = Op::Gather;
  n.a = a.id;
  n.rows = a.cols();
  n.cols = 1;
  n.index = row;
  return a.g->make(std::move(n));
}

Expr concat(Expr a, Expr b) {
  check_same_graph(a, b, "concat");
  if (a.cols() != b.cols())
    fail("concat: column mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
         shape_str(b.rows(), b.cols()));
  Node n;
  n.op = Op::Concat;
  n.a = a.id;
  n.b = b.id;
  n.rows = a.rows() + b.rows();
  n.cols = a.cols();
  return a.g->make(std::move(n));
}

Expr st_sample(Expr centroids, Expr alpha, double uniform_draw) {
  check_same_graph(centroids, alpha, "st_sample");
  if (alpha.cols() != 1 || centroids.cols() != alpha.rows())
    fail("st_sample: centroids " + shape_str(centroids.rows(), centroids.cols()) +
         " incompatible with alpha " + shape_str(alpha.rows(), alpha.cols()));
  if (!(uniform_draw < 1.0) || (uniform_draw < 0.0 && uniform_draw != -1.0))
    fail("st_sample: draw must be in [0,1) or the argmax sentinel -1");
  Node n;
  n.op = Op::StSample;
  n.a = centroids.id;
  n.b = alpha.id;
  n.rows = centroids.rows();
  n.cols = 1;
  n.scalar = uniform_draw;
  return centroids.g->make(std::move(n));
}

Evaluation::Evaluation(const Graph& g) : g_(&g) {
  val_.resize(static_cast<size_t>(g.size()));
  aux_.assign(static_cast<size_t>(g.size()), -1);
}

void Evaluation::forward(const Bindings& bindings) {
  const int n = g_->size();
  for (int i = 0; i < n; ++i) {
    const Node& nd = g_->node(i);
    Mat& out = val_[static_cast<size_t>(i)];
    switch (nd.op) {
      case Op::Input: {
        auto it = bindings.find(nd.name);
        if (it == bindings.end() || it->second == nullptr)
          fail("forward: input '" + nd.name + "' not bound");
        const Mat& v = *it->second;
        if (v.rows() != nd.rows || v.cols() != nd.cols)
          fail("forward: input '" + nd.name + "' bound to " +
               shape_str(static_cast<int>(v.rows()), static_cast<int>(v.cols())) +
               ", declared " + shape_str(nd.rows, nd.cols));
        out = v;
        break;
      }
      case Op::Constant: out = nd.payload; break;
      case Op::Add: out = val_[nd.a] + val_[nd.b]; break;
      case Op::Sub: out = val_[nd.a] - val_[nd.b]; break;
      case Op::CMul: out = val_[nd.a].cwiseProduct(val_[nd.b]); break;
      case Op::MatMul: out.noalias() = val_[nd.a] * val_[nd.b]; break;
      case Op::Transpose: out = val_[nd.a].transpose(); break;
      case Op::Scale: out = nd.scalar * val_[nd.a]; break;
      case Op::Sigmoid:
        out = (1.0 + (-val_[nd.a].array()).exp()).inverse().matrix();
        break;
      case Op::Tanh: out = val_[nd.a].array().tanh().matrix(); break;
      case Op::Log: out = val_[nd.a].array().log().matrix(); break;
      case Op::Softmax: {
        const Mat& x = val_[nd.a];
        double m = x.maxCoeff();
        Eigen::ArrayXd e = (x.col(0).array() - m).exp();
        out = (e / e.sum()).matrix();
        break;
      }
      case Op::Dot: {
        out.resize(1, 1);
        out(0, 0) = val_[nd.a].col(0).dot(val_[nd.b].col(0));
        break;
      }
      case Op::Gather: out = val_[nd.a].row(nd.index).transpose(); break;
      case Op::Concat: {
        const Mat& a = val_[nd.a];
        const Mat& b = val_[nd.b];
        out.resize(a.rows() + b.rows(), a.cols());
        out.topRows(a.rows()) = a;
        out.bottomRows(b.rows()) = b;
        break;
      }
      case Op::StSample: {
        const Mat& alpha = val_[nd.b];
        int j = 0;
        if (nd.scalar < 0.0) {
          for (int r = 1; r < alpha.rows(); ++r)
            if (alpha(r, 0) > alpha(j, 0)) j = r;
        } else {
          j = inverse_cdf(alpha, nd.scalar);
        }
        aux_[static_cast<size_t>(i)] = j;
        out = val_[nd.a].col(j);
        break;
      }
    }
  }
  ran_ = true;
}

const Mat& Evaluation::value(int id) const {
  if (!ran_) fail("value: forward() has not run");
  if (id < 0 || id >= g_->size()) fail("value: bad node id " + std::to_string(id));
  return val_[static_cast<size_t>(id)];
}

int Evaluation::chosen_index(int id) const {
  if (!ran_) fail("chosen_index: forward() has not run");
  if (id < 0 || id >= g_->size() || g_->node(id).op != Op::StSample)
    fail("chosen_index: node " + std::to_string(id) + " is not st_sample");
  return aux_[static_cast<size_t>(id)];
}

int Evaluation::chosen_index(Expr e) const { return chosen_index(e.id); }

GradientMap Evaluation::backward(Expr output) const {
  if (!ran_) fail("backward: forward() has not run");
  if (output.g != g_) fail("backward: output from a different graph");
  const Node& on = g_->node(output.id);
  if (on.rows != 1 || on.cols != 1)
    fail("backward: output must be 1x1, got " + shape_str(on.rows, on.cols) + " (" +
         std::string(op_name(on.op)) + " node " + std::to_string(output.id) + ")");

  std::vector<Mat> grad(static_cast<size_t>(output.id) + 1);
  grad[static_cast<size_t>(output.id)] = Mat::Ones(1, 1);

  auto acc = [&](int id, const Mat& g) {
    Mat& slot = grad[static_cast<size_t>(id)];
    if (slot.size() == 0)
      slot = g;
    else
      slot += g;
  };

  // Fixed reverse topological order keeps accumulation deterministic.
  for (int i = output.id; i >= 0; --i) {
    const Mat& gi = grad[static_cast<size_t>(i)];
    if (gi.size() == 0) continue;
    const Node& nd = g_->node(i);
    switch (nd.op) {
      case Op::Input:
      case Op::Constant: break;
      case Op::Add:
        acc(nd.a, gi);
        acc(nd.b, gi);
        break;
      case Op::Sub:
        acc(nd.a, gi);
        acc(nd.b, -gi);
        break;
      case Op::CMul:
        acc(nd.a, gi.cwiseProduct(val_[nd.b]));
        acc(nd.b, gi.cwiseProduct(val_[nd.a]));
        break;
      case Op::MatMul:
        acc(nd.a, gi * val_[nd.b].transpose());
        acc(nd.b, val_[nd.a].transpose() * gi);
        break;
      case Op::Transpose: acc(nd.a, gi.transpose()); break;
      case Op::Scale: acc(nd.a, nd.scalar * gi); break;
      case Op::Sigmoid: {
        const Mat& y = val_[static_cast<size_t>(i)];
        acc(nd.a, (gi.array() * y.array() * (1.0 - y.array())).matrix());
        break;
      }
      case Op::Tanh: {
        const Mat& y = val_[static_cast<size_t>(i)];
        acc(nd.a, (gi.array() * (1.0 - y.array().square())).matrix());
        break;
      }
      case Op::Log: acc(nd.a, gi.cwiseQuotient(val_[nd.a])); break;
      case Op::Softmax: {
        const Mat& y = val_[static_cast<size_t>(i)];
        double s = y.col(0).dot(gi.col(0));
        acc(nd.a, (y.array() * (gi.array() - s)).matrix());
        break;
      }
      case Op::Dot:
        acc(nd.a, gi(0, 0) * val_[nd.b]);
        acc(nd.b, gi(0, 0) * val_[nd.a]);
        break;
      case Op::Gather: {
        Mat g = Mat::Zero(g_->node(nd.a).rows, g_->node(nd.a).cols);
        g.row(nd.index) = gi.transpose();
        acc(nd.a, g);
        break;
      }
      case Op::Concat: {
        int ra = g_->node(nd.a).rows;
        int rb = g_->node(nd.b).rows;
        acc(nd.a, gi.topRows(ra));
        acc(nd.b, gi.bottomRows(rb));
        break;
      }
      case Op::StSample:
        // Straight-through surrogate: backward of centroids * alpha.
        acc(nd.a, gi * val_[nd.b].transpose());
        acc(nd.b, val_[nd.a].transpose() * gi);
        break;
    }
  }

  GradientMap out;
  for (const auto& [name, id] : g_->inputs()) {
    const Node& nd = g_->node(id);
    if (id <= output.id && grad[static_cast<size_t>(id)].size() != 0)
      out[name] = grad[static_cast<size_t>(id)];
    else
      out[name] = Mat::Zero(nd.rows, nd.cols);
  }
  return out;
}

FdReport finite_difference_check(const Graph& g, Expr output, const Bindings& bindings,
                                 double step, double tolerance) {
  if (step <= 0.0 || tolerance <= 0.0) fail("finite_difference_check: step/tolerance must be > 0");

  // Local perturbable copies of every binding.
  std::map<std::string, Mat> local;
  for (const auto& [name, m] : bindings) {
    if (m == nullptr) fail("finite_difference_check: null binding '" + name + "'");
    local[name] = *m;
  }
  Bindings ptrs;
  for (auto& [name, m] : local) ptrs[name] = &m;

  Evaluation ev(g);
  ev.forward(ptrs);
  GradientMap analytic = ev.backward(output);

  FdReport report;
  report.tolerance = tolerance;
  // Denominator floor 1e-6: below that a coefficient is numerically zero for
  // an O(1) output, and central differences in binary64 cannot resolve it any
  // tighter (the floor corresponds to an absolute tolerance of tol * 1e-6).
  auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
  };

  for (auto& [name, m] : local) {
    FdEntry entry;
    entry.name = name;
    const Mat& an = analytic.at(name);
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) {
        double saved = m(r, c);
        m(r, c) = saved + step;
        ev.forward(ptrs);
        double up = ev.value(output)(0, 0);
        m(r, c) = saved - step;
        ev.forward(ptrs);
        double down = ev.value(output)(0, 0);
        m(r, c) = saved;
        double fd = (up - down) / (2.0 * step);
        entry.max_rel_error = std::max(entry.max_rel_error, rel(fd, an(r, c)));
      }
    }
    report.worst = std::max(report.worst, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.worst < tolerance;
  return report;
}

}  // namespace sr
