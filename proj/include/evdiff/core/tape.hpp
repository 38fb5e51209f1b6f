#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evdiff/core/errors.hpp"
#include "evdiff/core/params.hpp"
#include "evdiff/core/tensor.hpp"

namespace evdiff {

enum class Op : std::uint8_t {
  Const,
  Param,
  Linear,        // y = W x (+ b)
  RowLinear,     // Y = X W^T (+ 1 b^T), per-row affine
  Conv1d,        // same-padded dilated 1-d convolution over rows
  Axpy,          // y = s0*a + s1*b
  AffineU,       // y = s0*a + s1
  Mul,           // elementwise
  Scale,         // y = s0*a
  Sigmoid,
  Tanh,
  Gelu,
  Silu,
  Slice,         // contiguous 1-d slice
  SliceCols,     // column block of a row-major matrix
  Reshape,       // same data, new logical dims
  ConcatVec,     // flat concatenation
  ConcatCols,    // column-wise concatenation of matrices
  GatherRows,    // table row lookup
  AddRowBcast,   // X + 1 v^T
  TimeCos,       // cos(omega * t + phase), t scalar attribute
  Sum,
  SumSquares,
  SoftmaxCE,     // single logits vector vs one label
  SoftmaxCeRows, // mean row-wise cross-entropy
  SoftmaxRows,
  AddN,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Const: return "const";
    case Op::Param: return "param";
    case Op::Linear: return "linear";
    case Op::RowLinear: return "row_linear";
    case Op::Conv1d: return "conv1d";
    case Op::Axpy: return "axpy";
    case Op::AffineU: return "affine";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::Gelu: return "gelu";
    case Op::Silu: return "silu";
    case Op::Slice: return "slice";
    case Op::SliceCols: return "slice_cols";
    case Op::Reshape: return "reshape";
    case Op::ConcatVec: return "concat";
    case Op::ConcatCols: return "concat_cols";
    case Op::GatherRows: return "gather_rows";
    case Op::AddRowBcast: return "add_row_broadcast";
    case Op::TimeCos: return "time_cos";
    case Op::Sum: return "sum";
    case Op::SumSquares: return "sum_squares";
    case Op::SoftmaxCE: return "softmax_cross_entropy";
    case Op::SoftmaxCeRows: return "softmax_cross_entropy_rows";
    case Op::SoftmaxRows: return "softmax_rows";
    case Op::AddN: return "add_n";
  }
  return "?";
}

/// Replayable record of primitive applications with reverse-mode gradients.
///
/// Forward evaluation happens eagerly as ops are pushed; backward() walks the
/// record once in reverse topological (= insertion) order. Every value is
/// checked for NaN/Inf as it is produced, and every gradient as it is
/// consumed; the first offending node aborts the pass with a diagnostic.
template <typename Scalar>
class Tape {
 public:
  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;  // input node ids
    int i0 = 0, i1 = 0;          // int attributes (offsets, k, dilation, label)
    Scalar s0 = 0, s1 = 0;       // scalar attributes
    int rows = 0, cols = 1;
    VecX<Scalar> value;
    VecX<Scalar> grad;
  };

  explicit Tape(bool grads_enabled = true, bool check_finite = true)
      : grads_(grads_enabled), check_(check_finite) {}

  // ---- graph construction -------------------------------------------------

  int constant(const VecX<Scalar>& v, int rows = -1, int cols = 1) {
    Node n;
    n.op = Op::Const;
    n.rows = rows < 0 ? static_cast<int>(v.size()) : rows;
    n.cols = cols;
    n.value = v;
    return push(std::move(n));
  }

  int constant_scalar(Scalar v) {
    VecX<Scalar> x(1);
    x[0] = v;
    return constant(x, 1, 1);
  }

  /// Leaf bound to a store parameter (memoized per tape: the same name always
  /// yields the same node so gradients accumulate in one place).
  int param(const ParameterStore<Scalar>& store, const std::string& name) {
    auto it = param_ids_.find(name);
    if (it != param_ids_.end()) return it->second;
    const auto& p = store.entry(name);
    Node n;
    n.op = Op::Param;
    n.rows = p.value.rows();
    n.cols = p.value.cols();
    n.value = p.value.data;
    const int id = push(std::move(n));
    param_ids_.emplace(name, id);
    param_leaves_.emplace_back(id, name);
    return id;
  }

  int linear(int x, int W, int b = -1) {
    const Node& nx = node(x);
    const Node& nw = node(W);
    if (nx.cols != 1 || nw.cols != nx.rows)
      throw DimensionError(std::string("linear: W is ") + dim_str(nw) + ", x is " +
                           dim_str(nx));
    if (b >= 0 && node(b).value.size() != nw.rows)
      throw DimensionError("linear: bias length does not match W rows");
    Node n;
    n.op = Op::Linear;
    n.a = x;
    n.b = W;
    n.c = b;
    n.rows = nw.rows;
    return push(std::move(n));
  }

  int row_linear(int X, int W, int b = -1) {
    const Node& nx = node(X);
    const Node& nw = node(W);
    if (nw.cols != nx.cols)
      throw DimensionError(std::string("row_linear: X is ") + dim_str(nx) + ", W is " +
                           dim_str(nw));
    if (b >= 0 && node(b).value.size() != nw.rows)
      throw DimensionError("row_linear: bias length does not match W rows");
    Node n;
    n.op = Op::RowLinear;
    n.a = X;
    n.b = W;
    n.c = b;
    n.rows = nx.rows;
    n.cols = nw.rows;
    return push(std::move(n));
  }

  /// Same-padded dilated convolution. X is [L, c_in] (rows = positions),
  /// the kernel parameter is [c_out, c_in * k] holding logical [c_out, c_in, k].
  int conv1d(int X, int kernel, int k, int dilation) {
    const Node& nx = node(X);
    const Node& nk = node(kernel);
    if (k < 1 || k % 2 == 0) throw ConfigError("conv1d: kernel width must be odd");
    if (dilation < 1) throw ConfigError("conv1d: dilation must be >= 1");
    if (nk.cols != nx.cols * k)
      throw DimensionError("conv1d: kernel columns must equal c_in * k");
    Node n;
    n.op = Op::Conv1d;
    n.a = X;
    n.b = kernel;
    n.i0 = k;
    n.i1 = dilation;
    n.rows = nx.rows;
    n.cols = nk.rows;
    return push(std::move(n));
  }

  int axpy(Scalar s0, int a, Scalar s1, int b) {
    check_same_numel(a, b, "axpy");
    Node n;
    n.op = Op::Axpy;
    n.a = a;
    n.b = b;
    n.s0 = s0;
    n.s1 = s1;
    n.rows = node(a).rows;
    n.cols = node(a).cols;
    return push(std::move(n));
  }

  int add(int a, int b) { return axpy(Scalar(1), a, Scalar(1), b); }
  int sub(int a, int b) { return axpy(Scalar(1), a, Scalar(-1), b); }

  /// y = s0*a + s1 (scalar shift, elementwise).
  int affine(int a, Scalar s0, Scalar s1) {
    Node n;
    n.op = Op::AffineU;
    n.a = a;
    n.s0 = s0;
    n.s1 = s1;
    n.rows = node(a).rows;
    n.cols = node(a).cols;
    return push(std::move(n));
  }

  int mul(int a, int b) {
    check_same_numel(a, b, "mul");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.rows = node(a).rows;
    n.cols = node(a).cols;
    return push(std::move(n));
  }

  int scale(int a, Scalar s0) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.s0 = s0;
    n.rows = node(a).rows;
    n.cols = node(a).cols;
    return push(std::move(n));
  }

  int sigmoid(int a) { return unary(Op::Sigmoid, a); }
  int tanh(int a) { return unary(Op::Tanh, a); }
  int gelu(int a) { return unary(Op::Gelu, a); }
  int silu(int a) { return unary(Op::Silu, a); }

  int slice(int a, int offset, int len) {
    if (offset < 0 || len < 1 || offset + len > node(a).value.size())
      throw DimensionError("slice: range out of bounds");
    Node n;
    n.op = Op::Slice;
    n.a = a;
    n.i0 = offset;
    n.rows = len;
    return push(std::move(n));
  }

  int slice_cols(int a, int col0, int ncols) {
    const Node& na = node(a);
    if (col0 < 0 || ncols < 1 || col0 + ncols > na.cols)
      throw DimensionError("slice_cols: column range out of bounds");
    Node n;
    n.op = Op::SliceCols;
    n.a = a;
    n.i0 = col0;
    n.rows = na.rows;
    n.cols = ncols;
    return push(std::move(n));
  }

  int reshape(int a, int rows, int cols) {
    const Node& na = node(a);
    if (rows * cols != static_cast<int>(na.value.size()))
      throw DimensionError("reshape: element count mismatch");
    Node n;
    n.op = Op::Reshape;
    n.a = a;
    n.rows = rows;
    n.cols = cols;
    return push(std::move(n));
  }

  int concat(std::span<const int> parts) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    Node n;
    n.op = Op::ConcatVec;
    n.i0 = static_cast<int>(pool_.size());
    n.i1 = static_cast<int>(parts.size());
    int total = 0;
    for (const int id : parts) {
      pool_.push_back(id);
      total += static_cast<int>(node(id).value.size());
    }
    n.rows = total;
    return push(std::move(n));
  }

  int concat_cols(std::span<const int> parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    const int L = node(parts[0]).rows;
    Node n;
    n.op = Op::ConcatCols;
    n.i0 = static_cast<int>(pool_.size());
    n.i1 = static_cast<int>(parts.size());
    int total = 0;
    for (const int id : parts) {
      if (node(id).rows != L)
        throw DimensionError("concat_cols: row counts differ");
      pool_.push_back(id);
      total += node(id).cols;
    }
    n.rows = L;
    n.cols = total;
    return push(std::move(n));
  }

  int gather_rows(int table, std::span<const int> indices) {
    const Node& nt = node(table);
    Node n;
    n.op = Op::GatherRows;
    n.a = table;
    n.i0 = static_cast<int>(pool_.size());
    n.i1 = static_cast<int>(indices.size());
    for (const int idx : indices) {
      if (idx < 0 || idx >= nt.rows)
        throw IndexError("gather_rows: index " + std::to_string(idx) + " out of [0," +
                         std::to_string(nt.rows) + ")");
      pool_.push_back(idx);
    }
    n.rows = static_cast<int>(indices.size());
    n.cols = nt.cols;
    return push(std::move(n));
  }

  int add_row_broadcast(int X, int v) {
    const Node& nx = node(X);
    if (node(v).value.size() != nx.cols)
      throw DimensionError("add_row_broadcast: vector length must equal columns");
    Node n;
    n.op = Op::AddRowBcast;
    n.a = X;
    n.b = v;
    n.rows = nx.rows;
    n.cols = nx.cols;
    return push(std::move(n));
  }

  int time_cos(int omega, int phase, Scalar t) {
    check_same_numel(omega, phase, "time_cos");
    Node n;
    n.op = Op::TimeCos;
    n.a = omega;
    n.b = phase;
    n.s0 = t;
    n.rows = static_cast<int>(node(omega).value.size());
    return push(std::move(n));
  }

  int sum(int a) { return reduction(Op::Sum, a); }
  int sum_squares(int a) { return reduction(Op::SumSquares, a); }

  int softmax_cross_entropy(int logits, int label) {
    const Node& nl = node(logits);
    if (label < 0 || label >= static_cast<int>(nl.value.size()))
      throw IndexError("softmax_cross_entropy: label " + std::to_string(label) +
                       " out of range");
    Node n;
    n.op = Op::SoftmaxCE;
    n.a = logits;
    n.i0 = label;
    n.rows = 1;
    return push(std::move(n));
  }

  /// Mean cross-entropy of each row of `logits` [L,K] against `labels`.
  int softmax_cross_entropy_rows(int logits, std::span<const int> labels) {
    const Node& nl = node(logits);
    if (static_cast<int>(labels.size()) != nl.rows)
      throw DimensionError("softmax_cross_entropy_rows: label count != rows");
    Node n;
    n.op = Op::SoftmaxCeRows;
    n.a = logits;
    n.i0 = static_cast<int>(pool_.size());
    n.i1 = static_cast<int>(labels.size());
    for (const int l : labels) {
      if (l < 0 || l >= nl.cols)
        throw IndexError("softmax_cross_entropy_rows: label " + std::to_string(l) +
                         " out of range");
      pool_.push_back(l);
    }
    n.rows = 1;
    return push(std::move(n));
  }

  int softmax_rows(int logits) {
    Node n;
    n.op = Op::SoftmaxRows;
    n.a = logits;
    n.rows = node(logits).rows;
    n.cols = node(logits).cols;
    return push(std::move(n));
  }

  int add_n(std::span<const int> parts) {
    if (parts.empty()) throw ContractError("add_n: no inputs");
    Node n;
    n.op = Op::AddN;
    n.i0 = static_cast<int>(pool_.size());
    n.i1 = static_cast<int>(parts.size());
    for (const int id : parts) {
      check_same_numel(parts[0], id, "add_n");
      pool_.push_back(id);
    }
    n.rows = node(parts[0]).rows;
    n.cols = node(parts[0]).cols;
    return push(std::move(n));
  }

  int mean_n(std::span<const int> parts) {
    return scale(add_n(parts), Scalar(1) / Scalar(parts.size()));
  }

  // ---- access ---------------------------------------------------------------

  const VecX<Scalar>& value(int id) const { return node(id).value; }
  const VecX<Scalar>& grad(int id) const { return node(id).grad; }
  Scalar scalar_value(int id) const {
    const Node& n = node(id);
    if (n.value.size() != 1) throw ContractError("scalar_value: node is not scalar");
    return n.value[0];
  }
  int rows(int id) const { return node(id).rows; }
  int cols(int id) const { return node(id).cols; }
  std::size_t size() const { return nodes_.size(); }

  // ---- backward -------------------------------------------------------------

  /// Reverse accumulation from a scalar loss node. Node gradients are reset
  /// at the start of each call; use accumulate_param_grads afterwards to fold
  /// leaf gradients into a GradientBuffer (repeated backward+accumulate cycles
  /// add up there).
  void backward(int loss) {
    if (!grads_) throw ContractError("backward: tape built with gradients disabled");
    const Node& nl = node(loss);
    if (nl.value.size() != 1)
      throw ContractError("backward: loss node is not scalar");
    for (auto& n : nodes_) {
      n.grad.setZero(n.value.size());
    }
    nodes_[loss].grad[0] = Scalar(1);
    for (int i = loss; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0 || n.grad.isZero(Scalar(0))) continue;
      if (check_ && !n.grad.allFinite())
        throw NumericError(diag("non-finite gradient", i));
      backward_one(i);
    }
  }

  /// Adds dLoss/dp for every trainable parameter leaf into `out`.
  void accumulate_param_grads(const ParameterStore<Scalar>& store,
                              GradientBuffer<Scalar>& out) const {
    for (const auto& [id, name] : param_leaves_) {
      if (!store.entry(name).trainable) continue;
      const Node& n = node(id);
      if (n.grad.size() > 0) out.add(name, n.grad);
    }
  }

 private:
  int unary(Op op, int a) {
    Node n;
    n.op = op;
    n.a = a;
    n.rows = node(a).rows;
    n.cols = node(a).cols;
    return push(std::move(n));
  }

  int reduction(Op op, int a) {
    Node n;
    n.op = op;
    n.a = a;
    n.rows = 1;
    return push(std::move(n));
  }

  void check_same_numel(int a, int b, const char* what) const {
    if (node(a).value.size() != node(b).value.size())
      throw DimensionError(std::string(what) + ": operand sizes differ");
  }

  static std::string dim_str(const Node& n) {
    return "[" + std::to_string(n.rows) + "x" + std::to_string(n.cols) + "]";
  }

  std::string diag(const char* what, int id) const {
    const Node& n = node(id);
    std::string s = std::string(what) + " at node #" + std::to_string(id) + " (" +
                    op_name(n.op) + ")";
    for (const auto& [pid, name] : param_leaves_)
      if (pid == id) s += " parameter '" + name + "'";
    return s;
  }

  const Node& node(int id) const { return nodes_.at(id); }
  Node& node(int id) { return nodes_.at(id); }

  int push(Node&& n) {
    forward_one(n);
    if (check_ && !n.value.allFinite()) {
      nodes_.push_back(std::move(n));
      throw NumericError(diag("non-finite output", static_cast<int>(nodes_.size()) - 1));
    }
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  static Scalar stable_sigmoid(Scalar x) {
    if (x >= Scalar(0)) {
      const Scalar e = std::exp(-x);
      return Scalar(1) / (Scalar(1) + e);
    }
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
  }

  /// Stable softmax of a logits block into `out`; returns log-sum-exp.
  static Scalar softmax_into(const Scalar* logits, int K, VecX<Scalar>& out) {
    Eigen::Map<const VecX<Scalar>> x(logits, K);
    const Scalar m = x.maxCoeff();
    out = (x.array() - m).exp();
    const Scalar z = out.sum();
    out /= z;
    return m + std::log(z);
  }

  void forward_one(Node& n) {
    switch (n.op) {
      case Op::Const:
      case Op::Param:
        break;
      case Op::Linear: {
        const Node& x = node(n.a);
        const Node& w = node(n.b);
        ConstMatMap<Scalar> W(w.value.data(), w.rows, w.cols);
        n.value.noalias() = W * x.value;
        if (n.c >= 0) n.value += node(n.c).value;
        break;
      }
      case Op::RowLinear: {
        const Node& x = node(n.a);
        const Node& w = node(n.b);
        ConstMatMap<Scalar> X(x.value.data(), x.rows, x.cols);
        ConstMatMap<Scalar> W(w.value.data(), w.rows, w.cols);
        n.value.resize(n.rows * n.cols);
        MatMap<Scalar> Y(n.value.data(), n.rows, n.cols);
        Y.noalias() = X * W.transpose();
        if (n.c >= 0) Y.rowwise() += node(n.c).value.transpose();
        break;
      }
      case Op::Conv1d: {
        const Node& x = node(n.a);
        const Node& w = node(n.b);
        const int L = x.rows, cin = x.cols, cout = n.cols;
        const int k = n.i0, dil = n.i1, half = (k - 1) / 2;
        ConstMatMap<Scalar> X(x.value.data(), L, cin);
        n.value.setZero(L * cout);
        MatMap<Scalar> Y(n.value.data(), L, cout);
        using StrideD = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;
        for (int r = 0; r < k; ++r) {
          Eigen::Map<const RowMat<Scalar>, 0, StrideD> Kr(
              w.value.data() + r, cout, cin, StrideD(cin * k, k));
          const int shift = (r - half) * dil;
          const int lo = std::max(0, -shift), hi = std::min(L, L - shift);
          for (int i = lo; i < hi; ++i)
            Y.row(i).noalias() += (Kr * X.row(i + shift).transpose()).transpose();
        }
        break;
      }
      case Op::Axpy:
        n.value = n.s0 * node(n.a).value + n.s1 * node(n.b).value;
        break;
      case Op::AffineU:
        n.value = (n.s0 * node(n.a).value.array() + n.s1).matrix();
        break;
      case Op::Mul:
        n.value = node(n.a).value.cwiseProduct(node(n.b).value);
        break;
      case Op::Scale:
        n.value = n.s0 * node(n.a).value;
        break;
      case Op::Sigmoid:
        n.value = node(n.a).value.unaryExpr([](Scalar v) { return stable_sigmoid(v); });
        break;
      case Op::Tanh:
        n.value = node(n.a).value.array().tanh().matrix();
        break;
      case Op::Gelu:
        n.value = node(n.a).value.unaryExpr([](Scalar v) {
          return Scalar(0.5) * v *
                 (Scalar(1) + std::erf(v / std::sqrt(Scalar(2))));
        });
        break;
      case Op::Silu:
        n.value = node(n.a).value.unaryExpr(
            [](Scalar v) { return v * stable_sigmoid(v); });
        break;
      case Op::Slice:
        n.value = node(n.a).value.segment(n.i0, n.rows);
        break;
      case Op::Reshape:
        n.value = node(n.a).value;
        break;
      case Op::SliceCols: {
        const Node& x = node(n.a);
        ConstMatMap<Scalar> X(x.value.data(), x.rows, x.cols);
        n.value.resize(n.rows * n.cols);
        MatMap<Scalar>(n.value.data(), n.rows, n.cols) = X.middleCols(n.i0, n.cols);
        break;
      }
      case Op::ConcatVec: {
        n.value.resize(n.rows);
        int off = 0;
        for (int p = 0; p < n.i1; ++p) {
          const Node& x = node(pool_[n.i0 + p]);
          n.value.segment(off, x.value.size()) = x.value;
          off += static_cast<int>(x.value.size());
        }
        break;
      }
      case Op::ConcatCols: {
        n.value.resize(n.rows * n.cols);
        MatMap<Scalar> Y(n.value.data(), n.rows, n.cols);
        int off = 0;
        for (int p = 0; p < n.i1; ++p) {
          const Node& x = node(pool_[n.i0 + p]);
          Y.middleCols(off, x.cols) = ConstMatMap<Scalar>(x.value.data(), x.rows, x.cols);
          off += x.cols;
        }
        break;
      }
      case Op::GatherRows: {
        const Node& t = node(n.a);
        ConstMatMap<Scalar> T(t.value.data(), t.rows, t.cols);
        n.value.resize(n.rows * n.cols);
        MatMap<Scalar> Y(n.value.data(), n.rows, n.cols);
        for (int i = 0; i < n.rows; ++i) Y.row(i) = T.row(pool_[n.i0 + i]);
        break;
      }
      case Op::AddRowBcast: {
        const Node& x = node(n.a);
        n.value = x.value;
        MatMap<Scalar> Y(n.value.data(), n.rows, n.cols);
        Y.rowwise() += node(n.b).value.transpose();
        break;
      }
      case Op::TimeCos:
        n.value = (node(n.a).value.array() * n.s0 + node(n.b).value.array())
                      .cos()
                      .matrix();
        break;
      case Op::Sum: {
        n.value.resize(1);
        n.value[0] = node(n.a).value.sum();
        break;
      }
      case Op::SumSquares: {
        n.value.resize(1);
        n.value[0] = node(n.a).value.squaredNorm();
        break;
      }
      case Op::SoftmaxCE: {
        const Node& x = node(n.a);
        VecX<Scalar> p;
        const Scalar lse = softmax_into(x.value.data(), static_cast<int>(x.value.size()), p);
        n.value.resize(1);
        n.value[0] = lse - x.value[n.i0];
        break;
      }
      case Op::SoftmaxCeRows: {
        const Node& x = node(n.a);
        ConstMatMap<Scalar> X(x.value.data(), x.rows, x.cols);
        Scalar acc = 0;
        VecX<Scalar> p;
        for (int i = 0; i < x.rows; ++i) {
          const Scalar lse = softmax_into(X.row(i).data(), x.cols, p);
          acc += lse - X(i, pool_[n.i0 + i]);
        }
        n.value.resize(1);
        n.value[0] = acc / Scalar(x.rows);
        break;
      }
      case Op::SoftmaxRows: {
        const Node& x = node(n.a);
        ConstMatMap<Scalar> X(x.value.data(), x.rows, x.cols);
        n.value.resize(n.rows * n.cols);
        MatMap<Scalar> Y(n.value.data(), n.rows, n.cols);
        VecX<Scalar> p;
        for (int i = 0; i < x.rows; ++i) {
          softmax_into(X.row(i).data(), x.cols, p);
          Y.row(i) = p.transpose();
        }
        break;
      }
      case Op::AddN: {
        n.value = node(pool_[n.i0]).value;
        for (int p = 1; p < n.i1; ++p) n.value += node(pool_[n.i0 + p]).value;
        break;
      }
    }
  }

  VecX<Scalar>& g(int id) { return nodes_[id].grad; }

  void backward_one(int id) {
    Node& n = nodes_[id];
    const VecX<Scalar>& gy = n.grad;
    switch (n.op) {
      case Op::Const:
      case Op::Param:
        break;
      case Op::Linear: {
        const Node& x = node(n.a);
        const Node& w = node(n.b);
        ConstMatMap<Scalar> W(w.value.data(), w.rows, w.cols);
        g(n.a).noalias() += W.transpose() * gy;
        MatMap<Scalar> gW(g(n.b).data(), w.rows, w.cols);
        gW.noalias() += gy * x.value.transpose();
        if (n.c >= 0) g(n.c) += gy;
        break;
      }
      case Op::RowLinear: {
        const Node& x = node(n.a);
        const Node& w = node(n.b);
        ConstMatMap<Scalar> X(x.value.data(), x.rows, x.cols);
        ConstMatMap<Scalar> W(w.value.data(), w.rows, w.cols);
        ConstMatMap<Scalar> GY(gy.data(), n.rows, n.cols);
        MatMap<Scalar> gX(g(n.a).data(), x.rows, x.cols);
        gX.noalias() += GY * W;
        MatMap<Scalar> gW(g(n.b).data(), w.rows, w.cols);
        gW.noalias() += GY.transpose() * X;
        if (n.c >= 0) g(n.c) += GY.colwise().sum().transpose();
        break;
      }
      case Op::Conv1d: {
        const Node& x = node(n.a);
        const Node& w = node(n.b);
        const int L = x.rows, cin = x.cols, cout = n.cols;
        const int k = n.i0, dil = n.i1, half = (k - 1) / 2;
        ConstMatMap<Scalar> X(x.value.data(), L, cin);
        ConstMatMap<Scalar> GY(gy.data(), L, cout);
        MatMap<Scalar> gX(g(n.a).data(), L, cin);
        using StrideD = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;
        for (int r = 0; r < k; ++r) {
          Eigen::Map<const RowMat<Scalar>, 0, StrideD> Kr(
              w.value.data() + r, cout, cin, StrideD(cin * k, k));
          Eigen::Map<RowMat<Scalar>, 0, StrideD> gKr(
              g(n.b).data() + r, cout, cin, StrideD(cin * k, k));
          const int shift = (r - half) * dil;
          const int lo = std::max(0, -shift), hi = std::min(L, L - shift);
          for (int i = lo; i < hi; ++i) {
            gX.row(i + shift).noalias() += GY.row(i) * Kr;
            gKr.noalias() += GY.row(i).transpose() * X.row(i + shift);
          }
        }
        break;
      }
      case Op::Axpy:
        g(n.a) += n.s0 * gy;
        g(n.b) += n.s1 * gy;
        break;
      case Op::AffineU:
        g(n.a) += n.s0 * gy;
        break;
      case Op::Mul:
        g(n.a) += gy.cwiseProduct(node(n.b).value);
        g(n.b) += gy.cwiseProduct(node(n.a).value);
        break;
      case Op::Scale:
        g(n.a) += n.s0 * gy;
        break;
      case Op::Sigmoid:
        g(n.a).array() +=
            gy.array() * n.value.array() * (Scalar(1) - n.value.array());
        break;
      case Op::Tanh:
        g(n.a).array() += gy.array() * (Scalar(1) - n.value.array().square());
        break;
      case Op::Gelu: {
        const auto& xv = node(n.a).value;
        g(n.a) += gy.cwiseProduct(xv.unaryExpr([](Scalar v) {
          const Scalar cdf =
              Scalar(0.5) * (Scalar(1) + std::erf(v / std::sqrt(Scalar(2))));
          const Scalar pdf = std::exp(Scalar(-0.5) * v * v) /
                             std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
          return cdf + v * pdf;
        }));
        break;
      }
      case Op::Silu: {
        const auto& xv = node(n.a).value;
        g(n.a) += gy.cwiseProduct(xv.unaryExpr([](Scalar v) {
          const Scalar s = stable_sigmoid(v);
          return s * (Scalar(1) + v * (Scalar(1) - s));
        }));
        break;
      }
      case Op::Slice:
        g(n.a).segment(n.i0, n.rows) += gy;
        break;
      case Op::Reshape:
        g(n.a) += gy;
        break;
      case Op::SliceCols: {
        const Node& x = node(n.a);
        MatMap<Scalar> gX(g(n.a).data(), x.rows, x.cols);
        gX.middleCols(n.i0, n.cols) += ConstMatMap<Scalar>(gy.data(), n.rows, n.cols);
        break;
      }
      case Op::ConcatVec: {
        int off = 0;
        for (int p = 0; p < n.i1; ++p) {
          const int id_in = pool_[n.i0 + p];
          const int len = static_cast<int>(node(id_in).value.size());
          g(id_in) += gy.segment(off, len);
          off += len;
        }
        break;
      }
      case Op::ConcatCols: {
        ConstMatMap<Scalar> GY(gy.data(), n.rows, n.cols);
        int off = 0;
        for (int p = 0; p < n.i1; ++p) {
          const int id_in = pool_[n.i0 + p];
          const Node& x = node(id_in);
          MatMap<Scalar> gX(g(id_in).data(), x.rows, x.cols);
          gX += GY.middleCols(off, x.cols);
          off += x.cols;
        }
        break;
      }
      case Op::GatherRows: {
        const Node& t = node(n.a);
        MatMap<Scalar> gT(g(n.a).data(), t.rows, t.cols);
        ConstMatMap<Scalar> GY(gy.data(), n.rows, n.cols);
        for (int i = 0; i < n.rows; ++i) gT.row(pool_[n.i0 + i]) += GY.row(i);
        break;
      }
      case Op::AddRowBcast: {
        g(n.a) += gy;
        ConstMatMap<Scalar> GY(gy.data(), n.rows, n.cols);
        g(n.b) += GY.colwise().sum().transpose();
        break;
      }
      case Op::TimeCos: {
        const auto s = (node(n.a).value.array() * n.s0 + node(n.b).value.array())
                           .sin()
                           .matrix()
                           .eval();
        g(n.a).array() -= gy.array() * s.array() * n.s0;
        g(n.b).array() -= gy.array() * s.array();
        break;
      }
      case Op::Sum:
        g(n.a).array() += gy[0];
        break;
      case Op::SumSquares:
        g(n.a) += (Scalar(2) * gy[0]) * node(n.a).value;
        break;
      case Op::SoftmaxCE: {
        const Node& x = node(n.a);
        VecX<Scalar> p;
        softmax_into(x.value.data(), static_cast<int>(x.value.size()), p);
        p[n.i0] -= Scalar(1);
        g(n.a) += gy[0] * p;
        break;
      }
      case Op::SoftmaxCeRows: {
        const Node& x = node(n.a);
        ConstMatMap<Scalar> X(x.value.data(), x.rows, x.cols);
        MatMap<Scalar> gX(g(n.a).data(), x.rows, x.cols);
        const Scalar co = gy[0] / Scalar(x.rows);
        VecX<Scalar> p;
        for (int i = 0; i < x.rows; ++i) {
          softmax_into(X.row(i).data(), x.cols, p);
          p[pool_[n.i0 + i]] -= Scalar(1);
          gX.row(i) += co * p.transpose();
        }
        break;
      }
      case Op::SoftmaxRows: {
        ConstMatMap<Scalar> Y(n.value.data(), n.rows, n.cols);
        ConstMatMap<Scalar> GY(gy.data(), n.rows, n.cols);
        MatMap<Scalar> gX(g(n.a).data(), n.rows, n.cols);
        for (int i = 0; i < n.rows; ++i) {
          const Scalar dot = GY.row(i).dot(Y.row(i));
          gX.row(i).array() += (GY.row(i).array() - dot) * Y.row(i).array();
        }
        break;
      }
      case Op::AddN: {
        for (int p = 0; p < n.i1; ++p) g(pool_[n.i0 + p]) += gy;
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<int> pool_;
  std::map<std::string, int> param_ids_;
  std::vector<std::pair<int, std::string>> param_leaves_;
  bool grads_;
  bool check_;
};

}  // namespace evdiff
