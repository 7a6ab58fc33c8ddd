// SPDX-License-Identifier: Apache-2.0
/**
 * @file   autodiff.hpp
 * @brief  Tape-based reverse-mode differentiation over the tensor kernels.
 *
 * A Tape records one node per operation. Node ids grow monotonically, so the
 * recording order is already a topological order; backward() walks it in
 * reverse and accumulates into each input's gradient in that fixed order,
 * which makes gradients bit-reproducible.
 *
 * A Tape is not thread-safe. Use one tape per sequence and merge gradients
 * afterwards.
 */

#ifndef MVLSTM_AUTODIFF_HPP
#define MVLSTM_AUTODIFF_HPP

#include <mvlstm/tensor.hpp>

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

namespace mvlstm::ad {

enum class Op : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Scale,
  AddRowBias,
  AddScalar,
  Tanh,
  Sigmoid,
  Exp,
  Log,
  Square,
  MatVec,
  VecMat,
  RowDot,
  TensordotAxisN,
  TensordotSeq,
  SeqScores,
  VarProduct,
  SoftmaxRows,
  LogSumExp,
  Sum,
  Concat,
  Slice,
  Reshape,
};

const char *op_name(Op op);

class Tape;

/// Per-node operation arguments (scale factor, slice bounds, concat axis).
struct Attr {
  double scalar = 0.0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Lightweight handle to a node on a tape.
class Var {
public:
  Var() = default;

  Tape *tape() const { return tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor &value() const;
  const Shape &shape() const { return value().shape(); }

private:
  friend class Tape;
  Var(Tape *tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape *tape_ = nullptr;
  std::uint32_t id_ = 0;
};

class Tape {
public:
  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  /// Leaf that does not receive a gradient.
  Var constant(Tensor value);
  /// Differentiable leaf owning its value.
  Var variable(Tensor value);
  /// Differentiable leaf viewing caller-owned storage, which must outlive the
  /// tape and stay unmodified while it is in use.
  Var parameter(const Tensor &value);

  const Tensor &value(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  Op op(Var v) const { return node(v).op; }
  std::span<const std::uint32_t> inputs(Var v) const {
    return node(v).inputs;
  }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a shape-[1] loss. Clears gradients from any previous
  /// sweep first.
  void backward(Var loss);

  /// Gradient after backward(); zeros when the node did not influence the loss.
  Tensor grad(Var v) const;

  /// Appends a node whose value has already been computed from its inputs.
  Var record(Op op, std::initializer_list<Var> inputs, Tensor value,
             Attr attr = {});
  Var record(Op op, std::span<const Var> inputs, Tensor value,
             Attr attr = {});

private:
  struct Node {
    Op op = Op::Leaf;
    std::vector<std::uint32_t> inputs;
    Tensor owned;
    const Tensor *external = nullptr;
    Tensor grad;
    Attr attr;
    bool requires_grad = false;

    const Tensor &value() const { return external ? *external : owned; }
  };

  const Node &node(Var v) const;
  Node &node(Var v);
  Tensor &grad_slot(std::uint32_t id);
  void propagate(const Node &n);

  std::deque<Node> nodes_;
};

// Recorded operations. Every function evaluates the forward value with the
// matching tensor kernel.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_row_bias(Var m, Var b);
Var add_scalar(Var a, Var s);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var matvec(Var a, Var b);
Var vecmat(Var v, Var a);
Var row_dot(Var a, Var b);
Var tensordot_axis_n(Var w, Var h);
Var tensordot_seq(Var a, Var hs);
Var seq_scores(Var hs, Var w);
Var var_product(Var wx, Var x);
Var softmax_rows(Var e);
Var logsumexp(Var a);
Var sum(Var a);
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(Var a, std::size_t begin, std::size_t end);
Var reshape(Var a, const Shape &shape);
Var vec(Var h);
Var matricize(Var v, std::size_t n_vars, std::size_t width);

/// Scalar loss built on a fresh tape from differentiable parameter leaves.
using ScalarFn = std::function<Var(Tape &, std::span<const Var>)>;

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t param_index = 0;
  std::size_t element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradcheckOptions {
  double step = 1e-5;
  /// Added to the first analytic gradient entry. Negative-control hook.
  double corrupt = 0.0;
};

/// Compares tape gradients with central finite differences. Relative error
/// per element is |g_a - g_fd| / max(1e-8, |g_a| + |g_fd|).
GradcheckResult gradcheck(const ScalarFn &f, std::vector<Tensor> params,
                          const GradcheckOptions &options = {});

} // namespace mvlstm::ad

#endif // MVLSTM_AUTODIFF_HPP
