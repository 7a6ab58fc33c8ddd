// SPDX-License-Identifier: Apache-2.0
/**
 * @file   autodiff.cpp
 * @brief  Tape recording, reverse sweep and finite-difference checking.
 */

#include <mvlstm/autodiff.hpp>
#include <mvlstm/error.hpp>

#include <algorithm>
#include <cmath>

namespace mvlstm::ad {

namespace k = mvlstm::kernels;

const char *op_name(Op op) {
  switch (op) {
  case Op::Leaf: return "leaf";
  case Op::Add: return "add";
  case Op::Sub: return "sub";
  case Op::Mul: return "mul";
  case Op::Scale: return "scale";
  case Op::AddRowBias: return "add_row_bias";
  case Op::AddScalar: return "add_scalar";
  case Op::Tanh: return "tanh";
  case Op::Sigmoid: return "sigmoid";
  case Op::Exp: return "exp";
  case Op::Log: return "log";
  case Op::Square: return "square";
  case Op::MatVec: return "matvec";
  case Op::VecMat: return "vecmat";
  case Op::RowDot: return "row_dot";
  case Op::TensordotAxisN: return "tensordot_axis_n";
  case Op::TensordotSeq: return "tensordot_seq";
  case Op::SeqScores: return "seq_scores";
  case Op::VarProduct: return "var_product";
  case Op::SoftmaxRows: return "softmax_rows";
  case Op::LogSumExp: return "logsumexp";
  case Op::Sum: return "sum";
  case Op::Concat: return "concat";
  case Op::Slice: return "slice";
  case Op::Reshape: return "reshape";
  }
  return "?";
}

const Tensor &Var::value() const {
  if (!tape_)
    throw ContractViolation("use of an unbound Var");
  return tape_->value(*this);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::variable(Tensor value) {
  Var v = constant(std::move(value));
  nodes_.back().requires_grad = true;
  return v;
}

Var Tape::parameter(const Tensor &value) {
  Node n;
  n.external = &value;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tape::Node &Tape::node(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size())
    throw ContractViolation("Var does not belong to this tape");
  return nodes_[v.id()];
}

Tape::Node &Tape::node(Var v) {
  return const_cast<Node &>(std::as_const(*this).node(v));
}

const Tensor &Tape::value(Var v) const { return node(v).value(); }

Var Tape::record(Op op, std::initializer_list<Var> inputs, Tensor value,
                 Attr attr) {
  return record(op, std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(value), attr);
}

Var Tape::record(Op op, std::span<const Var> inputs, Tensor value,
                 Attr attr) {
  Node n;
  n.op = op;
  n.attr = attr;
  n.owned = std::move(value);
  n.inputs.reserve(inputs.size());
  for (Var in : inputs) {
    const Node &src = node(in);
    n.requires_grad = n.requires_grad || src.requires_grad;
    n.inputs.push_back(in.id());
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor &Tape::grad_slot(std::uint32_t id) {
  Node &n = nodes_[id];
  if (n.grad.empty())
    n.grad = Tensor(n.value().shape());
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node &n = node(v);
  if (n.grad.empty())
    return Tensor(n.value().shape());
  return n.grad;
}

void Tape::backward(Var loss) {
  const Node &root = node(loss);
  if (root.value().size() != 1 || root.value().rank() != 1)
    throw ContractViolation("backward() needs a shape-[1] loss, got " +
                            root.value().shape().str());
  for (Node &n : nodes_)
    n.grad = Tensor();
  grad_slot(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node &n = nodes_[id];
    if (n.op == Op::Leaf || !n.requires_grad || n.grad.empty())
      continue;
    propagate(n);
  }
}

void Tape::propagate(const Node &n) {
  const Tensor &g = n.grad;
  const Tensor &y = n.value();
  auto in = [&](std::size_t i) -> const Node & { return nodes_[n.inputs[i]]; };
  auto wants = [&](std::size_t i) { return in(i).requires_grad; };
  auto slot = [&](std::size_t i) -> Tensor & {
    return grad_slot(n.inputs[i]);
  };
  auto accumulate = [&](std::size_t i, auto &&term) {
    if (!wants(i))
      return;
    Tensor &dst = slot(i);
    for (std::size_t e = 0; e < dst.size(); ++e)
      dst[e] += term(e);
  };

  switch (n.op) {
  case Op::Leaf:
    break;
  case Op::Add:
    accumulate(0, [&](std::size_t e) { return g[e]; });
    accumulate(1, [&](std::size_t e) { return g[e]; });
    break;
  case Op::Sub:
    accumulate(0, [&](std::size_t e) { return g[e]; });
    accumulate(1, [&](std::size_t e) { return -g[e]; });
    break;
  case Op::Mul: {
    const Tensor &a = in(0).value(), &b = in(1).value();
    accumulate(0, [&](std::size_t e) { return g[e] * b[e]; });
    accumulate(1, [&](std::size_t e) { return g[e] * a[e]; });
    break;
  }
  case Op::Scale:
    accumulate(0, [&](std::size_t e) { return g[e] * n.attr.scalar; });
    break;
  case Op::AddRowBias: {
    accumulate(0, [&](std::size_t e) { return g[e]; });
    if (wants(1)) {
      Tensor &gb = slot(1);
      for (std::size_t r = 0; r < g.extent(0); ++r)
        for (std::size_t c = 0; c < g.extent(1); ++c)
          gb[r] += g(r, c);
    }
    break;
  }
  case Op::AddScalar: {
    accumulate(0, [&](std::size_t e) { return g[e]; });
    if (wants(1)) {
      double total = 0.0;
      for (double v : g.data())
        total += v;
      slot(1)[0] += total;
    }
    break;
  }
  case Op::Tanh:
    accumulate(0, [&](std::size_t e) { return g[e] * (1.0 - y[e] * y[e]); });
    break;
  case Op::Sigmoid:
    accumulate(0, [&](std::size_t e) { return g[e] * y[e] * (1.0 - y[e]); });
    break;
  case Op::Exp:
    accumulate(0, [&](std::size_t e) { return g[e] * y[e]; });
    break;
  case Op::Log: {
    const Tensor &a = in(0).value();
    accumulate(0, [&](std::size_t e) { return g[e] / a[e]; });
    break;
  }
  case Op::Square: {
    const Tensor &a = in(0).value();
    accumulate(0, [&](std::size_t e) { return 2.0 * a[e] * g[e]; });
    break;
  }
  case Op::MatVec: {
    const Tensor &a = in(0).value(), &b = in(1).value();
    const std::size_t rows = a.extent(0), cols = a.extent(1);
    if (wants(0)) {
      double *ga = slot(0).data().data();
      const double *bv = b.data().data();
      for (std::size_t i = 0; i < rows; ++i) {
        const double gi = g[i];
        double *row = ga + i * cols;
        for (std::size_t j = 0; j < cols; ++j)
          row[j] += gi * bv[j];
      }
    }
    if (wants(1)) {
      double *gb = slot(1).data().data();
      const double *av = a.data().data();
      for (std::size_t i = 0; i < rows; ++i) {
        const double gi = g[i];
        const double *row = av + i * cols;
        for (std::size_t j = 0; j < cols; ++j)
          gb[j] += gi * row[j];
      }
    }
    break;
  }
  case Op::VecMat: {
    const Tensor &v = in(0).value(), &a = in(1).value();
    const std::size_t rows = a.extent(0), cols = a.extent(1);
    if (wants(0)) {
      Tensor &gv = slot(0);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
          gv[i] += g[j] * a(i, j);
    }
    if (wants(1)) {
      Tensor &ga = slot(1);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
          ga(i, j) += v[i] * g[j];
    }
    break;
  }
  case Op::RowDot: {
    const Tensor &a = in(0).value(), &b = in(1).value();
    const std::size_t cols = a.extent(1);
    accumulate(0, [&](std::size_t e) { return g[e / cols] * b[e]; });
    accumulate(1, [&](std::size_t e) { return g[e / cols] * a[e]; });
    break;
  }
  case Op::TensordotAxisN: {
    const Tensor &w = in(0).value(), &h = in(1).value();
    const std::size_t n_vars = w.extent(0), rows = w.extent(1),
                      cols = w.extent(2);
    if (wants(0)) {
      Tensor &gw = slot(0);
      for (std::size_t v = 0; v < n_vars; ++v)
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j)
            gw(v, i, j) += g(v, i) * h(v, j);
    }
    if (wants(1)) {
      Tensor &gh = slot(1);
      for (std::size_t v = 0; v < n_vars; ++v)
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < cols; ++j)
            gh(v, j) += g(v, i) * w(v, i, j);
    }
    break;
  }
  case Op::TensordotSeq: {
    const Tensor &a = in(0).value(), &hs = in(1).value();
    const std::size_t n_vars = a.extent(0), steps = a.extent(1),
                      width = hs.extent(2);
    if (wants(0)) {
      Tensor &ga = slot(0);
      for (std::size_t v = 0; v < n_vars; ++v)
        for (std::size_t t = 0; t < steps; ++t)
          for (std::size_t c = 0; c < width; ++c)
            ga(v, t) += g(v, c) * hs(t, v, c);
    }
    if (wants(1)) {
      Tensor &ghs = slot(1);
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t v = 0; v < n_vars; ++v)
          for (std::size_t c = 0; c < width; ++c)
            ghs(t, v, c) += a(v, t) * g(v, c);
    }
    break;
  }
  case Op::SeqScores: {
    const Tensor &hs = in(0).value(), &w = in(1).value();
    const std::size_t steps = hs.extent(0), n_vars = hs.extent(1),
                      width = hs.extent(2);
    if (wants(0)) {
      Tensor &ghs = slot(0);
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t v = 0; v < n_vars; ++v)
          for (std::size_t c = 0; c < width; ++c)
            ghs(t, v, c) += g(v, t) * w(v, c);
    }
    if (wants(1)) {
      Tensor &gw = slot(1);
      for (std::size_t v = 0; v < n_vars; ++v)
        for (std::size_t t = 0; t < steps; ++t)
          for (std::size_t c = 0; c < width; ++c)
            gw(v, c) += g(v, t) * hs(t, v, c);
    }
    break;
  }
  case Op::VarProduct: {
    const Tensor &wx = in(0).value(), &x = in(1).value();
    const std::size_t width = wx.extent(1);
    accumulate(0, [&](std::size_t e) { return g[e] * x[e / width]; });
    if (wants(1)) {
      Tensor &gx = slot(1);
      for (std::size_t v = 0; v < wx.extent(0); ++v)
        for (std::size_t c = 0; c < width; ++c)
          gx[v] += g(v, c) * wx(v, c);
    }
    break;
  }
  case Op::SoftmaxRows: {
    if (!wants(0))
      break;
    Tensor &ge = slot(0);
    const std::size_t rows = y.extent(0), cols = y.extent(1);
    for (std::size_t r = 0; r < rows; ++r) {
      double inner = 0.0;
      for (std::size_t c = 0; c < cols; ++c)
        inner += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < cols; ++c)
        ge(r, c) += y(r, c) * (g(r, c) - inner);
    }
    break;
  }
  case Op::LogSumExp: {
    const Tensor &a = in(0).value();
    const double g0 = g[0], lse = y[0];
    accumulate(0, [&](std::size_t e) { return g0 * std::exp(a[e] - lse); });
    break;
  }
  case Op::Sum:
    accumulate(0, [&](std::size_t) { return g[0]; });
    break;
  case Op::Concat: {
    const std::size_t axis = n.attr.begin;
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i)
      outer *= y.extent(i);
    for (std::size_t i = axis + 1; i < y.rank(); ++i)
      inner *= y.extent(i);
    std::size_t pos = 0;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t p = 0; p < n.inputs.size(); ++p) {
        const std::size_t chunk = in(p).value().extent(axis) * inner;
        if (wants(p)) {
          Tensor &gp = slot(p);
          for (std::size_t e = 0; e < chunk; ++e)
            gp[o * chunk + e] += g[pos + e];
        }
        pos += chunk;
      }
    break;
  }
  case Op::Slice: {
    if (!wants(0))
      break;
    Tensor &ga = slot(0);
    const std::size_t offset = n.attr.begin * (ga.size() / ga.extent(0));
    for (std::size_t e = 0; e < g.size(); ++e)
      ga[offset + e] += g[e];
    break;
  }
  case Op::Reshape:
    accumulate(0, [&](std::size_t e) { return g[e]; });
    break;
  }
}

namespace {

Tape &tape_of(Var a) {
  if (!a.valid())
    throw ContractViolation("operation on an unbound Var");
  return *a.tape();
}

Tape &tape_of(Var a, Var b) {
  if (a.tape() != b.tape())
    throw ContractViolation("operands recorded on different tapes");
  return tape_of(a);
}

} // namespace

Var add(Var a, Var b) {
  return tape_of(a, b).record(Op::Add, {a, b}, k::add(a.value(), b.value()));
}
Var sub(Var a, Var b) {
  return tape_of(a, b).record(Op::Sub, {a, b}, k::sub(a.value(), b.value()));
}
Var mul(Var a, Var b) {
  return tape_of(a, b).record(Op::Mul, {a, b}, k::mul(a.value(), b.value()));
}
Var scale(Var a, double factor) {
  return tape_of(a).record(Op::Scale, {a}, k::scale(a.value(), factor),
                           {.scalar = factor});
}
Var add_row_bias(Var m, Var b) {
  return tape_of(m, b).record(Op::AddRowBias, {m, b},
                              k::add_row_bias(m.value(), b.value()));
}
Var add_scalar(Var a, Var s) {
  return tape_of(a, s).record(Op::AddScalar, {a, s},
                              k::add_scalar(a.value(), s.value()));
}
Var tanh(Var a) {
  return tape_of(a).record(Op::Tanh, {a}, k::tanh(a.value()));
}
Var sigmoid(Var a) {
  return tape_of(a).record(Op::Sigmoid, {a}, k::sigmoid(a.value()));
}
Var exp(Var a) { return tape_of(a).record(Op::Exp, {a}, k::exp(a.value())); }
Var log(Var a) { return tape_of(a).record(Op::Log, {a}, k::log(a.value())); }
Var square(Var a) {
  return tape_of(a).record(Op::Square, {a}, k::square(a.value()));
}
Var matvec(Var a, Var b) {
  return tape_of(a, b).record(Op::MatVec, {a, b},
                              k::matvec(a.value(), b.value()));
}
Var vecmat(Var v, Var a) {
  return tape_of(v, a).record(Op::VecMat, {v, a},
                              k::vecmat(v.value(), a.value()));
}
Var row_dot(Var a, Var b) {
  return tape_of(a, b).record(Op::RowDot, {a, b},
                              k::row_dot(a.value(), b.value()));
}
Var tensordot_axis_n(Var w, Var h) {
  return tape_of(w, h).record(Op::TensordotAxisN, {w, h},
                              k::tensordot_axis_n(w.value(), h.value()));
}
Var tensordot_seq(Var a, Var hs) {
  return tape_of(a, hs).record(Op::TensordotSeq, {a, hs},
                               k::tensordot_seq(a.value(), hs.value()));
}
Var seq_scores(Var hs, Var w) {
  return tape_of(hs, w).record(Op::SeqScores, {hs, w},
                               k::seq_scores(hs.value(), w.value()));
}
Var var_product(Var wx, Var x) {
  return tape_of(wx, x).record(Op::VarProduct, {wx, x},
                               k::var_product(wx.value(), x.value()));
}
Var softmax_rows(Var e) {
  return tape_of(e).record(Op::SoftmaxRows, {e}, k::softmax_rows(e.value()));
}
Var logsumexp(Var a) {
  return tape_of(a).record(Op::LogSumExp, {a}, k::logsumexp(a.value()));
}
Var sum(Var a) { return tape_of(a).record(Op::Sum, {a}, k::sum(a.value())); }

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty())
    throw DimensionError("concat: no operands");
  std::vector<Tensor> values;
  values.reserve(parts.size());
  Tape &tape = tape_of(parts[0]);
  for (Var p : parts) {
    tape_of(parts[0], p);
    values.push_back(p.value());
  }
  return tape.record(Op::Concat, parts, k::concat(values, axis),
                     {.begin = axis});
}

Var slice(Var a, std::size_t begin, std::size_t end) {
  return tape_of(a).record(Op::Slice, {a}, k::slice(a.value(), begin, end),
                           {.begin = begin, .end = end});
}

Var reshape(Var a, const Shape &shape) {
  return tape_of(a).record(Op::Reshape, {a}, k::reshape(a.value(), shape));
}

Var vec(Var h) {
  return tape_of(h).record(Op::Reshape, {h}, k::vec(h.value()));
}

Var matricize(Var v, std::size_t n_vars, std::size_t width) {
  return tape_of(v).record(Op::Reshape, {v},
                           k::matricize(v.value(), n_vars, width));
}

GradcheckResult gradcheck(const ScalarFn &f, std::vector<Tensor> params,
                          const GradcheckOptions &options) {
  auto evaluate = [&](bool differentiate, std::vector<Tensor> *grads) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const Tensor &p : params)
      vars.push_back(tape.parameter(p));
    Var loss = f(tape, vars);
    if (differentiate) {
      tape.backward(loss);
      for (Var v : vars)
        grads->push_back(tape.grad(v));
    }
    return loss.value().item();
  };

  std::vector<Tensor> analytic;
  evaluate(true, &analytic);
  if (!analytic.empty() && !analytic[0].empty())
    analytic[0][0] += options.corrupt;

  GradcheckResult worst;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t e = 0; e < params[p].size(); ++e) {
      const double saved = params[p][e];
      params[p][e] = saved + options.step;
      const double up = evaluate(false, nullptr);
      params[p][e] = saved - options.step;
      const double down = evaluate(false, nullptr);
      params[p][e] = saved;

      const double numeric = (up - down) / (2.0 * options.step);
      const double exact = analytic[p][e];
      const double rel = std::abs(exact - numeric) /
                         std::max(1e-8, std::abs(exact) + std::abs(numeric));
      if (rel > worst.max_rel_error || (p == 0 && e == 0)) {
        worst = {rel, p, e, exact, numeric};
      }
    }
  }
  return worst;
}

} // namespace mvlstm::ad
