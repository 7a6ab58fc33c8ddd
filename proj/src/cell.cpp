// SPDX-License-Identifier: Apache-2.0

#include <mvlstm/cell.hpp>
#include <mvlstm/error.hpp>

#include <string>

namespace mvlstm {

namespace {

std::string join(std::string_view prefix, const char *leaf) {
  return std::string(prefix) + "." + leaf;
}

void expect_shape(const char *what, const Tensor &t, const Shape &shape) {
  if (!(t.shape() == shape))
    throw DimensionError(std::string(what) + ": expected shape " +
                         shape.str() + ", got " + t.shape().str());
}

} // namespace

void CellParams::validate() const {
  if (wx.rank() != 2)
    throw DimensionError("cell Wx must be [N,d], got " + wx.shape().str());
  const std::size_t n = n_vars(), d = width(), total = n * d;
  expect_shape("cell Wh", wh, {n, d, d});
  expect_shape("cell bj", bj, {n, d});
  expect_shape("cell W", wgate, {3 * total, n + total});
  expect_shape("cell b", bgate, {3 * total});
}

CellParams CellParams::zeros(std::size_t n_vars, std::size_t width) {
  const std::size_t total = n_vars * width;
  return {Tensor({n_vars, width, width}), Tensor({n_vars, width}),
          Tensor({n_vars, width}), Tensor({3 * total, n_vars + total}),
          Tensor({3 * total})};
}

CellParams CellParams::initialize(std::size_t n_vars, std::size_t width,
                                  std::mt19937_64 &rng) {
  const std::size_t total = n_vars * width;
  CellParams p;
  // Fans are per 2-D slice: each W_h^n is d x d, each W_x^n maps 1 -> d.
  p.wh = glorot_uniform({n_vars, width, width}, width, width, rng);
  p.wx = glorot_uniform({n_vars, width}, 1, width, rng);
  p.bj = Tensor({n_vars, width});
  p.wgate = glorot_uniform({3 * total, n_vars + total}, n_vars + total,
                           3 * total, rng);
  p.bgate = Tensor({3 * total});
  for (std::size_t i = total; i < 2 * total; ++i)
    p.bgate[i] = 1.0;
  return p;
}

void CellParams::export_to(ParamSet &set, std::string_view prefix) const {
  set.add(join(prefix, "Wh"), wh, true);
  set.add(join(prefix, "Wx"), wx, true);
  set.add(join(prefix, "bj"), bj, false);
  set.add(join(prefix, "W"), wgate, true);
  set.add(join(prefix, "b"), bgate, false);
}

CellParams CellParams::import_from(const ParamSet &set,
                                   std::string_view prefix) {
  CellParams p{set.get(join(prefix, "Wh")), set.get(join(prefix, "Wx")),
               set.get(join(prefix, "bj")), set.get(join(prefix, "W")),
               set.get(join(prefix, "b"))};
  p.validate();
  return p;
}

CellState CellState::zeros(std::size_t n_vars, std::size_t width) {
  return {Tensor({n_vars, width}), Tensor({n_vars * width})};
}

namespace graph {

CellVars CellVars::bind(ad::Tape &tape, const CellParams &params) {
  params.validate();
  return {tape.parameter(params.wh), tape.parameter(params.wx),
          tape.parameter(params.bj), tape.parameter(params.wgate),
          tape.parameter(params.bgate)};
}

CellVars CellVars::from(const BoundParams &bound, std::string_view prefix) {
  return {bound[join(prefix, "Wh")], bound[join(prefix, "Wx")],
          bound[join(prefix, "bj")], bound[join(prefix, "W")],
          bound[join(prefix, "b")]};
}

ad::Var cell_update_matrix(const CellVars &cell, ad::Var h_prev, ad::Var x) {
  ad::Var recurrent = ad::tensordot_axis_n(cell.wh, h_prev);
  ad::Var input = ad::var_product(cell.wx, x);
  return ad::tanh(ad::add(ad::add(recurrent, input), cell.bj));
}

GateVars gates(const CellVars &cell, ad::Var h_prev, ad::Var x) {
  const std::size_t total = h_prev.value().size();
  const ad::Var joined[] = {x, ad::vec(h_prev)};
  ad::Var pre = ad::add(ad::matvec(cell.wgate, ad::concat(joined, 0)),
                        cell.bgate);
  ad::Var all = ad::sigmoid(pre);
  return {ad::slice(all, 0, total), ad::slice(all, total, 2 * total),
          ad::slice(all, 2 * total, 3 * total)};
}

StateVars step(const CellVars &cell, const StateVars &state, ad::Var x) {
  const Shape &hs = state.h.shape();
  if (hs.rank() != 2 || !(hs == cell.wx.shape()))
    throw DimensionError("cell step: state shape " + hs.str() +
                         " does not match Wx " + cell.wx.shape().str());
  if (x.shape().rank() != 1 || x.shape()[0] != hs[0])
    throw DimensionError("cell step: input shape " + x.shape().str() +
                         " does not match " + std::to_string(hs[0]) +
                         " variables");
  ad::Var j = cell_update_matrix(cell, state.h, x);
  GateVars g = gates(cell, state.h, x);
  ad::Var c = ad::add(ad::mul(g.forget, state.c), ad::mul(g.input, ad::vec(j)));
  ad::Var h = ad::matricize(ad::mul(g.output, ad::tanh(c)), hs[0], hs[1]);
  return {h, c};
}

UnrollVars unroll(const CellVars &cell, ad::Var xs) {
  const Shape &shape = xs.shape();
  if (shape.rank() != 2)
    throw DimensionError("unroll: inputs must be [T,N], got " + shape.str());
  const std::size_t steps = shape[0], n_vars = shape[1];
  if (steps < 2)
    throw ContractViolation("unroll: need T >= 2 time steps, got " +
                            std::to_string(steps));
  const std::size_t width = cell.wx.shape()[1];
  ad::Tape &tape = *xs.tape();
  StateVars state{tape.constant(Tensor({n_vars, width})),
                  tape.constant(Tensor({n_vars * width}))};
  std::vector<ad::Var> frames;
  frames.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    ad::Var x = ad::reshape(ad::slice(xs, t, t + 1), {n_vars});
    state = step(cell, state, x);
    frames.push_back(ad::reshape(state.h, {1, n_vars, width}));
  }
  return {ad::concat(frames, 0), state};
}

} // namespace graph

Tensor cell_update_matrix(const CellParams &params, const Tensor &h_prev,
                          const Tensor &x) {
  ad::Tape tape;
  auto cell = graph::CellVars::bind(tape, params);
  return graph::cell_update_matrix(cell, tape.constant(h_prev),
                                   tape.constant(x))
    .value();
}

Gates gates(const CellParams &params, const Tensor &h_prev, const Tensor &x) {
  ad::Tape tape;
  auto cell = graph::CellVars::bind(tape, params);
  auto g = graph::gates(cell, tape.constant(h_prev), tape.constant(x));
  return {g.input.value(), g.forget.value(), g.output.value()};
}

CellState step(const CellParams &params, const CellState &state,
               const Tensor &x) {
  ad::Tape tape;
  auto cell = graph::CellVars::bind(tape, params);
  auto next = graph::step(
    cell, {tape.constant(state.h), tape.constant(state.c)}, tape.constant(x));
  return {next.h.value(), next.c.value()};
}

UnrollOutput unroll(const CellParams &params, const Tensor &xs) {
  ad::Tape tape;
  auto cell = graph::CellVars::bind(tape, params);
  auto out = graph::unroll(cell, tape.constant(xs));
  return {out.history.value(), {out.final.h.value(), out.final.c.value()}};
}

} // namespace mvlstm
