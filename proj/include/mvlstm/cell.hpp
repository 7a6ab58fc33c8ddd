// SPDX-License-Identifier: Apache-2.0
/**
 * @file   cell.hpp
 * @brief  One MV-LSTM recurrent step and the full-sequence unroll.
 *
 * The hidden state is an [N,d] matrix with one d-row per input variable. The
 * cell update J_t is computed row by row from that variable's own hidden row
 * and input, while the three gates see every variable:
 *
 *   J_t = tanh(Wh (x)_N H_{t-1} + Wx * x_t + b_j)
 *   [i f o] = sigmoid(W [x_t ; vec(H_{t-1})] + b)
 *   c_t = f . c_{t-1} + i . vec(J_t)
 *   H_t = matricize(o . tanh(c_t))
 *
 * vec() is row-major, so memory-cell slice [n*d, (n+1)*d) belongs to
 * variable n.
 */

#ifndef MVLSTM_CELL_HPP
#define MVLSTM_CELL_HPP

#include <mvlstm/autodiff.hpp>
#include <mvlstm/params.hpp>
#include <mvlstm/tensor.hpp>

#include <random>
#include <string_view>

namespace mvlstm {

struct CellParams {
  Tensor wh;    ///< [N,d,d] hidden-to-hidden, one d x d block per variable
  Tensor wx;    ///< [N,d]   input-to-hidden
  Tensor bj;    ///< [N,d]   cell-update bias
  Tensor wgate; ///< [3D, N+D] gate weights, rows ordered input|forget|output
  Tensor bgate; ///< [3D]

  std::size_t n_vars() const { return wx.extent(0); }
  std::size_t width() const { return wx.extent(1); }
  void validate() const;

  static CellParams zeros(std::size_t n_vars, std::size_t width);
  /// Glorot-uniform weights, zero biases, forget-gate bias 1.
  static CellParams initialize(std::size_t n_vars, std::size_t width,
                               std::mt19937_64 &rng);

  /// Adds the five tensors as `<prefix>.Wh`, `.Wx`, `.bj`, `.W`, `.b`.
  void export_to(ParamSet &set, std::string_view prefix) const;
  static CellParams import_from(const ParamSet &set, std::string_view prefix);
};

struct CellState {
  Tensor h; ///< [N,d]
  Tensor c; ///< [D]

  static CellState zeros(std::size_t n_vars, std::size_t width);
};

struct Gates {
  Tensor input, forget, output; ///< each [D]
};

struct UnrollOutput {
  Tensor history; ///< [T,N,d]; history[t] is the state after x_{t+1}
  CellState final;
};

Tensor cell_update_matrix(const CellParams &params, const Tensor &h_prev,
                          const Tensor &x);
Gates gates(const CellParams &params, const Tensor &h_prev, const Tensor &x);
CellState step(const CellParams &params, const CellState &state,
               const Tensor &x);
/// Runs the cell over xs [T,N] from a zero state. Requires T >= 2.
UnrollOutput unroll(const CellParams &params, const Tensor &xs);

namespace graph {

struct CellVars {
  ad::Var wh, wx, bj, wgate, bgate;

  static CellVars bind(ad::Tape &tape, const CellParams &params);
  static CellVars from(const BoundParams &bound, std::string_view prefix);
};

struct StateVars {
  ad::Var h, c;
};

struct GateVars {
  ad::Var input, forget, output;
};

struct UnrollVars {
  ad::Var history;
  StateVars final;
};

ad::Var cell_update_matrix(const CellVars &cell, ad::Var h_prev, ad::Var x);
GateVars gates(const CellVars &cell, ad::Var h_prev, ad::Var x);
StateVars step(const CellVars &cell, const StateVars &state, ad::Var x);
UnrollVars unroll(const CellVars &cell, ad::Var xs);

} // namespace graph
} // namespace mvlstm

#endif // MVLSTM_CELL_HPP
