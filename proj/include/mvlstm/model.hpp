// SPDX-License-Identifier: Apache-2.0
/**
 * @file   model.hpp
 * @brief  The MV-LSTM model and its ablation variants behind one interface.
 *
 *  - MvLstm:   MV-LSTM cell + mixture attention head, mixture NLL.
 *  - MvFusion: same cell and temporal attention, but the variable attention
 *              fuses H~ rows into one state feeding a single linear output;
 *              squared-error loss.
 *  - MvIndep:  one independent single-variable MV-LSTM cell per variable,
 *              histories stacked and fed to the mixture head.
 *  - Vanilla:  a plain LSTM with N*d units and a linear output on the final
 *              hidden state; squared-error loss.
 */

#ifndef MVLSTM_MODEL_HPP
#define MVLSTM_MODEL_HPP

#include <mvlstm/autodiff.hpp>
#include <mvlstm/cell.hpp>
#include <mvlstm/head.hpp>
#include <mvlstm/params.hpp>

#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace mvlstm {

enum class Variant { MvLstm, MvFusion, MvIndep, Vanilla };

std::string_view variant_name(Variant v);
/// Accepts "mvlstm", "mvfusion", "mvindep", "vanilla" (any case).
Variant parse_variant(std::string_view name);
/// True for variants trained with the mixture likelihood.
bool has_mixture(Variant v);

struct ModelShape {
  std::size_t n_vars = 0;
  std::size_t width = 0; ///< hidden units per variable (d)
};

class Model {
public:
  /// Validates that `params` holds exactly the tensors the variant needs.
  Model(Variant variant, ModelShape shape, ParamSet params);

  static Model initialize(Variant variant, ModelShape shape,
                          std::mt19937_64 &rng);

  Variant variant() const { return variant_; }
  ModelShape shape() const { return shape_; }
  const ParamSet &params() const { return params_; }
  ParamSet &params() { return params_; }

  /// Shape of the dropout mask applied at the output stage.
  Shape dropout_shape() const;

private:
  Variant variant_;
  ModelShape shape_;
  ParamSet params_;
};

/// Expected parameter names and shapes for a variant, in storage order.
std::vector<std::pair<std::string, Shape>> parameter_layout(Variant variant,
                                                            ModelShape shape);

/// Weight tensors (leaf name starting with W or w) take the L2 penalty.
bool is_weight(std::string_view name);

/// Plain LSTM parameters; gate rows ordered input|forget|output|candidate.
struct VanillaParams {
  Tensor w;     ///< [4D, N+D]
  Tensor b;     ///< [4D]
  Tensor w_out; ///< [D]
  Tensor b_out; ///< [1]

  std::size_t hidden() const { return w_out.extent(0); }
};

struct PointForecast {
  double yhat = 0.0;
  double loss = 0.0; ///< (y - yhat)^2
};

/// MV-Fusion head on a [T,N,d] history. Only the attention parts of
/// `attention` (Ws, bs, Wv, bv) are used.
PointForecast mvfusion_forward(const HeadParams &attention,
                               const Tensor &w_out, const Tensor &b_out,
                               const Tensor &history, double y_next);
/// Stacked histories of N independent single-variable cells.
Tensor mvindep_history(std::span<const CellParams> cells, const Tensor &xs);
MixtureOutput mvindep_forward(std::span<const CellParams> cells,
                              const HeadParams &head, const Tensor &xs,
                              double y_next);
PointForecast vanilla_forward(const VanillaParams &params, const Tensor &xs,
                              double y_next);

struct SequenceGraph {
  ad::Var loss; ///< [1]
  ad::Var yhat; ///< [1]
  std::optional<graph::MixtureVars> mixture;
};

/// Records one sequence's forward pass. `keep_mask`, when given, multiplies
/// the output-stage features (already scaled by 1/(1-rate)).
SequenceGraph forward(ad::Tape &tape, const Model &model,
                      std::span<const ad::Var> params, const Tensor &xs,
                      double y_next, const Tensor *keep_mask = nullptr);

struct SequenceResult {
  double yhat = 0.0;
  double loss = 0.0;
  std::optional<MixtureOutput> mixture;
};

/// Inference pass without dropout.
SequenceResult evaluate_sequence(const Model &model, const Tensor &xs,
                                 double y_next);

/// Finite-difference check of the full per-sequence loss of a freshly
/// initialized model on one random [T,N] sequence, dropout off.
ad::GradcheckResult gradcheck_model(Variant variant, ModelShape shape,
                                    std::size_t steps, std::uint64_t seed,
                                    const ad::GradcheckOptions &options = {});

} // namespace mvlstm

#endif // MVLSTM_MODEL_HPP
