// SPDX-License-Identifier: Apache-2.0
/**
 * @file   head.hpp
 * @brief  Mixture temporal-and-variable attention over an MV-LSTM history.
 *
 * Temporal attention summarizes each variable's first T-1 hidden rows into a
 * context vector and appends it to the final hidden row, giving H~ [N,2d].
 * Each row of H~ then parameterizes one Gaussian component N(mu_n, sigma2)
 * and one logit of the variable-level prior. The target density is the
 * prior-weighted mixture of the components.
 */

#ifndef MVLSTM_HEAD_HPP
#define MVLSTM_HEAD_HPP

#include <mvlstm/autodiff.hpp>
#include <mvlstm/params.hpp>
#include <mvlstm/tensor.hpp>

#include <random>
#include <string_view>

namespace mvlstm {

struct HeadParams {
  Tensor ws; ///< [N,d]  temporal attention weights
  Tensor bs; ///< [N]
  Tensor wv; ///< [2d]   variable attention weights
  Tensor bv; ///< [1]
  Tensor wo; ///< [N,2d] per-variable output weights
  Tensor bo; ///< [N]
  double sigma2 = 1.0;

  std::size_t n_vars() const { return ws.extent(0); }
  std::size_t width() const { return ws.extent(1); }
  void validate() const;

  static HeadParams zeros(std::size_t n_vars, std::size_t width);
  static HeadParams initialize(std::size_t n_vars, std::size_t width,
                               std::mt19937_64 &rng);

  void export_to(ParamSet &set, std::string_view prefix) const;
  static HeadParams import_from(const ParamSet &set, std::string_view prefix);
};

struct MixtureOutput {
  Tensor mu;        ///< [N] component means
  Tensor prior;     ///< [N] p(z=n | X)
  double loglik = 0.0;
  Tensor posterior; ///< [N] p(z=n | X, y)
  double yhat = 0.0;
  Tensor htilde;    ///< [N,2d]
};

/// H~ from a [T,N,d] history; T >= 2.
Tensor temporal_attention(const HeadParams &params, const Tensor &history);
Tensor component_means(const HeadParams &params, const Tensor &htilde);
Tensor prior_attention(const HeadParams &params, const Tensor &htilde);
double log_gaussian(double y, double mu, double sigma2);
MixtureOutput mixture_forward(const HeadParams &params, const Tensor &history,
                              double y_next);
double predict(const HeadParams &params, const Tensor &history);
/// sum_n prior[n] * mu[n]
double weighted_prediction(const Tensor &prior, const Tensor &mu);
/// Normalized posterior from a prior and per-component log densities.
Tensor posterior_attention(const Tensor &prior, const Tensor &log_density);

namespace graph {

struct HeadVars {
  ad::Var ws, bs, wv, bv, wo, bo;
  double sigma2 = 1.0;

  static HeadVars bind(ad::Tape &tape, const HeadParams &params);
  /// Binds the attention parameters; `with_output` also binds Wo and bo.
  static HeadVars from(const BoundParams &bound, std::string_view prefix,
                       bool with_output = true);
};

struct MixtureVars {
  ad::Var htilde;
  ad::Var mu;
  ad::Var log_prior;
  ad::Var prior;
  ad::Var log_density; ///< [N] log N(y | mu_n, sigma2)
  ad::Var loglik;      ///< [1]
  ad::Var yhat;        ///< [1]
  Tensor posterior;    ///< [N], not differentiated
};

ad::Var temporal_attention(const HeadVars &head, ad::Var history);
ad::Var component_means(const HeadVars &head, ad::Var htilde);
/// log p(z=n | X) = tanh-score minus its log-sum-exp.
ad::Var log_prior_attention(const HeadVars &head, ad::Var htilde);
ad::Var log_gaussian(ad::Var mu, double y, double sigma2);
/// Mixture quantities from an (optionally dropped-out) H~.
MixtureVars mixture(const HeadVars &head, ad::Var htilde, double y_next);

} // namespace graph
} // namespace mvlstm

#endif // MVLSTM_HEAD_HPP
