// SPDX-License-Identifier: Apache-2.0

#include <mvlstm/error.hpp>
#include <mvlstm/head.hpp>

#include <cmath>
#include <numbers>
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

void require_variance(double sigma2) {
  if (!(sigma2 > 0.0))
    throw ContractViolation("Gaussian variance must be positive, got " +
                            std::to_string(sigma2));
}

} // namespace

void HeadParams::validate() const {
  if (ws.rank() != 2)
    throw DimensionError("head Ws must be [N,d], got " + ws.shape().str());
  const std::size_t n = n_vars(), d = width();
  expect_shape("head bs", bs, {n});
  expect_shape("head Wv", wv, {2 * d});
  expect_shape("head bv", bv, {1});
  expect_shape("head Wo", wo, {n, 2 * d});
  expect_shape("head bo", bo, {n});
  require_variance(sigma2);
}

HeadParams HeadParams::zeros(std::size_t n_vars, std::size_t width) {
  return {Tensor({n_vars, width}), Tensor({n_vars}), Tensor({2 * width}),
          Tensor({1}),            Tensor({n_vars, 2 * width}),
          Tensor({n_vars}),       1.0};
}

HeadParams HeadParams::initialize(std::size_t n_vars, std::size_t width,
                                  std::mt19937_64 &rng) {
  HeadParams p = zeros(n_vars, width);
  p.ws = glorot_uniform({n_vars, width}, width, 1, rng);
  p.wv = glorot_uniform({2 * width}, 2 * width, 1, rng);
  p.wo = glorot_uniform({n_vars, 2 * width}, 2 * width, 1, rng);
  return p;
}

void HeadParams::export_to(ParamSet &set, std::string_view prefix) const {
  set.add(join(prefix, "Ws"), ws, true);
  set.add(join(prefix, "bs"), bs, false);
  set.add(join(prefix, "Wv"), wv, true);
  set.add(join(prefix, "bv"), bv, false);
  set.add(join(prefix, "Wo"), wo, true);
  set.add(join(prefix, "bo"), bo, false);
}

HeadParams HeadParams::import_from(const ParamSet &set,
                                   std::string_view prefix) {
  HeadParams p{set.get(join(prefix, "Ws")), set.get(join(prefix, "bs")),
               set.get(join(prefix, "Wv")), set.get(join(prefix, "bv")),
               set.get(join(prefix, "Wo")), set.get(join(prefix, "bo")),
               1.0};
  p.validate();
  return p;
}

namespace graph {

HeadVars HeadVars::bind(ad::Tape &tape, const HeadParams &params) {
  params.validate();
  return {tape.parameter(params.ws), tape.parameter(params.bs),
          tape.parameter(params.wv), tape.parameter(params.bv),
          tape.parameter(params.wo), tape.parameter(params.bo),
          params.sigma2};
}

HeadVars HeadVars::from(const BoundParams &bound, std::string_view prefix,
                        bool with_output) {
  HeadVars h;
  h.ws = bound[join(prefix, "Ws")];
  h.bs = bound[join(prefix, "bs")];
  h.wv = bound[join(prefix, "Wv")];
  h.bv = bound[join(prefix, "bv")];
  if (with_output) {
    h.wo = bound[join(prefix, "Wo")];
    h.bo = bound[join(prefix, "bo")];
  }
  return h;
}

ad::Var temporal_attention(const HeadVars &head, ad::Var history) {
  const Shape &shape = history.shape();
  if (shape.rank() != 3)
    throw DimensionError("temporal attention: history must be [T,N,d], got " +
                         shape.str());
  const std::size_t steps = shape[0], n_vars = shape[1], width = shape[2];
  if (steps < 2)
    throw ContractViolation("temporal attention: need T >= 2, got " +
                            std::to_string(steps));
  ad::Var past = ad::slice(history, 0, steps - 1);
  ad::Var last = ad::reshape(ad::slice(history, steps - 1, steps),
                             {n_vars, width});
  ad::Var scores =
    ad::tanh(ad::add_row_bias(ad::seq_scores(past, head.ws), head.bs));
  ad::Var weights = ad::softmax_rows(scores);
  ad::Var context = ad::tensordot_seq(weights, past);
  const ad::Var halves[] = {last, context};
  return ad::concat(halves, 1);
}

ad::Var component_means(const HeadVars &head, ad::Var htilde) {
  return ad::add(ad::row_dot(head.wo, htilde), head.bo);
}

ad::Var log_prior_attention(const HeadVars &head, ad::Var htilde) {
  ad::Var scores = ad::tanh(ad::add_scalar(ad::matvec(htilde, head.wv),
                                           head.bv));
  return ad::add_scalar(scores, ad::scale(ad::logsumexp(scores), -1.0));
}

ad::Var log_gaussian(ad::Var mu, double y, double sigma2) {
  require_variance(sigma2);
  ad::Tape &tape = *mu.tape();
  ad::Var target = tape.constant(Tensor(mu.shape(), y));
  ad::Var quad = ad::scale(ad::square(ad::sub(target, mu)),
                           -0.5 / sigma2);
  const double norm = -0.5 * std::log(2.0 * std::numbers::pi * sigma2);
  return ad::add_scalar(quad, tape.constant(Tensor::scalar(norm)));
}

MixtureVars mixture(const HeadVars &head, ad::Var htilde, double y_next) {
  MixtureVars m;
  m.htilde = htilde;
  m.mu = component_means(head, htilde);
  m.log_prior = log_prior_attention(head, htilde);
  m.prior = ad::exp(m.log_prior);
  m.log_density = log_gaussian(m.mu, y_next, head.sigma2);
  ad::Var joint = ad::add(m.log_prior, m.log_density);
  m.loglik = ad::logsumexp(joint);
  m.yhat = ad::sum(ad::mul(m.prior, m.mu));
  m.posterior = kernels::exp(
    kernels::add_scalar(joint.value(), Tensor::scalar(-m.loglik.value()[0])));
  return m;
}

} // namespace graph

Tensor temporal_attention(const HeadParams &params, const Tensor &history) {
  ad::Tape tape;
  auto head = graph::HeadVars::bind(tape, params);
  return graph::temporal_attention(head, tape.constant(history)).value();
}

Tensor component_means(const HeadParams &params, const Tensor &htilde) {
  ad::Tape tape;
  auto head = graph::HeadVars::bind(tape, params);
  return graph::component_means(head, tape.constant(htilde)).value();
}

Tensor prior_attention(const HeadParams &params, const Tensor &htilde) {
  ad::Tape tape;
  auto head = graph::HeadVars::bind(tape, params);
  return kernels::exp(
    graph::log_prior_attention(head, tape.constant(htilde)).value());
}

double log_gaussian(double y, double mu, double sigma2) {
  require_variance(sigma2);
  const double r = y - mu;
  return -0.5 * std::log(2.0 * std::numbers::pi * sigma2) -
         r * r / (2.0 * sigma2);
}

MixtureOutput mixture_forward(const HeadParams &params, const Tensor &history,
                              double y_next) {
  ad::Tape tape;
  auto head = graph::HeadVars::bind(tape, params);
  ad::Var htilde = graph::temporal_attention(head, tape.constant(history));
  auto m = graph::mixture(head, htilde, y_next);
  return {m.mu.value(),    m.prior.value(), m.loglik.value()[0],
          m.posterior,     m.yhat.value()[0], htilde.value()};
}

double predict(const HeadParams &params, const Tensor &history) {
  ad::Tape tape;
  auto head = graph::HeadVars::bind(tape, params);
  ad::Var htilde = graph::temporal_attention(head, tape.constant(history));
  ad::Var mu = graph::component_means(head, htilde);
  ad::Var prior = ad::exp(graph::log_prior_attention(head, htilde));
  return ad::sum(ad::mul(prior, mu)).value()[0];
}

double weighted_prediction(const Tensor &prior, const Tensor &mu) {
  return kernels::sum(kernels::mul(prior, mu))[0];
}

Tensor posterior_attention(const Tensor &prior, const Tensor &log_density) {
  Tensor joint = kernels::add(kernels::log(prior), log_density);
  Tensor lse = kernels::logsumexp(joint);
  return kernels::exp(kernels::add_scalar(joint, kernels::scale(lse, -1.0)));
}

} // namespace mvlstm
