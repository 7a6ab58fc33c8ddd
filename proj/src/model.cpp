// SPDX-License-Identifier: Apache-2.0

#include <mvlstm/error.hpp>
#include <mvlstm/model.hpp>

#include <algorithm>
#include <cctype>
#include <string>

namespace mvlstm {

std::string_view variant_name(Variant v) {
  switch (v) {
  case Variant::MvLstm: return "mvlstm";
  case Variant::MvFusion: return "mvfusion";
  case Variant::MvIndep: return "mvindep";
  case Variant::Vanilla: return "vanilla";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (Variant v : {Variant::MvLstm, Variant::MvFusion, Variant::MvIndep,
                    Variant::Vanilla})
    if (variant_name(v) == lower)
      return v;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected mvlstm, mvfusion, mvindep or vanilla)");
}

bool has_mixture(Variant v) {
  return v == Variant::MvLstm || v == Variant::MvIndep;
}

namespace {

std::string cell_prefix(std::size_t n) { return "cell" + std::to_string(n); }

} // namespace

bool is_weight(std::string_view name) {
  const auto dot = name.rfind('.');
  const char lead = name[dot == std::string_view::npos ? 0 : dot + 1];
  return lead == 'W' || lead == 'w';
}

std::vector<std::pair<std::string, Shape>> parameter_layout(Variant variant,
                                                            ModelShape shape) {
  const std::size_t n = shape.n_vars, d = shape.width, total = n * d;
  if (n == 0 || d == 0)
    throw ContractViolation("model needs at least one variable and one unit");
  std::vector<std::pair<std::string, Shape>> layout;
  auto cell = [&](const std::string &prefix, std::size_t vars) {
    const std::size_t units = vars * d;
    layout.emplace_back(prefix + ".Wh", Shape{vars, d, d});
    layout.emplace_back(prefix + ".Wx", Shape{vars, d});
    layout.emplace_back(prefix + ".bj", Shape{vars, d});
    layout.emplace_back(prefix + ".W", Shape{3 * units, vars + units});
    layout.emplace_back(prefix + ".b", Shape{3 * units});
  };
  auto attention = [&] {
    layout.emplace_back("head.Ws", Shape{n, d});
    layout.emplace_back("head.bs", Shape{n});
    layout.emplace_back("head.Wv", Shape{2 * d});
    layout.emplace_back("head.bv", Shape{1});
  };
  auto outputs = [&] {
    layout.emplace_back("head.Wo", Shape{n, 2 * d});
    layout.emplace_back("head.bo", Shape{n});
  };

  switch (variant) {
  case Variant::MvLstm:
    cell("cell", n);
    attention();
    outputs();
    break;
  case Variant::MvFusion:
    cell("cell", n);
    attention();
    layout.emplace_back("fusion.w", Shape{2 * d});
    layout.emplace_back("fusion.b", Shape{1});
    break;
  case Variant::MvIndep:
    for (std::size_t v = 0; v < n; ++v)
      cell(cell_prefix(v), 1);
    attention();
    outputs();
    break;
  case Variant::Vanilla:
    layout.emplace_back("lstm.W", Shape{4 * total, n + total});
    layout.emplace_back("lstm.b", Shape{4 * total});
    layout.emplace_back("out.w", Shape{total});
    layout.emplace_back("out.b", Shape{1});
    break;
  }
  return layout;
}

Model::Model(Variant variant, ModelShape shape, ParamSet params)
  : variant_(variant), shape_(shape), params_(std::move(params)) {
  const auto layout = parameter_layout(variant, shape);
  if (layout.size() != params_.size())
    throw DimensionError(
      std::string(variant_name(variant)) + " model with N=" +
      std::to_string(shape.n_vars) + ", d=" + std::to_string(shape.width) +
      " needs " + std::to_string(layout.size()) + " tensors, got " +
      std::to_string(params_.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const NamedTensor &p = params_[i];
    if (p.name != layout[i].first)
      throw DimensionError("expected parameter '" + layout[i].first +
                           "' at position " + std::to_string(i) + ", got '" +
                           p.name + "'");
    if (!(p.value.shape() == layout[i].second))
      throw DimensionError("parameter '" + p.name + "' has shape " +
                           p.value.shape().str() + ", expected " +
                           layout[i].second.str() + " for N=" +
                           std::to_string(shape.n_vars) +
                           ", d=" + std::to_string(shape.width));
  }
}

Model Model::initialize(Variant variant, ModelShape shape,
                        std::mt19937_64 &rng) {
  const std::size_t n = shape.n_vars, d = shape.width;
  ParamSet set;
  switch (variant) {
  case Variant::MvLstm:
    CellParams::initialize(n, d, rng).export_to(set, "cell");
    HeadParams::initialize(n, d, rng).export_to(set, "head");
    break;
  case Variant::MvFusion: {
    CellParams::initialize(n, d, rng).export_to(set, "cell");
    HeadParams head = HeadParams::initialize(n, d, rng);
    set.add("head.Ws", head.ws, true);
    set.add("head.bs", head.bs, false);
    set.add("head.Wv", head.wv, true);
    set.add("head.bv", head.bv, false);
    set.add("fusion.w", glorot_uniform({2 * d}, 2 * d, 1, rng), true);
    set.add("fusion.b", Tensor({1}), false);
    break;
  }
  case Variant::MvIndep:
    for (std::size_t v = 0; v < n; ++v)
      CellParams::initialize(1, d, rng).export_to(set, cell_prefix(v));
    HeadParams::initialize(n, d, rng).export_to(set, "head");
    break;
  case Variant::Vanilla: {
    const std::size_t total = n * d;
    set.add("lstm.W",
            glorot_uniform({4 * total, n + total}, n + total, 4 * total, rng),
            true);
    Tensor bias({4 * total});
    for (std::size_t i = total; i < 2 * total; ++i)
      bias[i] = 1.0;
    set.add("lstm.b", bias, false);
    set.add("out.w", glorot_uniform({total}, total, 1, rng), true);
    set.add("out.b", Tensor({1}), false);
    break;
  }
  }
  for (std::size_t i = 0; i < set.size(); ++i)
    set[i].decay = is_weight(set[i].name);
  return Model(variant, shape, std::move(set));
}

Shape Model::dropout_shape() const {
  if (variant_ == Variant::Vanilla)
    return {shape_.n_vars * shape_.width};
  return {shape_.n_vars, 2 * shape_.width};
}

namespace {

ad::Var maybe_drop(ad::Var features, const Tensor *keep_mask) {
  if (!keep_mask)
    return features;
  return ad::mul(features, features.tape()->constant(*keep_mask));
}

ad::Var squared_error(ad::Var yhat, double y) {
  return ad::square(ad::sub(yhat, yhat.tape()->constant(Tensor::scalar(y))));
}

ad::Var linear_output(ad::Var w, ad::Var b, ad::Var features) {
  return ad::add(ad::sum(ad::mul(w, features)), b);
}

ad::Var fused_state(const graph::HeadVars &head, ad::Var htilde) {
  ad::Var prior = ad::exp(graph::log_prior_attention(head, htilde));
  return ad::vecmat(prior, htilde);
}

ad::Var indep_history(ad::Tape &tape,
                      std::span<const graph::CellVars> cells,
                      const Tensor &xs) {
  if (xs.rank() != 2 || xs.extent(1) != cells.size())
    throw DimensionError("independent cells: inputs " + xs.shape().str() +
                         " do not match " + std::to_string(cells.size()) +
                         " cells");
  const std::size_t steps = xs.extent(0), n_vars = xs.extent(1);
  std::vector<ad::Var> histories;
  histories.reserve(n_vars);
  for (std::size_t v = 0; v < n_vars; ++v) {
    Tensor column({steps, 1});
    for (std::size_t t = 0; t < steps; ++t)
      column[t] = xs(t, v);
    histories.push_back(
      graph::unroll(cells[v], tape.constant(std::move(column))).history);
  }
  return ad::concat(histories, 1);
}

ad::Var vanilla_output(ad::Tape &tape, ad::Var w, ad::Var b, ad::Var w_out,
                       ad::Var b_out, const Tensor &xs,
                       const Tensor *keep_mask) {
  if (xs.rank() != 2)
    throw DimensionError("vanilla LSTM: inputs must be [T,N], got " +
                         xs.shape().str());
  const std::size_t steps = xs.extent(0), n_vars = xs.extent(1);
  const std::size_t hidden = w_out.shape()[0];
  if (!(w.shape() == Shape{4 * hidden, n_vars + hidden}))
    throw DimensionError("vanilla LSTM: weights " + w.shape().str() +
                         " do not match inputs " + xs.shape().str());
  ad::Var inputs = tape.constant(xs);
  ad::Var h = tape.constant(Tensor({hidden}));
  ad::Var c = tape.constant(Tensor({hidden}));
  for (std::size_t t = 0; t < steps; ++t) {
    const ad::Var joined[] = {ad::reshape(ad::slice(inputs, t, t + 1),
                                          {n_vars}),
                              h};
    ad::Var z = ad::add(ad::matvec(w, ad::concat(joined, 0)), b);
    ad::Var i = ad::sigmoid(ad::slice(z, 0, hidden));
    ad::Var f = ad::sigmoid(ad::slice(z, hidden, 2 * hidden));
    ad::Var o = ad::sigmoid(ad::slice(z, 2 * hidden, 3 * hidden));
    ad::Var g = ad::tanh(ad::slice(z, 3 * hidden, 4 * hidden));
    c = ad::add(ad::mul(f, c), ad::mul(i, g));
    h = ad::mul(o, ad::tanh(c));
  }
  return linear_output(w_out, b_out, maybe_drop(h, keep_mask));
}

} // namespace

SequenceGraph forward(ad::Tape &tape, const Model &model,
                      std::span<const ad::Var> params, const Tensor &xs,
                      double y_next, const Tensor *keep_mask) {
  const ModelShape shape = model.shape();
  if (xs.rank() != 2 || xs.extent(1) != shape.n_vars)
    throw DimensionError("sequence shape " + xs.shape().str() +
                         " does not match a model with N=" +
                         std::to_string(shape.n_vars));
  if (keep_mask && !(keep_mask->shape() == model.dropout_shape()))
    throw DimensionError("dropout mask shape " + keep_mask->shape().str() +
                         " does not match " + model.dropout_shape().str());
  BoundParams bound(model.params(), params);
  SequenceGraph out;

  switch (model.variant()) {
  case Variant::MvLstm:
  case Variant::MvIndep: {
    ad::Var history;
    if (model.variant() == Variant::MvLstm) {
      auto cell = graph::CellVars::from(bound, "cell");
      history = graph::unroll(cell, tape.constant(xs)).history;
    } else {
      std::vector<graph::CellVars> cells;
      for (std::size_t v = 0; v < shape.n_vars; ++v)
        cells.push_back(graph::CellVars::from(bound, cell_prefix(v)));
      history = indep_history(tape, cells, xs);
    }
    auto head = graph::HeadVars::from(bound, "head");
    ad::Var htilde =
      maybe_drop(graph::temporal_attention(head, history), keep_mask);
    auto m = graph::mixture(head, htilde, y_next);
    out.loss = ad::scale(m.loglik, -1.0);
    out.yhat = m.yhat;
    out.mixture = std::move(m);
    break;
  }
  case Variant::MvFusion: {
    auto cell = graph::CellVars::from(bound, "cell");
    auto head = graph::HeadVars::from(bound, "head", false);
    ad::Var history = graph::unroll(cell, tape.constant(xs)).history;
    ad::Var htilde =
      maybe_drop(graph::temporal_attention(head, history), keep_mask);
    out.yhat = linear_output(bound["fusion.w"], bound["fusion.b"],
                             fused_state(head, htilde));
    out.loss = squared_error(out.yhat, y_next);
    break;
  }
  case Variant::Vanilla:
    out.yhat = vanilla_output(tape, bound["lstm.W"], bound["lstm.b"],
                              bound["out.w"], bound["out.b"], xs, keep_mask);
    out.loss = squared_error(out.yhat, y_next);
    break;
  }
  return out;
}

SequenceResult evaluate_sequence(const Model &model, const Tensor &xs,
                                 double y_next) {
  ad::Tape tape;
  auto vars = model.params().bind(tape);
  SequenceGraph g = forward(tape, model, vars, xs, y_next);
  SequenceResult r{g.yhat.value()[0], g.loss.value()[0], std::nullopt};
  if (g.mixture) {
    const auto &m = *g.mixture;
    r.mixture = MixtureOutput{m.mu.value(),       m.prior.value(),
                              m.loglik.value()[0], m.posterior,
                              m.yhat.value()[0],   m.htilde.value()};
  }
  return r;
}

PointForecast mvfusion_forward(const HeadParams &attention,
                               const Tensor &w_out, const Tensor &b_out,
                               const Tensor &history, double y_next) {
  ad::Tape tape;
  graph::HeadVars head{tape.parameter(attention.ws),
                       tape.parameter(attention.bs),
                       tape.parameter(attention.wv),
                       tape.parameter(attention.bv),
                       {},
                       {},
                       attention.sigma2};
  ad::Var htilde = graph::temporal_attention(head, tape.constant(history));
  ad::Var yhat = linear_output(tape.parameter(w_out), tape.parameter(b_out),
                               fused_state(head, htilde));
  return {yhat.value()[0], squared_error(yhat, y_next).value()[0]};
}

Tensor mvindep_history(std::span<const CellParams> cells, const Tensor &xs) {
  ad::Tape tape;
  std::vector<graph::CellVars> vars;
  for (const CellParams &c : cells) {
    if (c.n_vars() != 1)
      throw DimensionError("independent cells must be single-variable, got N=" +
                           std::to_string(c.n_vars()));
    vars.push_back(graph::CellVars::bind(tape, c));
  }
  return indep_history(tape, vars, xs).value();
}

MixtureOutput mvindep_forward(std::span<const CellParams> cells,
                              const HeadParams &head, const Tensor &xs,
                              double y_next) {
  return mixture_forward(head, mvindep_history(cells, xs), y_next);
}

PointForecast vanilla_forward(const VanillaParams &params, const Tensor &xs,
                              double y_next) {
  ad::Tape tape;
  ad::Var yhat = vanilla_output(
    tape, tape.parameter(params.w), tape.parameter(params.b),
    tape.parameter(params.w_out), tape.parameter(params.b_out), xs, nullptr);
  return {yhat.value()[0], squared_error(yhat, y_next).value()[0]};
}

ad::GradcheckResult gradcheck_model(Variant variant, ModelShape shape,
                                    std::size_t steps, std::uint64_t seed,
                                    const ad::GradcheckOptions &options) {
  std::mt19937_64 rng(seed);
  const Model model = Model::initialize(variant, shape, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor xs({steps, shape.n_vars});
  for (double &v : xs.data())
    v = normal(rng);
  const double y = normal(rng);
  std::vector<Tensor> values;
  for (const auto &p : model.params())
    values.push_back(p.value);
  auto loss = [&](ad::Tape &tape, std::span<const ad::Var> vars) {
    return forward(tape, model, vars, xs, y).loss;
  };
  return ad::gradcheck(loss, std::move(values), options);
}

} // namespace mvlstm
