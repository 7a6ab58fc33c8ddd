// SPDX-License-Identifier: Apache-2.0

#include "parallel.hpp"

#include <mvlstm/error.hpp>
#include <mvlstm/eval.hpp>
#include <mvlstm/log.hpp>
#include <mvlstm/trainer.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mvlstm {

namespace {

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void accumulate(std::vector<Tensor> &acc, const ad::Tape &tape,
                std::span<const ad::Var> vars) {
  for (std::size_t k = 0; k < vars.size(); ++k) {
    const Tensor g = tape.grad(vars[k]);
    auto dst = acc[k].data();
    const auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] += src[i];
  }
}

struct SampleGrad {
  double loss = 0.0;
  std::vector<Tensor> grads;
};

SampleGrad sample_gradient(const Model &model, const Sample &s,
                           const LossOptions &options, std::size_t index,
                           bool keep_grads) {
  ad::Tape tape;
  const auto vars = model.params().bind(tape);
  Tensor mask;
  if (options.dropout > 0.0)
    mask = dropout_mask(model.dropout_shape(), options.dropout,
                        mix_seed(options.seed, options.stream + index));
  SequenceGraph g = forward(tape, model, vars, s.xs, s.y,
                            options.dropout > 0.0 ? &mask : nullptr);
  SampleGrad out;
  out.loss = g.loss.value()[0];
  if (!std::isfinite(out.loss))
    return out;
  tape.backward(g.loss);
  if (keep_grads) {
    out.grads = model.params().zeros_like();
    accumulate(out.grads, tape, vars);
  }
  return out;
}

} // namespace

void TrainConfig::validate() const {
  if (batch_size == 0)
    throw ConfigError("batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be a nonnegative number");
  if (!(l2_lambda >= 0.0) || !std::isfinite(l2_lambda))
    throw ConfigError("l2_lambda must be a nonnegative number");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ConfigError("dropout must lie in [0,1)");
  if (width == 0)
    throw ConfigError("d_per_variable must be positive");
  if (patience == 0)
    throw ConfigError("patience must be at least 1");
  if (threads == 0)
    throw ConfigError("threads must be at least 1");
}

AdamState AdamState::zeros_like(const ParamSet &params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(AdamState &state, ParamSet &params,
               std::span<const Tensor> grads, double learning_rate,
               const AdamOptions &options) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw DimensionError("adam: " + std::to_string(params.size()) +
                         " parameters, " + std::to_string(grads.size()) +
                         " gradients, " + std::to_string(state.m.size()) +
                         " moments");
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k].value.data();
    const auto g = grads[k].data();
    auto m = state.m[k].data();
    auto v = state.v[k].data();
    if (g.size() != theta.size() || m.size() != theta.size())
      throw DimensionError("adam: gradient for '" + params[k].name +
                           "' has " + std::to_string(g.size()) +
                           " entries, parameter has " +
                           std::to_string(theta.size()));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * g[i];
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      theta[i] -= learning_rate * mhat / (std::sqrt(vhat) + options.epsilon);
    }
  }
}

double l2_penalty(const ParamSet &params, double lambda) {
  double s = 0.0;
  for (const auto &p : params)
    if (p.decay)
      for (double w : p.value.data())
        s += w * w;
  return lambda * s;
}

Tensor dropout_mask(const Shape &shape, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ContractViolation("dropout rate must lie in [0,1)");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Tensor mask(shape);
  for (double &v : mask.data())
    v = keep(rng) ? scale : 0.0;
  return mask;
}

double batch_loss(const Model &model, std::span<const Sample> samples,
                  double l2_lambda) {
  if (samples.empty())
    throw ContractViolation("batch is empty");
  double s = 0.0;
  for (const Sample &x : samples)
    s += evaluate_sequence(model, x.xs, x.y).loss;
  return s + l2_penalty(model.params(), l2_lambda);
}

BatchGradient batch_gradient(const Model &model,
                             std::span<const Sample> samples,
                             const LossOptions &options) {
  if (samples.empty())
    throw ContractViolation("batch is empty");
  BatchGradient out;
  out.grads = model.params().zeros_like();
  double data_loss = 0.0;

  if (options.threads <= 1) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      ad::Tape tape;
      const auto vars = model.params().bind(tape);
      Tensor mask;
      if (options.dropout > 0.0)
        mask = dropout_mask(model.dropout_shape(), options.dropout,
                            mix_seed(options.seed, options.stream + i));
      SequenceGraph g = forward(tape, model, vars, samples[i].xs,
                                samples[i].y,
                                options.dropout > 0.0 ? &mask : nullptr);
      const double loss = g.loss.value()[0];
      if (!std::isfinite(loss)) {
        out.nonfinite = i;
        out.loss = loss;
        return out;
      }
      data_loss += loss;
      tape.backward(g.loss);
      accumulate(out.grads, tape, vars);
    }
  } else {
    std::vector<SampleGrad> parts(samples.size());
    detail::parallel_for(samples.size(), options.threads, [&](std::size_t i) {
      parts[i] = sample_gradient(model, samples[i], options, i, true);
    });
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (!std::isfinite(parts[i].loss)) {
        out.nonfinite = i;
        out.loss = parts[i].loss;
        return out;
      }
      data_loss += parts[i].loss;
      for (std::size_t k = 0; k < out.grads.size(); ++k) {
        auto dst = out.grads[k].data();
        const auto src = parts[i].grads[k].data();
        for (std::size_t j = 0; j < dst.size(); ++j)
          dst[j] += src[j];
      }
    }
  }

  out.penalty = l2_penalty(model.params(), options.l2_lambda);
  out.loss = data_loss + out.penalty;
  if (options.l2_lambda > 0.0)
    for (std::size_t k = 0; k < out.grads.size(); ++k) {
      const NamedTensor &p = model.params()[k];
      if (!p.decay)
        continue;
      auto dst = out.grads[k].data();
      const auto w = p.value.data();
      for (std::size_t j = 0; j < dst.size(); ++j)
        dst[j] += 2.0 * options.l2_lambda * w[j];
    }
  return out;
}

FitResult fit(Variant variant, const Dataset &data, const TrainConfig &config,
              const EpochCallback &on_epoch) {
  config.validate();
  const auto train_ends = data.ends(Split::Train);
  if (train_ends.empty())
    throw ContractViolation("training split has no windows");
  if (data.ends(Split::Valid).empty())
    throw ContractViolation("validation split has no windows");

  std::mt19937_64 rng(config.seed);
  Model model = Model::initialize(variant, {data.n_vars(), config.width}, rng);
  const std::vector<Sample> train = data.samples(Split::Train);

  auto valid_rmse = [&](const Model &m) {
    const double r = evaluate(m, data, Split::Valid, config.threads).rmse;
    if (!std::isfinite(r))
      throw NumericError("validation RMSE is not finite");
    return r;
  };

  FitResult result{model, {}, 0.0, 0.0, 0, {}};
  result.initial_valid_rmse = valid_rmse(model);
  result.best_valid_rmse = result.initial_valid_rmse;

  AdamState adam = AdamState::zeros_like(model.params());
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t stream = 0;
  std::size_t stale = 0;
  std::vector<Sample> batch;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double objective = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t end = std::min(order.size(), b + config.batch_size);
      batch.clear();
      for (std::size_t i = b; i < end; ++i)
        batch.push_back(train[order[i]]);
      LossOptions opts{config.l2_lambda, config.dropout, config.seed, stream,
                       config.threads};
      BatchGradient g = batch_gradient(model, batch, opts);
      stream += batch.size();
      if (g.nonfinite != BatchGradient{}.nonfinite || !std::isfinite(g.loss)) {
        const std::size_t at = g.nonfinite == BatchGradient{}.nonfinite
                                 ? 0
                                 : g.nonfinite;
        throw NumericError(
          "non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
          std::to_string(batch_index) + " (window ending at row " +
          std::to_string(train_ends[order[b + at]]) + ")");
      }
      adam_step(adam, model.params(), g.grads, config.learning_rate);
      objective += g.loss;
      ++batch_index;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = objective / static_cast<double>(train.size());
    rec.valid_rmse = valid_rmse(model);
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    result.log.push_back(rec);
    log::info("epoch " + std::to_string(epoch) + " train_loss " +
              format_double(rec.train_loss) + " valid_rmse " +
              format_double(rec.valid_rmse));
    if (on_epoch)
      on_epoch(rec);

    if (rec.valid_rmse < result.best_valid_rmse) {
      result.best_valid_rmse = rec.valid_rmse;
      result.best_epoch = epoch;
      result.model = model;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }

  std::ostringstream state;
  state << rng;
  result.rng_state = state.str();
  return result;
}

std::string training_log_csv(std::span<const EpochRecord> log) {
  std::string out = "epoch,train_loss,valid_rmse,wall_ms\n";
  for (const auto &r : log)
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," +
           format_double(r.valid_rmse) + "," + format_double(r.wall_ms) + "\n";
  return out;
}

namespace {

ModelShape infer_shape(Variant variant, const nlohmann::json &tensors) {
  auto shape_of = [&](const char *name) {
    if (!tensors.contains(name))
      throw IoError(std::string("checkpoint is missing tensor '") + name +
                    "'");
    return tensors.at(name).at("shape").get<std::vector<std::size_t>>();
  };
  auto bad = [&] {
    return IoError("checkpoint tensors do not describe a " +
                   std::string(variant_name(variant)) + " model");
  };
  switch (variant) {
  case Variant::MvLstm:
  case Variant::MvFusion: {
    auto s = shape_of("cell.Wx");
    if (s.size() != 2)
      throw bad();
    return {s[0], s[1]};
  }
  case Variant::MvIndep: {
    auto s = shape_of("head.Ws");
    if (s.size() != 2)
      throw bad();
    return {s[0], s[1]};
  }
  case Variant::Vanilla: {
    auto s = shape_of("lstm.W");
    if (s.size() != 2 || s[0] % 4 != 0)
      throw bad();
    const std::size_t hidden = s[0] / 4;
    if (s[1] <= hidden)
      throw bad();
    const std::size_t n = s[1] - hidden;
    if (hidden % n != 0)
      throw bad();
    return {n, hidden / n};
  }
  }
  throw bad();
}

} // namespace

std::string checkpoint_json(const Model &model, const nlohmann::json &config,
                            const std::string &rng_state) {
  nlohmann::ordered_json tensors = nlohmann::ordered_json::object();
  for (const auto &p : model.params())
    tensors[p.name] = {{"shape", p.value.shape().extents()},
                       {"data", p.value.values()}};
  nlohmann::ordered_json doc{{"format_version", 1},
                             {"variant", variant_name(model.variant())},
                             {"config", config},
                             {"rng_state", rng_state},
                             {"tensors", std::move(tensors)}};
  return doc.dump() + "\n";
}

Checkpoint parse_checkpoint(const std::string &text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception &e) {
    throw IoError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format_version", 0) != 1)
      throw IoError("checkpoint format_version must be 1");
    const Variant variant = parse_variant(doc.at("variant").get<std::string>());
    const auto &tensors = doc.at("tensors");
    const ModelShape shape = infer_shape(variant, tensors);
    const auto layout = parameter_layout(variant, shape);
    if (tensors.size() != layout.size())
      throw IoError("checkpoint has " + std::to_string(tensors.size()) +
                    " tensors, a " + std::string(variant_name(variant)) +
                    " model needs " + std::to_string(layout.size()));
    ParamSet set;
    for (const auto &[name, expected] : layout) {
      if (!tensors.contains(name))
        throw IoError("checkpoint is missing tensor '" + name + "'");
      const auto &t = tensors.at(name);
      Shape s(std::span<const std::size_t>(
        t.at("shape").get<std::vector<std::size_t>>()));
      if (!(s == expected))
        throw IoError("checkpoint tensor '" + name + "' has shape " + s.str() +
                      ", expected " + expected.str());
      set.add(name, Tensor(s, t.at("data").get<std::vector<double>>()),
              is_weight(name));
    }
    return {Model(variant, shape, std::move(set)), doc.at("config"),
            doc.value("rng_state", std::string())};
  } catch (const nlohmann::json::exception &e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path &path, const Model &model,
                     const nlohmann::json &config,
                     const std::string &rng_state) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write checkpoint " + path.string());
  out << checkpoint_json(model, config, rng_state);
  if (!out)
    throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

} // namespace mvlstm
