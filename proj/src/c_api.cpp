// SPDX-License-Identifier: Apache-2.0

#include <mvlstm/mvlstm.h>

#include <mvlstm/config.hpp>
#include <mvlstm/error.hpp>
#include <mvlstm/eval.hpp>
#include <mvlstm/log.hpp>
#include <mvlstm/synthetic.hpp>
#include <mvlstm/trainer.hpp>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <set>
#include <sstream>
#include <string>

struct mvl_config {
  mvlstm::RunConfig run;
  std::set<std::string> given;
};

struct mvl_model {
  mvlstm::Checkpoint checkpoint;
  mvlstm::RunConfig run;
  std::string checksum;
};

namespace {

thread_local std::string g_last_error;

mvl_status fail(mvl_status s, const std::string &msg) {
  g_last_error = msg;
  return s;
}

template <typename Fn> mvl_status guarded(Fn &&fn) {
  try {
    g_last_error.clear();
    fn();
    return MVL_OK;
  } catch (const mvlstm::ConfigError &e) {
    return fail(MVL_ERR_CONFIG, e.what());
  } catch (const mvlstm::IoError &e) {
    return fail(MVL_ERR_IO, e.what());
  } catch (const mvlstm::DimensionError &e) {
    return fail(MVL_ERR_DIMENSION, e.what());
  } catch (const mvlstm::ContractViolation &e) {
    return fail(MVL_ERR_CONTRACT, e.what());
  } catch (const mvlstm::NumericError &e) {
    return fail(MVL_ERR_NUMERIC, e.what());
  } catch (const nlohmann::json::exception &e) {
    return fail(MVL_ERR_CONFIG, std::string("JSON: ") + e.what());
  } catch (const std::bad_alloc &) {
    return fail(MVL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception &e) {
    return fail(MVL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MVL_ERR_INTERNAL, "unknown error");
  }
}

char *dup(const std::string &s) {
  char *out = static_cast<char *>(std::malloc(s.size() + 1));
  if (!out)
    throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void write_text(const char *path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw mvlstm::IoError(std::string("cannot write ") + path);
  out << text;
  if (!out)
    throw mvlstm::IoError(std::string("write failed for ") + path);
}

void check_required(const mvl_config &cfg) {
  for (const char *key : {"target_column", "window_T"})
    if (!cfg.given.count(key))
      throw mvlstm::ConfigError(std::string("config is missing required "
                                            "field '") +
                                key + "'");
  cfg.run.validate();
}

mvlstm::Dataset load_for(const mvl_model &m, const char *data_path) {
  mvlstm::Dataset data = mvlstm::Dataset::load(data_path, m.run.data);
  const auto shape = m.checkpoint.model.shape();
  if (data.n_vars() != shape.n_vars)
    throw mvlstm::DimensionError(
      std::string(data_path) + " has " + std::to_string(data.n_vars()) +
      " columns but the checkpoint model was trained with N=" +
      std::to_string(shape.n_vars) + " variables");
  return data;
}

std::size_t pick_threads(const mvl_model &m, std::size_t threads) {
  return threads ? threads : m.run.train.threads;
}

} // namespace

extern "C" {

const char *mvl_version(void) { return "1.0.0"; }

const char *mvl_status_name(mvl_status status) {
  switch (status) {
  case MVL_OK: return "ok";
  case MVL_ERR_INVALID_ARGUMENT: return "invalid argument";
  case MVL_ERR_CONFIG: return "config error";
  case MVL_ERR_IO: return "io error";
  case MVL_ERR_DIMENSION: return "dimension error";
  case MVL_ERR_CONTRACT: return "contract violation";
  case MVL_ERR_NUMERIC: return "numeric error";
  case MVL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char *mvl_last_error(void) { return g_last_error.c_str(); }

void mvl_string_free(char *s) { std::free(s); }

mvl_status mvl_config_new(mvl_config **out) {
  if (!out)
    return fail(MVL_ERR_INVALID_ARGUMENT, "out must not be NULL");
  return guarded([&] { *out = new mvl_config(); });
}

mvl_status mvl_config_from_json(const char *json, mvl_config **out) {
  if (!json || !out)
    return fail(MVL_ERR_INVALID_ARGUMENT, "json and out must not be NULL");
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception &e) {
      throw mvlstm::ConfigError(std::string("config is not valid JSON: ") +
                                e.what());
    }
    auto cfg = std::make_unique<mvl_config>();
    cfg->run = mvlstm::RunConfig::from_json(doc, true);
    for (const auto &[k, v] : doc.items())
      cfg->given.insert(k);
    *out = cfg.release();
  });
}

mvl_status mvl_config_from_file(const char *path, mvl_config **out) {
  if (!path || !out)
    return fail(MVL_ERR_INVALID_ARGUMENT, "path and out must not be NULL");
  std::ifstream in(path, std::ios::binary);
  if (!in)
    return fail(MVL_ERR_IO, std::string("cannot open config ") + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return mvl_config_from_json(buf.str().c_str(), out);
}

mvl_status mvl_config_set(mvl_config *cfg, const char *key,
                          const char *json_value) {
  if (!cfg || !key || !json_value)
    return fail(MVL_ERR_INVALID_ARGUMENT,
                "cfg, key and json_value must not be NULL");
  return guarded([&] {
    nlohmann::json v;
    try {
      v = nlohmann::json::parse(json_value);
    } catch (const nlohmann::json::exception &) {
      // Bare words are taken as strings, e.g. variant=mvlstm.
      v = std::string(json_value);
    }
    cfg->run.set(key, v);
    cfg->given.insert(key);
  });
}

mvl_status mvl_config_validate(const mvl_config *cfg) {
  if (!cfg)
    return fail(MVL_ERR_INVALID_ARGUMENT, "cfg must not be NULL");
  return guarded([&] { check_required(*cfg); });
}

mvl_status mvl_config_to_json(const mvl_config *cfg, char **out) {
  if (!cfg || !out)
    return fail(MVL_ERR_INVALID_ARGUMENT, "cfg and out must not be NULL");
  return guarded([&] { *out = dup(cfg->run.to_json().dump(2) + "\n"); });
}

void mvl_config_free(mvl_config *cfg) { delete cfg; }

const char *mvl_config_key(size_t i) {
  const auto &keys = mvlstm::config_keys();
  return i < keys.size() ? keys[i].c_str() : nullptr;
}

mvl_status mvl_generate(uint64_t seed, size_t length, size_t n_exo,
                        const double *gains, const char *csv_path,
                        const char *manifest_path) {
  if (!csv_path)
    return fail(MVL_ERR_INVALID_ARGUMENT, "csv_path must not be NULL");
  return guarded([&] {
    mvlstm::GenerateOptions opts;
    opts.seed = seed;
    opts.length = length;
    opts.n_exo = n_exo;
    if (gains)
      opts.gains = std::array<double, 2>{gains[0], gains[1]};
    const auto data = mvlstm::generate_dataset(opts);
    mvlstm::write_csv(csv_path, data.series);
    if (manifest_path)
      write_text(manifest_path, data.manifest_json());
  });
}

mvl_status mvl_train(const mvl_config *cfg, const char *data_path,
                     const char *checkpoint_path, const char *log_path,
                     double *best_valid_rmse) {
  if (!cfg || !data_path || !checkpoint_path)
    return fail(MVL_ERR_INVALID_ARGUMENT,
                "cfg, data_path and checkpoint_path must not be NULL");
  return guarded([&] {
    check_required(*cfg);
    const auto &run = cfg->run;
    const auto data = mvlstm::Dataset::load(data_path, run.data);
    const auto result = mvlstm::fit(run.variant, data, run.train);
    mvlstm::save_checkpoint(checkpoint_path, result.model, run.to_json(),
                            result.rng_state);
    if (log_path)
      write_text(log_path, mvlstm::training_log_csv(result.log));
    if (best_valid_rmse)
      *best_valid_rmse = result.best_valid_rmse;
  });
}

mvl_status mvl_model_load(const char *checkpoint_path, mvl_model **out) {
  if (!checkpoint_path || !out)
    return fail(MVL_ERR_INVALID_ARGUMENT,
                "checkpoint_path and out must not be NULL");
  return guarded([&] {
    std::ifstream in(checkpoint_path, std::ios::binary);
    if (!in)
      throw mvlstm::IoError(std::string("cannot open checkpoint ") +
                            checkpoint_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    auto m = std::make_unique<mvl_model>(
      mvl_model{mvlstm::parse_checkpoint(text), {}, mvlstm::fnv1a64(text)});
    m->run = mvlstm::RunConfig::from_json(m->checkpoint.config);
    if (m->run.variant != m->checkpoint.model.variant())
      throw mvlstm::IoError("checkpoint variant does not match its config");
    if (m->run.train.width != m->checkpoint.model.shape().width)
      throw mvlstm::DimensionError(
        "checkpoint config has d_per_variable=" +
        std::to_string(m->run.train.width) + " but its tensors have d=" +
        std::to_string(m->checkpoint.model.shape().width));
    *out = m.release();
  });
}

mvl_status mvl_model_info(const mvl_model *model, char **json) {
  if (!model || !json)
    return fail(MVL_ERR_INVALID_ARGUMENT, "model and json must not be NULL");
  return guarded([&] {
    const auto &m = model->checkpoint.model;
    nlohmann::ordered_json info{
      {"variant", mvlstm::variant_name(m.variant())},
      {"n_vars", m.shape().n_vars},
      {"d_per_variable", m.shape().width},
      {"parameters", m.params().scalar_count()},
      {"checkpoint_fnv1a64", model->checksum},
      {"config", model->run.to_json()}};
    *json = dup(info.dump(2) + "\n");
  });
}

void mvl_model_free(mvl_model *model) { delete model; }

mvl_status mvl_evaluate(const mvl_model *model, const char *data_path,
                        const char *split, size_t threads,
                        char **metrics_json) {
  if (!model || !data_path || !split || !metrics_json)
    return fail(MVL_ERR_INVALID_ARGUMENT,
                "model, data_path, split and metrics_json must not be NULL");
  return guarded([&] {
    const auto s = mvlstm::parse_split(split);
    const auto data = load_for(*model, data_path);
    const auto m = mvlstm::evaluate(model->checkpoint.model, data, s,
                                    pick_threads(*model, threads));
    nlohmann::ordered_json doc{{"rmse", m.rmse},
                               {"mae", m.mae},
                               {"n", m.n},
                               {"split", mvlstm::split_name(s)},
                               {"checkpoint_fnv1a64", model->checksum},
                               {"config", model->run.to_json()}};
    *metrics_json = dup(doc.dump(2) + "\n");
  });
}

mvl_status mvl_interpret(const mvl_model *model, const char *data_path,
                         const char *split, size_t bins, size_t threads,
                         char **report_json, char **histogram_csv) {
  if (!model || !data_path || !split || !report_json || !histogram_csv)
    return fail(MVL_ERR_INVALID_ARGUMENT,
                "model, data_path, split and outputs must not be NULL");
  if (bins < 2)
    return fail(MVL_ERR_INVALID_ARGUMENT, "bins must be at least 2");
  return guarded([&] {
    const auto s = mvlstm::parse_split(split);
    const auto data = load_for(*model, data_path);
    const auto records = mvlstm::collect_attention(
      model->checkpoint.model, data, s, pick_threads(*model, threads));
    const auto report =
      mvlstm::build_report(data.names(), records, bins,
                           std::string(mvlstm::split_name(s)), model->checksum);
    auto doc = report.to_json();
    doc["variant"] = mvlstm::variant_name(model->checkpoint.model.variant());
    doc["config"] = model->run.to_json();
    char *r = dup(doc.dump(2) + "\n");
    try {
      *histogram_csv = dup(report.histograms_csv());
    } catch (...) {
      std::free(r);
      throw;
    }
    *report_json = r;
  });
}

mvl_status mvl_gradcheck(const char *variant, size_t n_vars, size_t width,
                         size_t steps, uint64_t seed, double corrupt,
                         double *max_rel_error) {
  if (!variant || !max_rel_error)
    return fail(MVL_ERR_INVALID_ARGUMENT,
                "variant and max_rel_error must not be NULL");
  return guarded([&] {
    mvlstm::ad::GradcheckOptions opts;
    opts.corrupt = corrupt;
    const auto r = mvlstm::gradcheck_model(mvlstm::parse_variant(variant),
                                           {n_vars, width}, steps, seed, opts);
    *max_rel_error = r.max_rel_error;
  });
}

} // extern "C"
