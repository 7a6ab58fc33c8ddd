// SPDX-License-Identifier: Apache-2.0

#include <mvlstm/config.hpp>
#include <mvlstm/error.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>

namespace mvlstm {

namespace {

using nlohmann::json;

template <typename T> T as(std::string_view key, const json &v) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean())
        throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string())
        throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw ConfigError("");
    } else {
      if (!v.is_number())
        throw ConfigError("");
    }
    return v.get<T>();
  } catch (const std::exception &) {
    const char *want = std::is_same_v<T, bool>          ? "a boolean"
                       : std::is_same_v<T, std::string> ? "a string"
                       : std::is_integral_v<T> ? "a nonnegative integer"
                                               : "a number";
    throw ConfigError("config field '" + std::string(key) + "' must be " +
                      want + ", got " + v.dump());
  }
}

const std::vector<std::string> kRequired = {"target_column", "window_T"};

} // namespace

const std::vector<std::string> &config_keys() {
  static const std::vector<std::string> keys = {
    "target_column", "window_T",      "difference", "fill_policy",
    "split",         "stride",        "batch_size", "variant",
    "learning_rate", "l2_lambda",     "dropout",    "d_per_variable",
    "max_epochs",    "patience",      "seed",       "threads"};
  return keys;
}

void RunConfig::set(std::string_view key, const json &v) {
  if (key == "target_column")
    data.target_column = as<std::string>(key, v);
  else if (key == "window_T")
    data.window = as<std::size_t>(key, v);
  else if (key == "difference")
    data.difference = as<bool>(key, v);
  else if (key == "fill_policy")
    data.fill = parse_fill_policy(as<std::string>(key, v));
  else if (key == "split") {
    if (!v.is_array() || v.size() != 3)
      throw ConfigError("config field 'split' must be [train, valid, test], "
                        "got " + v.dump());
    data.split = {as<double>("split[0]", v[0]), as<double>("split[1]", v[1]),
                  as<double>("split[2]", v[2])};
  } else if (key == "stride")
    data.stride = as<std::size_t>(key, v);
  else if (key == "batch_size")
    train.batch_size = as<std::size_t>(key, v);
  else if (key == "variant")
    variant = parse_variant(as<std::string>(key, v));
  else if (key == "learning_rate")
    train.learning_rate = as<double>(key, v);
  else if (key == "l2_lambda")
    train.l2_lambda = as<double>(key, v);
  else if (key == "dropout")
    train.dropout = as<double>(key, v);
  else if (key == "d_per_variable")
    train.width = as<std::size_t>(key, v);
  else if (key == "max_epochs")
    train.max_epochs = as<std::size_t>(key, v);
  else if (key == "patience")
    train.patience = as<std::size_t>(key, v);
  else if (key == "seed")
    train.seed = as<std::uint64_t>(key, v);
  else if (key == "threads")
    train.threads = as<std::size_t>(key, v);
  else
    throw ConfigError("unknown config field '" + std::string(key) + "'");
}

RunConfig RunConfig::from_json(const json &doc, bool partial) {
  if (!doc.is_object())
    throw ConfigError("config must be a JSON object");
  RunConfig c;
  for (const auto &[key, value] : doc.items())
    c.set(key, value);
  if (!partial) {
    std::vector<std::string> missing;
    for (const auto &k : kRequired)
      if (!doc.contains(k))
        missing.push_back(k);
    if (!missing.empty()) {
      std::string names;
      for (const auto &m : missing)
        names += (names.empty() ? "'" : ", '") + m + "'";
      throw ConfigError("config is missing required field" +
                        std::string(missing.size() > 1 ? "s " : " ") + names);
    }
    c.validate();
  }
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception &e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return from_json(doc);
}

void RunConfig::validate() const {
  data.validate();
  train.validate();
}

nlohmann::ordered_json RunConfig::to_json() const {
  return {{"target_column", data.target_column},
          {"window_T", data.window},
          {"difference", data.difference},
          {"fill_policy", fill_policy_name(data.fill)},
          {"split", {data.split.train, data.split.valid, data.split.test}},
          {"stride", data.stride},
          {"batch_size", train.batch_size},
          {"variant", variant_name(variant)},
          {"learning_rate", train.learning_rate},
          {"l2_lambda", train.l2_lambda},
          {"dropout", train.dropout},
          {"d_per_variable", train.width},
          {"max_epochs", train.max_epochs},
          {"patience", train.patience},
          {"seed", train.seed},
          {"threads", train.threads}};
}

} // namespace mvlstm
