// SPDX-License-Identifier: Apache-2.0
/**
 * @file   config.hpp
 * @brief  Run configuration: data pipeline + training + variant, read from a
 *         flat JSON object. Unknown keys are rejected.
 *
 * Keys: target_column, window_T (both required), difference, fill_policy,
 * split ([train, valid, test]), stride, batch_size, variant, learning_rate,
 * l2_lambda, dropout, d_per_variable, max_epochs, patience, seed, threads.
 */

#ifndef MVLSTM_CONFIG_HPP
#define MVLSTM_CONFIG_HPP

#include <mvlstm/data.hpp>
#include <mvlstm/model.hpp>
#include <mvlstm/trainer.hpp>

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mvlstm {

struct RunConfig {
  DataConfig data;
  TrainConfig train;
  Variant variant = Variant::MvLstm;

  void validate() const;

  /// Required fields are enforced unless `partial` is set.
  static RunConfig from_json(const nlohmann::json &doc, bool partial = false);
  static RunConfig from_file(const std::filesystem::path &path);
  nlohmann::ordered_json to_json() const;

  /// Sets one key from a JSON value (unknown keys and bad types throw).
  void set(std::string_view key, const nlohmann::json &value);
};

/// Every accepted key, in canonical order.
const std::vector<std::string> &config_keys();

} // namespace mvlstm

#endif // MVLSTM_CONFIG_HPP
