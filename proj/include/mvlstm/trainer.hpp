// SPDX-License-Identifier: Apache-2.0
/**
 * @file   trainer.hpp
 * @brief  Mini-batch Adam training with L2 on weights, validation early
 *         stopping, and JSON checkpoints.
 *
 * Each sequence is recorded on its own tape. Per-sequence gradients are summed
 * in sample order whatever the thread count, so a run's parameters depend only
 * on its seed and data.
 */

#ifndef MVLSTM_TRAINER_HPP
#define MVLSTM_TRAINER_HPP

#include <mvlstm/data.hpp>
#include <mvlstm/model.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mvlstm {

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 0.001;
  double l2_lambda = 0.001;
  double dropout = 0.5;
  std::size_t width = 10; ///< hidden units per variable
  std::size_t max_epochs = 30;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;

  static AdamState zeros_like(const ParamSet &params);
};

/// One bias-corrected Adam update in place.
void adam_step(AdamState &state, ParamSet &params,
               std::span<const Tensor> grads, double learning_rate,
               const AdamOptions &options = {});

/// lambda * sum of squared entries over weight tensors.
double l2_penalty(const ParamSet &params, double lambda);

struct LossOptions {
  double l2_lambda = 0.0;
  double dropout = 0.0;
  std::uint64_t seed = 0;
  /// Index of the first sample in the run's stream of training sequences;
  /// sample i draws its dropout mask from mix_seed(seed, stream + i).
  std::uint64_t stream = 0;
  std::size_t threads = 1;
};

struct BatchGradient {
  double loss = 0.0;     ///< data loss + penalty
  double penalty = 0.0;
  std::vector<Tensor> grads;
  /// Position of the first sample whose loss was not finite, or npos.
  std::size_t nonfinite = static_cast<std::size_t>(-1);
};

/// Sum over samples of the per-sequence loss plus the L2 penalty. Without
/// dropout this is the deterministic training objective.
double batch_loss(const Model &model, std::span<const Sample> samples,
                  double l2_lambda);
BatchGradient batch_gradient(const Model &model,
                             std::span<const Sample> samples,
                             const LossOptions &options);

/// Inverted-dropout keep mask (entries 0 or 1/(1-rate)).
Tensor dropout_mask(const Shape &shape, double rate, std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0; ///< mean objective per training sequence
  double valid_rmse = 0.0; ///< original units
  double wall_ms = 0.0;
};

struct FitResult {
  Model model; ///< best-validation parameters
  std::vector<EpochRecord> log;
  double initial_valid_rmse = 0.0;
  double best_valid_rmse = 0.0;
  std::size_t best_epoch = 0; ///< 0 means the initial parameters
  std::string rng_state;
};

using EpochCallback = std::function<void(const EpochRecord &)>;

FitResult fit(Variant variant, const Dataset &data, const TrainConfig &config,
              const EpochCallback &on_epoch = {});

/// epoch,train_loss,valid_rmse,wall_ms
std::string training_log_csv(std::span<const EpochRecord> log);

struct Checkpoint {
  Model model;
  nlohmann::json config;
  std::string rng_state;
};

std::string checkpoint_json(const Model &model, const nlohmann::json &config,
                            const std::string &rng_state);
Checkpoint parse_checkpoint(const std::string &text);
void save_checkpoint(const std::filesystem::path &path, const Model &model,
                     const nlohmann::json &config,
                     const std::string &rng_state);
Checkpoint load_checkpoint(const std::filesystem::path &path);

} // namespace mvlstm

#endif // MVLSTM_TRAINER_HPP
