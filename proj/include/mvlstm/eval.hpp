// SPDX-License-Identifier: Apache-2.0
/**
 * @file   eval.hpp
 * @brief  Forecast metrics, attention collection, variable importance and
 *         attention histograms.
 */

#ifndef MVLSTM_EVAL_HPP
#define MVLSTM_EVAL_HPP

#include <mvlstm/data.hpp>
#include <mvlstm/model.hpp>

#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace mvlstm {

double rmse(std::span<const double> y, std::span<const double> yhat);
double mae(std::span<const double> y, std::span<const double> yhat);

struct Metrics {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
};

/// Targets and predictions in original units, in window order.
struct Forecasts {
  std::vector<std::size_t> ends;
  std::vector<double> y;
  std::vector<double> yhat;
};

/// Normalized-unit predictions for explicit samples, without dropout.
std::vector<double> predict_samples(const Model &model,
                                    std::span<const Sample> samples,
                                    std::size_t threads = 1);
Forecasts forecast(const Model &model, const Dataset &data, Split split,
                   std::size_t threads = 1);
Metrics evaluate(const Model &model, const Dataset &data, Split split,
                 std::size_t threads = 1);
Metrics metrics_of(const Forecasts &f);

struct AttentionRecord {
  Tensor prior;     ///< [N]
  Tensor posterior; ///< [N]
};

/// Prior and posterior attention per sample. Needs a mixture variant.
std::vector<AttentionRecord> collect_attention(const Model &model,
                                               std::span<const Sample> samples,
                                               std::size_t threads = 1);
std::vector<AttentionRecord> collect_attention(const Model &model,
                                               const Dataset &data, Split split,
                                               std::size_t threads = 1);

/// Importance(n) = sum_m post_m(n) / sum_k sum_m post_m(k).
Tensor importance(std::span<const Tensor> posteriors);
Tensor importance(std::span<const AttentionRecord> records);
/// Indices by importance, descending; ties go to the lower index.
std::vector<std::size_t> rank_variables(const Tensor &importance);

struct Histogram {
  std::size_t bins = 0;
  std::vector<std::size_t> counts;

  double lo(std::size_t b) const { return double(b) / double(bins); }
  double hi(std::size_t b) const { return double(b + 1) / double(bins); }
};

/// Uniform bins over [0,1]; v lands in min(floor(v*bins), bins-1).
std::size_t histogram_bin(double v, std::size_t bins);
Histogram histogram(std::span<const double> values, std::size_t bins);

struct ImportanceReport {
  std::vector<std::string> names;
  Tensor importance;
  std::vector<std::size_t> ranking;
  std::vector<Histogram> prior;     ///< per variable
  std::vector<Histogram> posterior; ///< per variable
  std::string split;
  std::size_t n_sequences = 0;
  std::string checkpoint_checksum;

  nlohmann::ordered_json to_json() const;
  /// variable,kind,bin_lo,bin_hi,count
  std::string histograms_csv() const;
};

ImportanceReport build_report(std::vector<std::string> names,
                              std::span<const AttentionRecord> records,
                              std::size_t bins, std::string split,
                              std::string checkpoint_checksum);

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a64(std::string_view bytes);

} // namespace mvlstm

#endif // MVLSTM_EVAL_HPP
