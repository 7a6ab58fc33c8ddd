// SPDX-License-Identifier: Apache-2.0
/**
 * @file   data.hpp
 * @brief  CSV ingestion, differencing, train-statistics z-scoring and
 *         chronological windowing.
 *
 * A window ending at row p uses rows p-T .. p-1 as inputs and row p's target
 * as the value to predict. Rows are split chronologically into train, valid
 * and test segments; windows never straddle a segment boundary.
 */

#ifndef MVLSTM_DATA_HPP
#define MVLSTM_DATA_HPP

#include <mvlstm/tensor.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mvlstm {

enum class FillPolicy { Strict, Ffill };

std::string_view fill_policy_name(FillPolicy p);
FillPolicy parse_fill_policy(std::string_view name);

struct RawSeries {
  std::vector<std::string> names; ///< target last
  Tensor values;                  ///< [L,N]

  std::size_t length() const { return values.extent(0); }
  std::size_t n_vars() const { return values.extent(1); }
  std::size_t target() const { return n_vars() - 1; }
};

/// Reads a header + numeric rows file, moving `target_column` to the end.
RawSeries load_csv(const std::filesystem::path &path,
                   std::string_view target_column, FillPolicy fill);
/// Writes with round-trip precision, so load_csv(write_csv(s)) == s.
void write_csv(const std::filesystem::path &path, const RawSeries &series);

/// First-order difference per column (length L-1); identity when disabled.
RawSeries difference(const RawSeries &series, bool enabled);

struct SplitSpec {
  double train = 0.7;
  double valid = 0.1;
  double test = 0.2;

  void validate() const;
};

/// Row boundaries: train [0,train_end), valid [train_end,valid_end),
/// test [valid_end,length).
struct SplitRows {
  std::size_t train_end = 0;
  std::size_t valid_end = 0;
  std::size_t length = 0;
};

SplitRows split_rows(std::size_t length, const SplitSpec &split);

/// Window end rows p with p-T >= begin and p < end, every `stride` rows.
std::vector<std::size_t> window_ends(std::size_t begin, std::size_t end,
                                     std::size_t window, std::size_t stride);

struct SequenceBatch {
  Tensor inputs;                    ///< [B,T,N]
  Tensor targets;                   ///< [B]
  std::vector<std::size_t> indices; ///< window end rows
};

/// All L-T stride-1 windows over the full series.
SequenceBatch window(const RawSeries &series, std::size_t window);

/// Per-column z-score with statistics from a leading block of rows.
class Normalizer {
public:
  Normalizer() = default;
  Normalizer(std::vector<double> mean, std::vector<double> std);

  /// Statistics over rows [0, rows). A zero std is replaced by 1.
  static Normalizer fit(const Tensor &values, std::size_t rows);

  const std::vector<double> &mean() const { return mean_; }
  const std::vector<double> &std() const { return std_; }

  Tensor transform(const Tensor &values) const;
  Tensor inverse(const Tensor &values) const;
  double transform(double v, std::size_t column) const;
  double inverse(double v, std::size_t column) const;

private:
  std::vector<double> mean_;
  std::vector<double> std_;
};

/// One normalized input window and the value that follows it.
struct Sample {
  Tensor xs; ///< [T,N]
  double y = 0.0;
};

enum class Split { Train, Valid, Test, All };

std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct DataConfig {
  std::string target_column;
  std::size_t window = 0;
  bool difference = false;
  FillPolicy fill = FillPolicy::Strict;
  SplitSpec split;
  std::size_t stride = 1;

  void validate() const;
};

/// A loaded, normalized series with its window index per split.
class Dataset {
public:
  Dataset(RawSeries series, const DataConfig &config);

  static Dataset load(const std::filesystem::path &path,
                      const DataConfig &config);

  const std::vector<std::string> &names() const { return series_.names; }
  std::size_t n_vars() const { return series_.n_vars(); }
  std::size_t window() const { return window_; }
  const SplitRows &rows() const { return rows_; }
  const RawSeries &series() const { return series_; }
  const Tensor &normalized() const { return normalized_; }
  const Normalizer &normalizer() const { return normalizer_; }

  std::span<const std::size_t> ends(Split s) const;
  /// Window ending at `end`, normalized, [T,N].
  Tensor inputs(std::size_t end) const;
  double target(std::size_t end) const;
  Sample sample(std::size_t end) const { return {inputs(end), target(end)}; }
  std::vector<Sample> samples(Split s) const;
  /// Target in original (possibly differenced) units.
  double target_raw(std::size_t end) const;
  double to_raw_target(double normalized) const;

private:
  RawSeries series_;
  std::size_t window_;
  SplitRows rows_;
  Normalizer normalizer_;
  Tensor normalized_;
  std::vector<std::size_t> train_, valid_, test_, all_;
};

} // namespace mvlstm

#endif // MVLSTM_DATA_HPP
