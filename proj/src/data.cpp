// SPDX-License-Identifier: Apache-2.0

#include <mvlstm/data.hpp>
#include <mvlstm/error.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mvlstm {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos)
      break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double &out) {
  if (s.empty())
    return false;
  if (s.front() == '+')
    s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

} // namespace

std::string_view fill_policy_name(FillPolicy p) {
  return p == FillPolicy::Strict ? "strict" : "ffill";
}

FillPolicy parse_fill_policy(std::string_view name) {
  const std::string s = lower(name);
  if (s == "strict")
    return FillPolicy::Strict;
  if (s == "ffill")
    return FillPolicy::Ffill;
  throw ConfigError("fill_policy must be \"strict\" or \"ffill\", got \"" +
                    std::string(name) + "\"");
}

RawSeries load_csv(const std::filesystem::path &path,
                   std::string_view target_column, FillPolicy fill) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open data file " + path.string());

  std::string line;
  if (!std::getline(in, line))
    throw IoError(path.string() + ": missing header row");
  std::vector<std::string> header;
  for (auto f : split_fields(line))
    header.emplace_back(f);
  const std::size_t n = header.size();

  const auto target_it =
    std::find(header.begin(), header.end(), std::string(target_column));
  if (target_it == header.end())
    throw ConfigError(path.string() + ": target column '" +
                      std::string(target_column) + "' not in header");
  const std::size_t target = target_it - header.begin();

  // Column order with the target moved last.
  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < n; ++c)
    if (c != target)
      order.push_back(c);
  order.push_back(target);

  std::vector<double> data;
  std::vector<double> row(n);
  std::vector<bool> seen(n, false);
  std::size_t rows = 0, line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    const auto fields = split_fields(line);
    if (fields.size() != n)
      throw IoError(path.string() + ": line " + std::to_string(line_no) +
                    " has " + std::to_string(fields.size()) +
                    " fields, header has " + std::to_string(n));
    for (std::size_t c = 0; c < n; ++c) {
      double v;
      if (parse_double(fields[c], v)) {
        row[c] = v;
        seen[c] = true;
        continue;
      }
      if (fill == FillPolicy::Strict || !seen[c])
        throw IoError(path.string() + ": line " + std::to_string(line_no) +
                      ", column '" + header[c] + "': cannot parse \"" +
                      std::string(fields[c]) + "\"" +
                      (fill == FillPolicy::Ffill ? " (no earlier value)" : ""));
      // ffill: keep row[c] from the previous line.
    }
    for (std::size_t c : order)
      data.push_back(row[c]);
    ++rows;
  }
  if (rows == 0)
    throw IoError(path.string() + ": no data rows");

  RawSeries s;
  for (std::size_t c : order)
    s.names.push_back(header[c]);
  s.values = Tensor({rows, n}, std::move(data));
  return s;
}

void write_csv(const std::filesystem::path &path, const RawSeries &series) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write " + path.string());
  for (std::size_t c = 0; c < series.names.size(); ++c)
    out << (c ? "," : "") << series.names[c];
  out << '\n';
  for (std::size_t r = 0; r < series.length(); ++r) {
    for (std::size_t c = 0; c < series.n_vars(); ++c)
      out << (c ? "," : "") << format_double(series.values(r, c));
    out << '\n';
  }
  if (!out)
    throw IoError("write failed for " + path.string());
}

RawSeries difference(const RawSeries &series, bool enabled) {
  if (!enabled)
    return series;
  const std::size_t l = series.length(), n = series.n_vars();
  if (l < 2)
    throw ContractViolation("differencing needs at least 2 rows, got " +
                            std::to_string(l));
  RawSeries out{series.names, Tensor({l - 1, n})};
  for (std::size_t r = 1; r < l; ++r)
    for (std::size_t c = 0; c < n; ++c)
      out.values(r - 1, c) = series.values(r, c) - series.values(r - 1, c);
  return out;
}

void SplitSpec::validate() const {
  for (double f : {train, valid, test})
    if (!(f >= 0.0 && f <= 1.0))
      throw ConfigError("split fractions must lie in [0,1]");
  if (std::abs(train + valid + test - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1, got " +
                      format_double(train + valid + test));
  if (train <= 0.0 || valid <= 0.0)
    throw ConfigError("split needs nonzero train and valid fractions");
}

SplitRows split_rows(std::size_t length, const SplitSpec &split) {
  split.validate();
  const double l = static_cast<double>(length);
  SplitRows r;
  r.length = length;
  r.train_end = static_cast<std::size_t>(std::floor(l * split.train + 1e-9));
  r.valid_end = static_cast<std::size_t>(
    std::floor(l * (split.train + split.valid) + 1e-9));
  r.valid_end = std::min(r.valid_end, length);
  return r;
}

std::vector<std::size_t> window_ends(std::size_t begin, std::size_t end,
                                     std::size_t window, std::size_t stride) {
  if (stride == 0)
    throw ContractViolation("window stride must be positive");
  std::vector<std::size_t> out;
  for (std::size_t p = begin + window; p < end; p += stride)
    out.push_back(p);
  return out;
}

SequenceBatch window(const RawSeries &series, std::size_t window) {
  const std::size_t l = series.length(), n = series.n_vars();
  if (window < 2)
    throw ContractViolation("window T must be at least 2, got " +
                            std::to_string(window));
  if (l < window + 1)
    throw ContractViolation("series of length " + std::to_string(l) +
                            " is too short for window T=" +
                            std::to_string(window));
  SequenceBatch b;
  b.indices = window_ends(0, l, window, 1);
  const std::size_t count = b.indices.size();
  b.inputs = Tensor({count, window, n});
  b.targets = Tensor({count});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t p = b.indices[i];
    for (std::size_t t = 0; t < window; ++t)
      for (std::size_t c = 0; c < n; ++c)
        b.inputs(i, t, c) = series.values(p - window + t, c);
    b.targets[i] = series.values(p, series.target());
  }
  return b;
}

Normalizer::Normalizer(std::vector<double> mean, std::vector<double> std)
  : mean_(std::move(mean)), std_(std::move(std)) {
  if (mean_.size() != std_.size())
    throw DimensionError("normalizer mean/std lengths differ");
}

Normalizer Normalizer::fit(const Tensor &values, std::size_t rows) {
  if (values.rank() != 2)
    throw DimensionError("normalizer expects [L,N] values, got " +
                         values.shape().str());
  if (rows == 0 || rows > values.extent(0))
    throw ContractViolation("normalizer needs 1.." +
                            std::to_string(values.extent(0)) +
                            " statistic rows, got " + std::to_string(rows));
  const std::size_t n = values.extent(1);
  std::vector<double> mean(n, 0.0), sd(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
      s += values(r, c);
    mean[c] = s / static_cast<double>(rows);
    double ss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double dev = values(r, c) - mean[c];
      ss += dev * dev;
    }
    sd[c] = std::sqrt(ss / static_cast<double>(rows));
    if (!(sd[c] > 0.0))
      sd[c] = 1.0;
  }
  return Normalizer(std::move(mean), std::move(sd));
}

double Normalizer::transform(double v, std::size_t column) const {
  return (v - mean_[column]) / std_[column];
}

double Normalizer::inverse(double v, std::size_t column) const {
  return v * std_[column] + mean_[column];
}

Tensor Normalizer::transform(const Tensor &values) const {
  if (values.rank() != 2 || values.extent(1) != mean_.size())
    throw DimensionError("normalizer has " + std::to_string(mean_.size()) +
                         " columns, values are " + values.shape().str());
  Tensor out(values.shape());
  for (std::size_t r = 0; r < values.extent(0); ++r)
    for (std::size_t c = 0; c < mean_.size(); ++c)
      out(r, c) = transform(values(r, c), c);
  return out;
}

Tensor Normalizer::inverse(const Tensor &values) const {
  if (values.rank() != 2 || values.extent(1) != mean_.size())
    throw DimensionError("normalizer has " + std::to_string(mean_.size()) +
                         " columns, values are " + values.shape().str());
  Tensor out(values.shape());
  for (std::size_t r = 0; r < values.extent(0); ++r)
    for (std::size_t c = 0; c < mean_.size(); ++c)
      out(r, c) = inverse(values(r, c), c);
  return out;
}

std::string_view split_name(Split s) {
  switch (s) {
  case Split::Train: return "train";
  case Split::Valid: return "valid";
  case Split::Test: return "test";
  case Split::All: return "all";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  const std::string s = lower(name);
  for (Split v : {Split::Train, Split::Valid, Split::Test, Split::All})
    if (split_name(v) == s)
      return v;
  throw ConfigError("unknown split '" + std::string(name) +
                    "' (expected train, valid, test or all)");
}

void DataConfig::validate() const {
  if (target_column.empty())
    throw ConfigError("target_column must be non-empty");
  if (window < 2)
    throw ConfigError("window_T must be at least 2, got " +
                      std::to_string(window));
  if (stride == 0)
    throw ConfigError("stride must be positive");
  split.validate();
}

Dataset::Dataset(RawSeries series, const DataConfig &config)
  : series_(difference(series, config.difference)), window_(config.window) {
  config.validate();
  if (series_.n_vars() < 1)
    throw ContractViolation("dataset has no columns");
  if (series_.length() < window_ + 1)
    throw ContractViolation("series of length " +
                            std::to_string(series_.length()) +
                            " is too short for window T=" +
                            std::to_string(window_));
  rows_ = split_rows(series_.length(), config.split);
  if (rows_.train_end == 0)
    throw ContractViolation("training split is empty");
  normalizer_ = Normalizer::fit(series_.values, rows_.train_end);
  normalized_ = normalizer_.transform(series_.values);
  train_ = window_ends(0, rows_.train_end, window_, config.stride);
  valid_ = window_ends(rows_.train_end, rows_.valid_end, window_,
                       config.stride);
  test_ = window_ends(rows_.valid_end, rows_.length, window_, config.stride);
  all_ = train_;
  all_.insert(all_.end(), valid_.begin(), valid_.end());
  all_.insert(all_.end(), test_.begin(), test_.end());
}

Dataset Dataset::load(const std::filesystem::path &path,
                      const DataConfig &config) {
  config.validate();
  return Dataset(load_csv(path, config.target_column, config.fill), config);
}

std::span<const std::size_t> Dataset::ends(Split s) const {
  switch (s) {
  case Split::Train: return train_;
  case Split::Valid: return valid_;
  case Split::Test: return test_;
  case Split::All: return all_;
  }
  return {};
}

Tensor Dataset::inputs(std::size_t end) const {
  if (end < window_ || end >= series_.length())
    throw ContractViolation("window end " + std::to_string(end) +
                            " out of range");
  const std::size_t n = n_vars();
  const auto src = normalized_.data().subspan((end - window_) * n, window_ * n);
  return Tensor({window_, n}, std::vector<double>(src.begin(), src.end()));
}

std::vector<Sample> Dataset::samples(Split s) const {
  std::vector<Sample> out;
  for (std::size_t end : ends(s))
    out.push_back(sample(end));
  return out;
}

double Dataset::target(std::size_t end) const {
  return normalized_(end, series_.target());
}

double Dataset::target_raw(std::size_t end) const {
  return series_.values(end, series_.target());
}

double Dataset::to_raw_target(double normalized) const {
  return normalizer_.inverse(normalized, series_.target());
}

} // namespace mvlstm
