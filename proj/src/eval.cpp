// SPDX-License-Identifier: Apache-2.0

#include "parallel.hpp"

#include <mvlstm/error.hpp>
#include <mvlstm/eval.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace mvlstm {

namespace {

void check_pair(std::span<const double> y, std::span<const double> yhat) {
  if (y.empty())
    throw ContractViolation("metrics need at least one value");
  if (y.size() != yhat.size())
    throw DimensionError("metrics: " + std::to_string(y.size()) +
                         " targets vs " + std::to_string(yhat.size()) +
                         " predictions");
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

} // namespace

double rmse(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return std::sqrt(s / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

std::vector<double> predict_samples(const Model &model,
                                    std::span<const Sample> samples,
                                    std::size_t threads) {
  std::vector<double> out(samples.size());
  detail::parallel_for(samples.size(), threads, [&](std::size_t i) {
    out[i] = evaluate_sequence(model, samples[i].xs, samples[i].y).yhat;
  });
  return out;
}

Forecasts forecast(const Model &model, const Dataset &data, Split split,
                   std::size_t threads) {
  const auto ends = data.ends(split);
  if (ends.empty())
    throw ContractViolation("split '" + std::string(split_name(split)) +
                            "' has no windows");
  std::vector<Sample> samples;
  for (std::size_t e : ends)
    samples.push_back(data.sample(e));
  const auto pred = predict_samples(model, samples, threads);
  Forecasts f;
  f.ends.assign(ends.begin(), ends.end());
  for (std::size_t i = 0; i < ends.size(); ++i) {
    f.y.push_back(data.target_raw(ends[i]));
    f.yhat.push_back(data.to_raw_target(pred[i]));
  }
  return f;
}

Metrics metrics_of(const Forecasts &f) {
  return {rmse(f.y, f.yhat), mae(f.y, f.yhat), f.y.size()};
}

Metrics evaluate(const Model &model, const Dataset &data, Split split,
                 std::size_t threads) {
  return metrics_of(forecast(model, data, split, threads));
}

std::vector<AttentionRecord> collect_attention(const Model &model,
                                               std::span<const Sample> samples,
                                               std::size_t threads) {
  if (!has_mixture(model.variant()))
    throw ContractViolation("attention needs a mixture variant, model is " +
                            std::string(variant_name(model.variant())));
  std::vector<AttentionRecord> out(samples.size());
  detail::parallel_for(samples.size(), threads, [&](std::size_t i) {
    auto r = evaluate_sequence(model, samples[i].xs, samples[i].y);
    out[i] = {std::move(r.mixture->prior), std::move(r.mixture->posterior)};
  });
  return out;
}

std::vector<AttentionRecord> collect_attention(const Model &model,
                                               const Dataset &data, Split split,
                                               std::size_t threads) {
  return collect_attention(model, data.samples(split), threads);
}

Tensor importance(std::span<const Tensor> posteriors) {
  if (posteriors.empty())
    throw ContractViolation("importance needs at least one posterior");
  const Shape shape = posteriors.front().shape();
  if (shape.rank() != 1)
    throw DimensionError("posteriors must be [N], got " + shape.str());
  const std::size_t n = shape[0];
  std::vector<double> num(n, 0.0);
  for (const Tensor &p : posteriors) {
    if (!(p.shape() == shape))
      throw DimensionError("posterior shapes differ: " + shape.str() +
                           " vs " + p.shape().str());
    for (std::size_t k = 0; k < n; ++k)
      num[k] += p[k];
  }
  double den = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    for (const Tensor &p : posteriors)
      den += p[k];
  Tensor out(shape);
  for (std::size_t k = 0; k < n; ++k)
    out[k] = num[k] / den;
  return out;
}

Tensor importance(std::span<const AttentionRecord> records) {
  std::vector<Tensor> posts;
  posts.reserve(records.size());
  for (const auto &r : records)
    posts.push_back(r.posterior);
  return importance(std::span<const Tensor>(posts));
}

std::vector<std::size_t> rank_variables(const Tensor &importance) {
  std::vector<std::size_t> idx(importance.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return importance[a] > importance[b];
  });
  return idx;
}

std::size_t histogram_bin(double v, std::size_t bins) {
  if (bins < 2)
    throw ContractViolation("histograms need at least 2 bins, got " +
                            std::to_string(bins));
  if (!(v > 0.0))
    return 0;
  const double scaled = std::floor(v * static_cast<double>(bins));
  return std::min(static_cast<std::size_t>(scaled), bins - 1);
}

Histogram histogram(std::span<const double> values, std::size_t bins) {
  Histogram h{bins, std::vector<std::size_t>(bins, 0)};
  for (double v : values)
    ++h.counts[histogram_bin(v, bins)];
  return h;
}

ImportanceReport build_report(std::vector<std::string> names,
                              std::span<const AttentionRecord> records,
                              std::size_t bins, std::string split,
                              std::string checkpoint_checksum) {
  if (bins < 2)
    throw ContractViolation("histograms need at least 2 bins, got " +
                            std::to_string(bins));
  ImportanceReport r;
  r.importance = importance(records);
  if (names.size() != r.importance.size())
    throw DimensionError("report: " + std::to_string(names.size()) +
                         " names for " + std::to_string(r.importance.size()) +
                         " variables");
  r.names = std::move(names);
  r.ranking = rank_variables(r.importance);
  r.split = std::move(split);
  r.n_sequences = records.size();
  r.checkpoint_checksum = std::move(checkpoint_checksum);
  std::vector<double> prior(records.size()), post(records.size());
  for (std::size_t n = 0; n < r.names.size(); ++n) {
    for (std::size_t m = 0; m < records.size(); ++m) {
      prior[m] = records[m].prior[n];
      post[m] = records[m].posterior[n];
    }
    r.prior.push_back(histogram(prior, bins));
    r.posterior.push_back(histogram(post, bins));
  }
  return r;
}

nlohmann::ordered_json ImportanceReport::to_json() const {
  using nlohmann::ordered_json;
  ordered_json ranked = ordered_json::array();
  for (std::size_t i = 0; i < ranking.size(); ++i)
    ranked.push_back({{"rank", i + 1},
                      {"index", ranking[i]},
                      {"variable", names[ranking[i]]},
                      {"importance", importance[ranking[i]]}});
  ordered_json hist = ordered_json::array();
  for (std::size_t n = 0; n < names.size(); ++n)
    hist.push_back({{"variable", names[n]},
                    {"prior", prior[n].counts},
                    {"posterior", posterior[n].counts}});
  const std::size_t bins = prior.empty() ? 0 : prior.front().bins;
  std::vector<double> edges;
  for (std::size_t b = 0; b <= bins; ++b)
    edges.push_back(double(b) / double(bins));
  return {{"split", split},
          {"n_sequences", n_sequences},
          {"variables", names},
          {"importance", importance.values()},
          {"ranking", ranked},
          {"histograms", {{"bins", bins}, {"edges", edges}, {"counts", hist}}},
          {"checkpoint_fnv1a64", checkpoint_checksum}};
}

std::string ImportanceReport::histograms_csv() const {
  std::string out = "variable,kind,bin_lo,bin_hi,count\n";
  auto emit = [&](const std::string &name, const char *kind,
                  const Histogram &h) {
    for (std::size_t b = 0; b < h.bins; ++b)
      out += name + "," + kind + "," + format_double(h.lo(b)) + "," +
             format_double(h.hi(b)) + "," + std::to_string(h.counts[b]) + "\n";
  };
  for (std::size_t n = 0; n < names.size(); ++n) {
    emit(names[n], "prior", prior[n]);
    emit(names[n], "posterior", posterior[n]);
  }
  return out;
}

std::string fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace mvlstm
