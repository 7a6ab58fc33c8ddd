// SPDX-License-Identifier: Apache-2.0

#include "test_util.hpp"

#include <mvlstm/error.hpp>
#include <mvlstm/eval.hpp>

#include <gtest/gtest.h>

using namespace mvlstm;
using mvlstm::test::random_tensor;

namespace {

Tensor random_simplex(std::size_t n, std::mt19937_64 &rng) {
  std::exponential_distribution<double> e;
  Tensor t({n});
  double s = 0.0;
  for (double &v : t.data())
    s += (v = e(rng));
  for (double &v : t.data())
    v /= s;
  return t;
}

double sum(const Tensor &t) {
  double s = 0.0;
  for (double v : t.data())
    s += v;
  return s;
}

std::vector<Sample> random_samples(std::size_t count, std::size_t t,
                                   std::size_t n, std::mt19937_64 &rng) {
  std::vector<Sample> out;
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < count; ++i)
    out.push_back({random_tensor({t, n}, rng), normal(rng)});
  return out;
}

} // namespace

TEST(Metrics, Examples) {
  std::vector<double> y{0.0, 0.0}, yhat{1.0, -1.0};
  EXPECT_EQ(rmse(y, yhat), 1.0);
  EXPECT_EQ(mae(y, yhat), 1.0);
  EXPECT_EQ(rmse(yhat, yhat), 0.0);
  EXPECT_EQ(mae(yhat, yhat), 0.0);
  EXPECT_THROW(rmse({}, {}), ContractViolation);
  EXPECT_THROW(mae(std::vector<double>{1.0}, std::vector<double>{}),
               DimensionError);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(1 + rng() % 20), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = normal(rng);
      b[i] = normal(rng);
    }
    EXPECT_GE(rmse(a, b), mae(a, b) - 1e-15);
  }
}

TEST(Importance, Examples) {
  std::vector<Tensor> p{Tensor::vector({0.6, 0.4}),
                        Tensor::vector({0.2, 0.8})};
  Tensor imp = importance(p);
  EXPECT_NEAR(imp[0], 0.4, 1e-15);
  EXPECT_NEAR(imp[1], 0.6, 1e-15);
  std::vector<Tensor> same(5, Tensor::vector({0.1, 0.7, 0.2}));
  Tensor s = importance(same);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_NEAR(s[i], same[0][i], 1e-15);
  EXPECT_THROW(importance(std::span<const Tensor>{}), ContractViolation);
}

TEST(Importance, IsMeanPosteriorAndSumsToOne) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 8, m = 1 + rng() % 30;
    std::vector<Tensor> p;
    for (std::size_t i = 0; i < m; ++i)
      p.push_back(random_simplex(n, rng));
    Tensor imp = importance(p);
    EXPECT_NEAR(sum(imp), 1.0, 1e-9);
    for (std::size_t v = 0; v < n; ++v) {
      double mean = 0.0;
      for (const Tensor &t : p)
        mean += t[v];
      EXPECT_NEAR(imp[v], mean / static_cast<double>(m), 1e-12);
    }
  }
}

TEST(Ranking, DescendingWithIndexTieBreak) {
  EXPECT_EQ(rank_variables(Tensor::vector({0.2, 0.5, 0.2, 0.1})),
            (std::vector<std::size_t>{1, 0, 2, 3}));
}

TEST(Histogram, Bins) {
  EXPECT_EQ(histogram_bin(0.0, 50), 0u);
  EXPECT_EQ(histogram_bin(1.0, 50), 49u);
  EXPECT_EQ(histogram_bin(0.5, 4), 2u);
  // 1/11 * 50 = 4.545... -> bin 4, i.e. [0.08, 0.10).
  EXPECT_EQ(histogram_bin(1.0 / 11.0, 50), 4u);
  EXPECT_THROW(histogram_bin(0.5, 1), ContractViolation);
  std::vector<double> v{0.1, 0.1, 0.9, 0.3};
  Histogram h = histogram(v, 10);
  std::size_t total = 0;
  for (std::size_t c : h.counts)
    total += c;
  EXPECT_EQ(total, 4u);
  EXPECT_EQ(h.counts[1], 2u);
  EXPECT_DOUBLE_EQ(h.lo(9), 0.9);
  EXPECT_DOUBLE_EQ(h.hi(9), 1.0);
}

TEST(Attention, UniformPriorWithZeroVariableWeights) {
  std::mt19937_64 rng(3);
  Model m = Model::initialize(Variant::MvLstm, {4, 2}, rng);
  m.params().get("head.Wv") = Tensor({4});
  auto recs = collect_attention(m, random_samples(6, 3, 4, rng));
  for (const auto &r : recs)
    for (double v : r.prior.data())
      EXPECT_NEAR(v, 0.25, 1e-15);
  ImportanceReport rep =
    build_report({"a", "b", "c", "y"}, recs, 50, "test", "0");
  for (const Histogram &h : rep.prior) {
    EXPECT_EQ(h.counts[histogram_bin(0.25, 50)], 6u);
  }
}

TEST(Attention, PosteriorMatchesScalarOracle) {
  std::mt19937_64 rng(4);
  Model m = Model::initialize(Variant::MvLstm, {3, 2}, rng);
  auto samples = random_samples(2, 4, 3, rng);
  auto recs = collect_attention(m, samples);
  ASSERT_EQ(recs.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    SequenceResult r = evaluate_sequence(m, samples[i].xs, samples[i].y);
    double den = 0.0;
    std::vector<double> joint(3);
    for (std::size_t v = 0; v < 3; ++v) {
      const double e = samples[i].y - r.mixture->mu[v];
      den += joint[v] = r.mixture->prior[v] * std::exp(-0.5 * e * e);
    }
    for (std::size_t v = 0; v < 3; ++v)
      EXPECT_NEAR(recs[i].posterior[v], joint[v] / den, 1e-12);
    EXPECT_NEAR(sum(recs[i].prior), 1.0, 1e-9);
    EXPECT_NEAR(sum(recs[i].posterior), 1.0, 1e-9);
  }
}

TEST(Attention, MatchingComponentGainsPosterior) {
  std::mt19937_64 rng(5);
  Model m = Model::initialize(Variant::MvLstm, {3, 2}, rng);
  auto s = random_samples(1, 4, 3, rng);
  SequenceResult r = evaluate_sequence(m, s[0].xs, s[0].y);
  for (std::size_t v = 0; v < 3; ++v) {
    Sample hit{s[0].xs, r.mixture->mu[v]};
    auto rec = collect_attention(m, std::span(&hit, 1));
    EXPECT_GE(rec[0].posterior[v], rec[0].prior[v]);
  }
}

TEST(Attention, ParallelMatchesSerial) {
  std::mt19937_64 rng(6);
  Model m = Model::initialize(Variant::MvIndep, {3, 2}, rng);
  auto s = random_samples(17, 4, 3, rng);
  auto a = collect_attention(m, s, 1), b = collect_attention(m, s, 4);
  for (std::size_t i = 0; i < s.size(); ++i)
    EXPECT_EQ(a[i].posterior, b[i].posterior);
  EXPECT_EQ(predict_samples(m, s, 1), predict_samples(m, s, 3));
  Model f = Model::initialize(Variant::Vanilla, {3, 2}, rng);
  EXPECT_THROW(collect_attention(f, s), ContractViolation);
}

TEST(Report, JsonAndCsv) {
  std::vector<AttentionRecord> recs{
    {Tensor::vector({0.5, 0.5}), Tensor::vector({0.6, 0.4})}};
  ImportanceReport r = build_report({"x0", "y"}, recs, 2, "test", "abc");
  auto j = r.to_json();
  EXPECT_EQ(j["split"], "test");
  EXPECT_EQ(j["n_sequences"], 1);
  EXPECT_EQ(j["ranking"][0]["variable"], "x0");
  EXPECT_EQ(j["checkpoint_fnv1a64"], "abc");
  const std::string csv = r.histograms_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "variable,kind,bin_lo,bin_hi,count");
  // one line per variable x kind x bin
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2 * 2);
  for (const auto *hs : {&r.prior, &r.posterior})
    for (const Histogram &h : *hs) {
      std::size_t nz = 0;
      for (std::size_t c : h.counts)
        nz += c != 0;
      EXPECT_EQ(nz, 1u);
    }
}

TEST(Checksum, Fnv1a) {
  EXPECT_EQ(fnv1a64(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a64("a"), "af63dc4c8601ec8c");
}
