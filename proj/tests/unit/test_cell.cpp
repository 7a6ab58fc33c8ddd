// SPDX-License-Identifier: Apache-2.0

#include "test_util.hpp"

#include <mvlstm/cell.hpp>
#include <mvlstm/error.hpp>

#include <gtest/gtest.h>

using namespace mvlstm;
using mvlstm::test::max_abs_diff;
using mvlstm::test::random_tensor;

namespace {

CellParams random_params(std::size_t n, std::size_t d, std::mt19937_64 &rng) {
  const std::size_t units = n * d;
  return {random_tensor({n, d, d}, rng, 0.5), random_tensor({n, d}, rng, 0.5),
          random_tensor({n, d}, rng, 0.5),
          random_tensor({3 * units, n + units}, rng, 0.3),
          random_tensor({3 * units}, rng, 0.3)};
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Direct scalar evaluation of one step.
struct Oracle {
  const CellParams &p;
  std::size_t n, d, units;

  explicit Oracle(const CellParams &params)
    : p(params), n(params.n_vars()), d(params.width()), units(n * d) {}

  Tensor j(const Tensor &h, const Tensor &x) const {
    Tensor out({n, d});
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t i = 0; i < d; ++i) {
        double s = p.wx(v, i) * x[v] + p.bj(v, i);
        for (std::size_t k = 0; k < d; ++k)
          s += p.wh(v, i, k) * h(v, k);
        out(v, i) = std::tanh(s);
      }
    return out;
  }

  Tensor gate(std::size_t which, const Tensor &h, const Tensor &x) const {
    Tensor out({units});
    for (std::size_t r = 0; r < units; ++r) {
      const std::size_t row = which * units + r;
      double s = p.bgate[row];
      for (std::size_t c = 0; c < n; ++c)
        s += p.wgate(row, c) * x[c];
      for (std::size_t c = 0; c < units; ++c)
        s += p.wgate(row, n + c) * h[c];
      out[r] = sig(s);
    }
    return out;
  }

  CellState step(const CellState &st, const Tensor &x) const {
    Tensor jj = j(st.h, x);
    Tensor i = gate(0, st.h, x), f = gate(1, st.h, x), o = gate(2, st.h, x);
    CellState out{Tensor({n, d}), Tensor({units})};
    for (std::size_t r = 0; r < units; ++r) {
      out.c[r] = f[r] * st.c[r] + i[r] * jj[r];
      out.h[r] = o[r] * std::tanh(out.c[r]);
    }
    return out;
  }
};

} // namespace

TEST(CellUpdate, ZeroParamsGiveZero) {
  CellParams p = CellParams::zeros(3, 2);
  std::mt19937_64 rng(1);
  Tensor j = cell_update_matrix(p, random_tensor({3, 2}, rng),
                                random_tensor({3}, rng));
  EXPECT_EQ(j, Tensor({3, 2}));
}

TEST(CellUpdate, IdentityBlocksGiveTanhOfState) {
  CellParams p = CellParams::zeros(2, 3);
  for (std::size_t v = 0; v < 2; ++v)
    for (std::size_t i = 0; i < 3; ++i)
      p.wh(v, i, i) = 1.0;
  std::mt19937_64 rng(2);
  Tensor h = random_tensor({2, 3}, rng, 0.01);
  EXPECT_LE(max_abs_diff(cell_update_matrix(p, h, Tensor({2}, 5.0)),
                         kernels::tanh(h)),
            1e-15);
}

TEST(CellUpdate, MatchesOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 5, d = 1 + rng() % 5;
    CellParams p = random_params(n, d, rng);
    Tensor h = random_tensor({n, d}, rng), x = random_tensor({n}, rng);
    EXPECT_LE(max_abs_diff(cell_update_matrix(p, h, x), Oracle(p).j(h, x)),
              1e-12);
  }
}

TEST(CellUpdate, RowDependsOnlyOnOwnVariable) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 4, d = 1 + rng() % 4;
    CellParams p = random_params(n, d, rng);
    Tensor h = random_tensor({n, d}, rng), x = random_tensor({n}, rng);
    const Tensor base = cell_update_matrix(p, h, x);
    const std::size_t m = rng() % n;
    Tensor h2 = h, x2 = x;
    for (std::size_t k = 0; k < d; ++k)
      h2(m, k) += 0.37 * (k + 1);
    x2[m] -= 1.3;
    const Tensor moved = cell_update_matrix(p, h2, x2);
    for (std::size_t v = 0; v < n; ++v) {
      bool same = true;
      for (std::size_t k = 0; k < d; ++k)
        same = same && moved(v, k) == base(v, k);
      if (v == m)
        EXPECT_FALSE(same);
      else
        EXPECT_TRUE(same) << "row " << v << " moved when variable " << m
                          << " changed";
    }
  }
}

TEST(Gates, ZeroParamsGiveHalf) {
  CellParams p = CellParams::zeros(2, 2);
  std::mt19937_64 rng(5);
  Gates g = gates(p, random_tensor({2, 2}, rng), random_tensor({2}, rng));
  for (const Tensor *t : {&g.input, &g.forget, &g.output})
    EXPECT_EQ(*t, Tensor({4}, 0.5));
}

TEST(Gates, SaturatedBiasGivesOne) {
  CellParams p = CellParams::zeros(2, 2);
  for (double &b : p.bgate.data())
    b = 1000.0;
  Gates g = gates(p, Tensor({2, 2}, 0.3), Tensor({2}, -0.2));
  for (double v : g.input.data())
    EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Gates, MatchesOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 4, d = 1 + rng() % 4;
    CellParams p = random_params(n, d, rng);
    Tensor h = random_tensor({n, d}, rng), x = random_tensor({n}, rng);
    Gates g = gates(p, h, x);
    Oracle o(p);
    EXPECT_LE(max_abs_diff(g.input, o.gate(0, h, x)), 1e-12);
    EXPECT_LE(max_abs_diff(g.forget, o.gate(1, h, x)), 1e-12);
    EXPECT_LE(max_abs_diff(g.output, o.gate(2, h, x)), 1e-12);
  }
}

TEST(Step, PureMemoryKeepsCell) {
  std::mt19937_64 rng(7);
  CellParams p = random_params(2, 3, rng);
  for (double &w : p.wgate.data())
    w = 0.0;
  const std::size_t units = 6;
  for (std::size_t r = 0; r < units; ++r) {
    p.bgate[r] = -1000.0;            // input gate closed
    p.bgate[units + r] = 1000.0;     // forget gate open
    p.bgate[2 * units + r] = 1000.0; // output gate open
  }
  CellState st{random_tensor({2, 3}, rng, 0.5), random_tensor({6}, rng)};
  CellState next = step(p, st, random_tensor({2}, rng));
  EXPECT_LE(max_abs_diff(next.c, st.c), 1e-12);
}

TEST(Step, OpenGatesPassCandidate) {
  std::mt19937_64 rng(8);
  CellParams p = random_params(2, 3, rng);
  for (double &w : p.wgate.data())
    w = 0.0;
  const std::size_t units = 6;
  for (std::size_t r = 0; r < units; ++r) {
    p.bgate[r] = 1000.0;
    p.bgate[units + r] = -1000.0;
    p.bgate[2 * units + r] = 1000.0;
  }
  CellState st{random_tensor({2, 3}, rng, 0.5), random_tensor({6}, rng)};
  Tensor x = random_tensor({2}, rng);
  CellState next = step(p, st, x);
  Tensor expect = kernels::tanh(cell_update_matrix(p, st.h, x));
  EXPECT_LE(max_abs_diff(next.h, expect), 1e-12);
}

TEST(Step, MatchesOracleAndStaysBounded) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng() % 4, d = 1 + rng() % 4;
    CellParams p = random_params(n, d, rng);
    CellState st = CellState::zeros(n, d);
    CellState ref = st;
    for (int t = 0; t < 6; ++t) {
      Tensor x = random_tensor({n}, rng, 2.0);
      CellState next = step(p, st, x);
      ref = Oracle(p).step(ref, x);
      EXPECT_LE(max_abs_diff(next.h, ref.h), 1e-12);
      EXPECT_LE(max_abs_diff(next.c, ref.c), 1e-12);
      for (std::size_t r = 0; r < n * d; ++r) {
        EXPECT_LT(std::abs(next.h[r]), 1.0);
        EXPECT_LE(std::abs(next.c[r]), std::abs(st.c[r]) + 1.0);
      }
      st = next;
    }
  }
}

TEST(Unroll, ZeroParamsStayAtZero) {
  CellParams p = CellParams::zeros(3, 2);
  std::mt19937_64 rng(10);
  UnrollOutput u = unroll(p, random_tensor({2, 3}, rng));
  EXPECT_EQ(u.history, Tensor({2, 3, 2}));
  u = unroll(p, random_tensor({7, 3}, rng));
  EXPECT_EQ(u.final.c, Tensor({6}));
}

TEST(Unroll, ShortSequenceRejected) {
  EXPECT_THROW(unroll(CellParams::zeros(2, 2), Tensor({1, 2})),
               ContractViolation);
}

TEST(Unroll, HistoryMatchesSteps) {
  std::mt19937_64 rng(11);
  CellParams p = random_params(3, 2, rng);
  Tensor xs = random_tensor({5, 3}, rng);
  UnrollOutput u = unroll(p, xs);
  CellState st = CellState::zeros(3, 2);
  for (std::size_t t = 0; t < 5; ++t) {
    Tensor x({3});
    for (std::size_t v = 0; v < 3; ++v)
      x[v] = xs(t, v);
    st = step(p, st, x);
    for (std::size_t v = 0; v < 3; ++v)
      for (std::size_t k = 0; k < 2; ++k)
        EXPECT_EQ(u.history(t, v, k), st.h(v, k));
  }
  EXPECT_EQ(u.final.h, st.h);
}

TEST(Unroll, SingleVariableIsPlainLstm) {
  std::mt19937_64 rng(12);
  const std::size_t d = 4;
  CellParams p = random_params(1, d, rng);
  Tensor xs = random_tensor({6, 1}, rng);
  // Plain d-unit LSTM with scalar input: candidate row i uses
  // U[i,:] = Wh[0,i,:], w[i] = Wx[0,i], b[i] = bj[0,i].
  std::vector<double> h(d, 0.0), c(d, 0.0);
  for (std::size_t t = 0; t < 6; ++t) {
    const double x = xs(t, 0);
    std::vector<double> nh(d), nc(d);
    for (std::size_t i = 0; i < d; ++i) {
      auto pre = [&](std::size_t gate) {
        const std::size_t row = gate * d + i;
        double s = p.bgate[row] + p.wgate(row, 0) * x;
        for (std::size_t k = 0; k < d; ++k)
          s += p.wgate(row, 1 + k) * h[k];
        return s;
      };
      double g = p.bj(0, i) + p.wx(0, i) * x;
      for (std::size_t k = 0; k < d; ++k)
        g += p.wh(0, i, k) * h[k];
      nc[i] = sig(pre(1)) * c[i] + sig(pre(0)) * std::tanh(g);
      nh[i] = sig(pre(2)) * std::tanh(nc[i]);
    }
    h = nh;
    c = nc;
  }
  UnrollOutput u = unroll(p, xs);
  for (std::size_t i = 0; i < d; ++i)
    EXPECT_NEAR(u.final.h[i], h[i], 1e-12);
}

TEST(Unroll, FrozenGatesIsolateContentPath) {
  std::mt19937_64 rng(13);
  const std::size_t n = 3, d = 2;
  CellParams p = random_params(n, d, rng);
  for (double &w : p.wgate.data())
    w = 0.0; // gates become constants set by the bias
  Tensor xs = random_tensor({6, n}, rng);
  Tensor shuffled = xs;
  const std::size_t m = 1;
  for (std::size_t t = 0; t < 6; ++t)
    shuffled(t, m) = xs(5 - t, m);
  auto js = [&](const Tensor &in) {
    std::vector<Tensor> out;
    CellState st = CellState::zeros(n, d);
    for (std::size_t t = 0; t < 6; ++t) {
      Tensor x({n});
      for (std::size_t v = 0; v < n; ++v)
        x[v] = in(t, v);
      out.push_back(cell_update_matrix(p, st.h, x));
      st = step(p, st, x);
    }
    return out;
  };
  const auto a = js(xs), b = js(shuffled);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t v = 0; v < n; ++v)
      if (v != m)
        for (std::size_t k = 0; k < d; ++k)
          EXPECT_EQ(a[t](v, k), b[t](v, k));
}

TEST(CellParams, InitializationLayout) {
  std::mt19937_64 rng(14);
  CellParams p = CellParams::initialize(3, 4, rng);
  const std::size_t units = 12;
  for (std::size_t r = 0; r < 3 * units; ++r)
    EXPECT_EQ(p.bgate[r], (r >= units && r < 2 * units) ? 1.0 : 0.0);
  const double limit = std::sqrt(6.0 / (4 + 4));
  for (double w : p.wh.data())
    EXPECT_LE(std::abs(w), limit);
  EXPECT_THROW((CellParams{Tensor({2, 3, 3}), Tensor({2, 3}), Tensor({2, 3}),
                            Tensor({18, 8}), Tensor({17})})
                 .validate(),
               DimensionError);
}
