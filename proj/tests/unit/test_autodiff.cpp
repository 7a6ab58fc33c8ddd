// SPDX-License-Identifier: Apache-2.0

#include "test_util.hpp"

#include <mvlstm/autodiff.hpp>
#include <mvlstm/error.hpp>

#include <gtest/gtest.h>

#include <functional>

using namespace mvlstm;
using mvlstm::test::draw;
using mvlstm::test::random_tensor;

namespace {

// Entries with magnitude in [0.5, inf) and random sign, so that no gradient
// entry sits near zero where central differences lose relative accuracy.
Tensor away(const Shape &s, std::mt19937_64 &rng) {
  Tensor t = random_tensor(s, rng);
  std::bernoulli_distribution flip;
  for (double &v : t.data())
    v = (flip(rng) ? -1.0 : 1.0) * (0.5 + std::abs(v));
  return t;
}

// Contracts an op's output with fixed random weights so every output entry
// contributes a distinct amount to the scalar loss.
ad::Var weigh(ad::Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor w = away(out.shape(), rng);
  return ad::sum(ad::mul(out, out.tape()->constant(w)));
}

struct OpCase {
  const char *name;
  std::function<std::vector<Tensor>(std::mt19937_64 &)> inputs;
  std::function<ad::Var(std::span<const ad::Var>)> op;
};

Tensor positive(const Shape &s, std::mt19937_64 &rng) {
  Tensor t = random_tensor(s, rng);
  for (double &v : t.data())
    v = 0.5 + std::abs(v);
  return t;
}

std::vector<OpCase> op_cases() {
  auto dims = [](std::mt19937_64 &rng) {
    return std::array<std::size_t, 3>{draw(rng, 1, 5), draw(rng, 1, 5),
                                      draw(rng, 1, 5)};
  };
  return {
    {"add",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0], d[1]}, r),
                          away({d[0], d[1]}, r)};
     },
     [](auto v) { return ad::add(v[0], v[1]); }},
    {"sub",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0]}, r), away({d[0]}, r)};
     },
     [](auto v) { return ad::sub(v[0], v[1]); }},
    {"mul",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0], d[1], d[2]}, r),
                          away({d[0], d[1], d[2]}, r)};
     },
     [](auto v) { return ad::mul(v[0], v[1]); }},
    {"scale",
     [=](auto &r) { return std::vector{away({dims(r)[0]}, r)}; },
     [](auto v) { return ad::scale(v[0], -1.7); }},
    {"add_row_bias",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0], d[1]}, r),
                          away({d[0]}, r)};
     },
     [](auto v) { return ad::add_row_bias(v[0], v[1]); }},
    {"add_scalar",
     [=](auto &r) {
       return std::vector{away({dims(r)[0], 2}, r),
                          away({1}, r)};
     },
     [](auto v) { return ad::add_scalar(v[0], v[1]); }},
    {"tanh", [=](auto &r) { return std::vector{away({dims(r)[0]}, r)}; },
     [](auto v) { return ad::tanh(v[0]); }},
    {"sigmoid",
     [=](auto &r) { return std::vector{away({dims(r)[0], 3}, r)}; },
     [](auto v) { return ad::sigmoid(v[0]); }},
    {"exp", [=](auto &r) { return std::vector{away({dims(r)[0]}, r)}; },
     [](auto v) { return ad::exp(v[0]); }},
    {"log", [=](auto &r) { return std::vector{positive({dims(r)[0]}, r)}; },
     [](auto v) { return ad::log(v[0]); }},
    {"square",
     [=](auto &r) { return std::vector{away({dims(r)[0]}, r)}; },
     [](auto v) { return ad::square(v[0]); }},
    {"matvec",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0], d[1]}, r),
                          away({d[1]}, r)};
     },
     [](auto v) { return ad::matvec(v[0], v[1]); }},
    {"vecmat",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0]}, r),
                          away({d[0], d[1]}, r)};
     },
     [](auto v) { return ad::vecmat(v[0], v[1]); }},
    {"row_dot",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0], d[1]}, r),
                          away({d[0], d[1]}, r)};
     },
     [](auto v) { return ad::row_dot(v[0], v[1]); }},
    {"tensordot_axis_n",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0], d[1], d[1]}, r),
                          away({d[0], d[1]}, r)};
     },
     [](auto v) { return ad::tensordot_axis_n(v[0], v[1]); }},
    {"tensordot_seq",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0], d[1]}, r),
                          away({d[1], d[0], d[2]}, r)};
     },
     [](auto v) { return ad::tensordot_seq(v[0], v[1]); }},
    {"seq_scores",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[1], d[0], d[2]}, r),
                          away({d[0], d[2]}, r)};
     },
     [](auto v) { return ad::seq_scores(v[0], v[1]); }},
    {"var_product",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0], d[1]}, r),
                          away({d[0]}, r)};
     },
     [](auto v) { return ad::var_product(v[0], v[1]); }},
    {"softmax_rows",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0], d[1]}, r)};
     },
     [](auto v) { return ad::softmax_rows(v[0]); }},
    {"logsumexp",
     [=](auto &r) { return std::vector{away({dims(r)[0], 2}, r)}; },
     [](auto v) { return ad::logsumexp(v[0]); }},
    {"sum", [=](auto &r) { return std::vector{away({dims(r)[0]}, r)}; },
     [](auto v) { return ad::sum(v[0]); }},
    {"concat_axis1",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0], d[1]}, r),
                          away({d[0], d[2]}, r)};
     },
     [](auto v) { return ad::concat(v, 1); }},
    {"concat_axis0",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0], d[2]}, r),
                          away({d[1], d[2]}, r)};
     },
     [](auto v) { return ad::concat(v, 0); }},
    {"slice",
     [=](auto &r) { return std::vector{away({5, dims(r)[1]}, r)}; },
     [](auto v) { return ad::slice(v[0], 1, 4); }},
    {"reshape",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0], d[1]}, r)};
     },
     [](auto v) {
       const Shape s = v[0].shape();
       return ad::reshape(v[0], {s[1], s[0]});
     }},
    {"vec",
     [=](auto &r) {
       auto d = dims(r);
       return std::vector{away({d[0], d[1]}, r)};
     },
     [](auto v) { return ad::vec(v[0]); }},
    {"matricize",
     [=](auto &r) { return std::vector{away({6}, r)}; },
     [](auto v) { return ad::matricize(v[0], 2, 3); }},
  };
}

} // namespace

TEST(Record, TanhOfZeroIsZero) {
  ad::Tape tape;
  ad::Var x = tape.variable(Tensor({1}, 0.0));
  EXPECT_EQ(ad::tanh(x).value()[0], 0.0);
}

TEST(Backward, AddSelfGivesTwo) {
  ad::Tape tape;
  ad::Var x = tape.variable(Tensor({1}, 0.7));
  ad::Var y = ad::add(x, x);
  tape.backward(y);
  EXPECT_EQ(tape.grad(x)[0], 2.0);
}

TEST(Backward, IdentityAndTanhAtZero) {
  ad::Tape tape;
  ad::Var x = tape.variable(Tensor({1}, 4.0));
  tape.backward(x);
  EXPECT_EQ(tape.grad(x)[0], 1.0);

  ad::Tape t2;
  ad::Var v = t2.variable(Tensor({4}, 0.0));
  t2.backward(ad::sum(ad::tanh(v)));
  EXPECT_EQ(t2.grad(v), Tensor({4}, 1.0));
}

TEST(Backward, ChainMatchesDirectForward) {
  std::mt19937_64 rng(3);
  Tensor a = random_tensor({4}, rng);
  ad::Tape tape;
  ad::Var x = tape.variable(a);
  ad::Var y = ad::sum(ad::square(ad::tanh(x)));
  double direct = 0.0;
  for (double v : a.data())
    direct += std::tanh(v) * std::tanh(v);
  EXPECT_NEAR(y.value()[0], direct, 1e-14);
}

TEST(Backward, NonScalarLossRejected) {
  ad::Tape tape;
  ad::Var x = tape.variable(Tensor({3}, 1.0));
  EXPECT_THROW(tape.backward(x), ContractViolation);
}

TEST(Backward, ConstantsGetNoGradient) {
  ad::Tape tape;
  ad::Var c = tape.constant(Tensor({2}, 1.0));
  ad::Var x = tape.variable(Tensor({2}, 3.0));
  tape.backward(ad::sum(ad::mul(c, x)));
  EXPECT_FALSE(tape.requires_grad(c));
  EXPECT_EQ(tape.grad(x), Tensor({2}, 1.0));
}

TEST(Backward, VisitsNodesInDecreasingIdOrder) {
  ad::Tape tape;
  ad::Var x = tape.variable(Tensor({1}, 1.0));
  ad::Var y = ad::exp(x);
  ad::Var z = ad::add(y, x);
  for (ad::Var v : {y, z})
    for (auto in : tape.inputs(v))
      EXPECT_LT(in, v.id());
}

TEST(Backward, DeterministicAndLinear) {
  std::mt19937_64 rng(4);
  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4}, rng);
  auto grad_of = [&](int which) {
    ad::Tape tape;
    ad::Var x = tape.variable(a);
    ad::Var l1 = ad::sum(ad::tanh(ad::matvec(x, tape.constant(b))));
    ad::Var l2 = ad::logsumexp(x);
    ad::Var loss = which == 0 ? l1 : which == 1 ? l2 : ad::add(l1, l2);
    tape.backward(loss);
    return tape.grad(x);
  };
  EXPECT_EQ(grad_of(0), grad_of(0));
  Tensor sum = kernels::add(grad_of(0), grad_of(1));
  EXPECT_LE(mvlstm::test::max_abs_diff(sum, grad_of(2)), 1e-15);
}

TEST(Gradcheck, QuadraticIsExact) {
  auto f = [](ad::Tape &, std::span<const ad::Var> p) {
    return ad::sum(ad::square(p[0]));
  };
  const auto r = ad::gradcheck(f, {Tensor({1}, 3.0)});
  EXPECT_LE(r.max_rel_error, 1e-9);
}

TEST(Gradcheck, SoftmaxToy) {
  std::mt19937_64 rng(5);
  auto f = [](ad::Tape &, std::span<const ad::Var> p) {
    return weigh(ad::softmax_rows(p[0]), 99);
  };
  EXPECT_LE(ad::gradcheck(f, {random_tensor({3, 4}, rng)}).max_rel_error,
            1e-6);
}

TEST(Gradcheck, CorruptionIsDetected) {
  auto f = [](ad::Tape &, std::span<const ad::Var> p) {
    return ad::sum(ad::square(p[0]));
  };
  ad::GradcheckOptions opts;
  opts.corrupt = 0.5;
  EXPECT_GT(ad::gradcheck(f, {Tensor({1}, 3.0)}, opts).max_rel_error, 1e-2);
}

TEST(Gradcheck, FourLayerComposite) {
  std::mt19937_64 rng(6);
  auto f = [](ad::Tape &tape, std::span<const ad::Var> p) {
    ad::Var h1 = ad::tanh(ad::add(ad::matvec(p[0], p[1]), p[2]));
    ad::Var h2 = ad::sigmoid(ad::matvec(p[3], h1));
    ad::Var h3 = ad::softmax_rows(ad::reshape(ad::scale(h2, 6.0), {2, 3}));
    Tensor w({2, 3}, {1.0, -1.0, 0.5, -0.5, 1.0, -1.0});
    return ad::sum(ad::mul(h3, tape.constant(w)));
  };
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Tensor> params{random_tensor({4, 5}, rng, 0.4),
                               random_tensor({5}, rng), random_tensor({4}, rng),
                               random_tensor({6, 4}, rng, 0.4)};
    EXPECT_LE(ad::gradcheck(f, params).max_rel_error, 1e-6);
  }
}

TEST(Gradcheck, EveryOpRandomized) {
  std::mt19937_64 rng(7);
  for (const auto &c : op_cases()) {
    for (int trial = 0; trial < 10; ++trial) {
      auto inputs = c.inputs(rng);
      const std::uint64_t wseed = rng();
      auto f = [&](ad::Tape &, std::span<const ad::Var> p) {
        ad::Var out = c.op(p);
        return out.shape().numel() == 1 && out.shape().rank() == 1
                 ? out
                 : weigh(out, wseed);
      };
      const auto r = ad::gradcheck(f, inputs);
      EXPECT_LE(r.max_rel_error, 1e-6)
        << c.name << " trial " << trial << " param " << r.param_index
        << " element " << r.element << " analytic " << r.analytic
        << " numeric " << r.numeric;
    }
  }
}
