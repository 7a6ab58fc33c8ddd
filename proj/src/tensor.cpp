// SPDX-License-Identifier: Apache-2.0
/**
 * @file   tensor.cpp
 * @brief  Dense tensor storage and kernels.
 */

#include <mvlstm/error.hpp>
#include <mvlstm/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace mvlstm {

Shape::Shape(std::initializer_list<std::size_t> extents)
  : Shape(std::span<const std::size_t>(extents.begin(), extents.size())) {}

Shape::Shape(std::span<const std::size_t> extents) {
  if (extents.empty() || extents.size() > kMaxRank)
    throw DimensionError("tensor rank must be 1-3, got " +
                         std::to_string(extents.size()));
  for (std::size_t i = 0; i < extents.size(); ++i) {
    if (extents[i] == 0)
      throw DimensionError("tensor extents must be positive");
    extents_[i] = extents[i];
  }
  rank_ = extents.size();
}

std::size_t Shape::numel() const {
  if (rank_ == 0)
    return 0;
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank_; ++i)
    n *= extents_[i];
  return n;
}

bool Shape::operator==(const Shape &other) const {
  if (rank_ != other.rank_)
    return false;
  for (std::size_t i = 0; i < rank_; ++i)
    if (extents_[i] != other.extents_[i])
      return false;
  return true;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < rank_; ++i)
    os << (i ? "," : "") << extents_[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
  : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
  : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel())
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_.str());
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

double Tensor::item() const {
  if (data_.size() != 1)
    throw DimensionError("item() needs a single-element tensor, got " +
                         shape_.str());
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

namespace kernels {
namespace {

[[noreturn]] void mismatch(const char *op, const Tensor &a, const Tensor &b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       a.shape().str() + " and " + b.shape().str());
}

void require_rank(const char *op, const Tensor &a, std::size_t rank) {
  if (a.rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got shape " +
                         a.shape().str());
}

template <class F> Tensor map(const Tensor &a, F f) {
  Tensor out(a.shape());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = f(src[i]);
  return out;
}

template <class F> Tensor zip(const char *op, const Tensor &a, const Tensor &b,
                              F f) {
  if (!(a.shape() == b.shape()))
    mismatch(op, a, b);
  Tensor out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i)
    dst[i] = f(x[i], y[i]);
  return out;
}

// Four independent accumulators; the summation order is fixed, so results are
// reproducible bit-for-bit.
double dot(const double *x, const double *y, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += x[j] * y[j];
    s1 += x[j + 1] * y[j + 1];
    s2 += x[j + 2] * y[j + 2];
    s3 += x[j + 3] * y[j + 3];
  }
  for (; j < n; ++j)
    s0 += x[j] * y[j];
  return (s0 + s1) + (s2 + s3);
}

} // namespace

Tensor tensordot_axis_n(const Tensor &w, const Tensor &h) {
  require_rank("tensordot_axis_n", w, 3);
  require_rank("tensordot_axis_n", h, 2);
  const std::size_t n_vars = w.extent(0), rows = w.extent(1),
                    cols = w.extent(2);
  if (h.extent(0) != n_vars || h.extent(1) != cols)
    mismatch("tensordot_axis_n", w, h);
  Tensor out({n_vars, rows});
  for (std::size_t n = 0; n < n_vars; ++n)
    for (std::size_t i = 0; i < rows; ++i)
      out(n, i) = dot(&w.data()[(n * rows + i) * cols], &h.data()[n * cols],
                      cols);
  return out;
}

Tensor tensordot_seq(const Tensor &a, const Tensor &hs) {
  require_rank("tensordot_seq", a, 2);
  require_rank("tensordot_seq", hs, 3);
  const std::size_t n_vars = a.extent(0), steps = a.extent(1),
                    width = hs.extent(2);
  if (hs.extent(0) != steps || hs.extent(1) != n_vars)
    mismatch("tensordot_seq", a, hs);
  Tensor out({n_vars, width});
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t n = 0; n < n_vars; ++n) {
      const double weight = a(n, t);
      for (std::size_t k = 0; k < width; ++k)
        out(n, k) += weight * hs(t, n, k);
    }
  return out;
}

Tensor seq_scores(const Tensor &hs, const Tensor &w) {
  require_rank("seq_scores", hs, 3);
  require_rank("seq_scores", w, 2);
  const std::size_t steps = hs.extent(0), n_vars = hs.extent(1),
                    width = hs.extent(2);
  if (w.extent(0) != n_vars || w.extent(1) != width)
    mismatch("seq_scores", hs, w);
  Tensor out({n_vars, steps});
  for (std::size_t n = 0; n < n_vars; ++n)
    for (std::size_t t = 0; t < steps; ++t)
      out(n, t) = dot(&hs.data()[(t * n_vars + n) * width],
                      &w.data()[n * width], width);
  return out;
}

Tensor var_product(const Tensor &wx, const Tensor &x) {
  require_rank("var_product", wx, 2);
  require_rank("var_product", x, 1);
  if (wx.extent(0) != x.extent(0))
    mismatch("var_product", wx, x);
  Tensor out(wx.shape());
  for (std::size_t n = 0; n < wx.extent(0); ++n)
    for (std::size_t k = 0; k < wx.extent(1); ++k)
      out(n, k) = wx(n, k) * x[n];
  return out;
}

Tensor matvec(const Tensor &a, const Tensor &b) {
  require_rank("matvec", a, 2);
  require_rank("matvec", b, 1);
  const std::size_t rows = a.extent(0), cols = a.extent(1);
  if (b.extent(0) != cols)
    mismatch("matvec", a, b);
  Tensor out({rows});
  for (std::size_t i = 0; i < rows; ++i)
    out[i] = dot(&a.data()[i * cols], b.data().data(), cols);
  return out;
}

Tensor vecmat(const Tensor &v, const Tensor &a) {
  require_rank("vecmat", v, 1);
  require_rank("vecmat", a, 2);
  const std::size_t rows = a.extent(0), cols = a.extent(1);
  if (v.extent(0) != rows)
    mismatch("vecmat", v, a);
  Tensor out({cols});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      out[j] += v[i] * a(i, j);
  return out;
}

Tensor row_dot(const Tensor &a, const Tensor &b) {
  require_rank("row_dot", a, 2);
  if (!(a.shape() == b.shape()))
    mismatch("row_dot", a, b);
  const std::size_t rows = a.extent(0), cols = a.extent(1);
  Tensor out({rows});
  for (std::size_t i = 0; i < rows; ++i)
    out[i] = dot(&a.data()[i * cols], &b.data()[i * cols], cols);
  return out;
}

Tensor add(const Tensor &a, const Tensor &b) {
  return zip("add", a, b, std::plus<>());
}
Tensor sub(const Tensor &a, const Tensor &b) {
  return zip("sub", a, b, std::minus<>());
}
Tensor mul(const Tensor &a, const Tensor &b) {
  return zip("mul", a, b, std::multiplies<>());
}
Tensor scale(const Tensor &a, double factor) {
  return map(a, [factor](double v) { return v * factor; });
}

Tensor add_row_bias(const Tensor &m, const Tensor &b) {
  require_rank("add_row_bias", m, 2);
  require_rank("add_row_bias", b, 1);
  if (b.extent(0) != m.extent(0))
    mismatch("add_row_bias", m, b);
  Tensor out = m;
  for (std::size_t r = 0; r < m.extent(0); ++r)
    for (std::size_t c = 0; c < m.extent(1); ++c)
      out(r, c) += b[r];
  return out;
}

Tensor add_scalar(const Tensor &a, const Tensor &s) {
  if (s.size() != 1)
    mismatch("add_scalar", a, s);
  const double v = s[0];
  return map(a, [v](double x) { return x + v; });
}

Tensor tanh(const Tensor &a) {
  return map(a, [](double v) { return std::tanh(v); });
}
Tensor sigmoid(const Tensor &a) {
  return map(a, [](double v) {
    // Split by sign so exp never overflows.
    if (v >= 0.0)
      return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}
Tensor exp(const Tensor &a) {
  return map(a, [](double v) { return std::exp(v); });
}
Tensor log(const Tensor &a) {
  return map(a, [](double v) { return std::log(v); });
}
Tensor square(const Tensor &a) {
  return map(a, [](double v) { return v * v; });
}

Tensor softmax_rows(const Tensor &e) {
  require_rank("softmax_rows", e, 2);
  const std::size_t rows = e.extent(0), cols = e.extent(1);
  Tensor out(e.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double peak = e(r, 0);
    for (std::size_t c = 1; c < cols; ++c)
      peak = std::max(peak, e(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = std::exp(e(r, c) - peak);
      total += out(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c)
      out(r, c) /= total;
  }
  return out;
}

Tensor logsumexp(const Tensor &a) {
  auto x = a.data();
  const double peak = *std::max_element(x.begin(), x.end());
  double total = 0.0;
  for (double v : x)
    total += std::exp(v - peak);
  return Tensor::scalar(peak + std::log(total));
}

Tensor sum(const Tensor &a) {
  double total = 0.0;
  for (double v : a.data())
    total += v;
  return Tensor::scalar(total);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty())
    throw DimensionError("concat: no operands");
  const Shape &first = parts[0].shape();
  if (axis >= first.rank())
    throw DimensionError("concat: axis " + std::to_string(axis) +
                         " out of range for shape " + first.str());
  std::size_t joined = 0;
  for (const Tensor &p : parts) {
    if (p.rank() != first.rank())
      mismatch("concat", parts[0], p);
    for (std::size_t i = 0; i < first.rank(); ++i)
      if (i != axis && p.extent(i) != first[i])
        mismatch("concat", parts[0], p);
    joined += p.extent(axis);
  }
  std::vector<std::size_t> extents = first.extents();
  extents[axis] = joined;

  // View every operand as [outer, extent(axis) * inner].
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i)
    outer *= first[i];
  for (std::size_t i = axis + 1; i < first.rank(); ++i)
    inner *= first[i];

  Tensor out{Shape(extents)};
  auto dst = out.data();
  std::size_t pos = 0;
  for (std::size_t o = 0; o < outer; ++o)
    for (const Tensor &p : parts) {
      const std::size_t chunk = p.extent(axis) * inner;
      auto src = p.data().subspan(o * chunk, chunk);
      std::copy(src.begin(), src.end(), dst.begin() + pos);
      pos += chunk;
    }
  return out;
}

Tensor slice(const Tensor &a, std::size_t begin, std::size_t end) {
  if (a.rank() == 0 || begin >= end || end > a.extent(0))
    throw DimensionError("slice: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") invalid for shape " +
                         a.shape().str());
  std::vector<std::size_t> extents = a.shape().extents();
  const std::size_t stride = a.size() / extents[0];
  extents[0] = end - begin;
  auto src = a.data().subspan(begin * stride, (end - begin) * stride);
  return Tensor(Shape(extents), std::vector<double>(src.begin(), src.end()));
}

Tensor reshape(const Tensor &a, const Shape &shape) {
  if (shape.numel() != a.size())
    throw DimensionError("reshape: cannot view " + a.shape().str() + " as " +
                         shape.str());
  return Tensor(shape, a.values());
}

Tensor vec(const Tensor &h) {
  require_rank("vec", h, 2);
  return reshape(h, {h.size()});
}

Tensor matricize(const Tensor &v, std::size_t n_vars, std::size_t width) {
  require_rank("matricize", v, 1);
  if (v.size() != n_vars * width)
    throw DimensionError("matricize: length " + std::to_string(v.size()) +
                         " is not " + std::to_string(n_vars) + "x" +
                         std::to_string(width));
  return reshape(v, {n_vars, width});
}

} // namespace kernels
} // namespace mvlstm
