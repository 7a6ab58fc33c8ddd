// SPDX-License-Identifier: Apache-2.0
/**
 * @file   tensor.hpp
 * @brief  Dense rank 1-3 tensor of doubles and the small set of kernels the
 *         MV-LSTM equations are written in.
 *
 * Storage is row-major (last index fastest). No broadcasting: every kernel
 * checks its operand shapes and throws DimensionError naming both shapes.
 */

#ifndef MVLSTM_TENSOR_HPP
#define MVLSTM_TENSOR_HPP

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mvlstm {

class Shape {
public:
  static constexpr std::size_t kMaxRank = 3;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> extents);
  explicit Shape(std::span<const std::size_t> extents);

  std::size_t rank() const { return rank_; }
  std::size_t operator[](std::size_t axis) const { return extents_[axis]; }
  std::size_t numel() const;
  std::vector<std::size_t> extents() const {
    return {extents_.begin(), extents_.begin() + rank_};
  }

  bool operator==(const Shape &other) const;
  std::string str() const;

private:
  std::array<std::size_t, kMaxRank> extents_{};
  std::size_t rank_ = 0;
};

class Tensor {
public:
  /// Empty tensor (rank 0, no data). Used as the "not yet materialized" state.
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor({1}, {value}); }
  static Tensor vector(std::vector<double> values);

  const Shape &shape() const { return shape_; }
  std::size_t rank() const { return shape_.rank(); }
  std::size_t extent(std::size_t axis) const { return shape_[axis]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double> &values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double &operator[](std::size_t i) { return data_[i]; }

  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  double &operator()(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double &operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Value of a shape-[1] tensor.
  double item() const;
  bool all_finite() const;

  bool operator==(const Tensor &other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

private:
  Shape shape_;
  std::vector<double> data_;
};

namespace kernels {

// Contractions used by the cell and the attention head.

/// out[n,i] = sum_j w[n,i,j] * h[n,j]
Tensor tensordot_axis_n(const Tensor &w, const Tensor &h);
/// out[n,k] = sum_t a[n,t] * hs[t,n,k]
Tensor tensordot_seq(const Tensor &a, const Tensor &hs);
/// out[n,t] = sum_k hs[t,n,k] * w[n,k]
Tensor seq_scores(const Tensor &hs, const Tensor &w);
/// out[n,k] = wx[n,k] * x[n]
Tensor var_product(const Tensor &wx, const Tensor &x);
/// out[i] = sum_j a[i,j] * b[j]
Tensor matvec(const Tensor &a, const Tensor &b);
/// out[j] = sum_i v[i] * a[i,j]
Tensor vecmat(const Tensor &v, const Tensor &a);
/// out[n] = sum_k a[n,k] * b[n,k]
Tensor row_dot(const Tensor &a, const Tensor &b);

Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b);
Tensor scale(const Tensor &a, double factor);
/// out[r,c] = m[r,c] + b[r]
Tensor add_row_bias(const Tensor &m, const Tensor &b);
/// out = a + s for a shape-[1] tensor s
Tensor add_scalar(const Tensor &a, const Tensor &s);

Tensor tanh(const Tensor &a);
Tensor sigmoid(const Tensor &a);
Tensor exp(const Tensor &a);
Tensor log(const Tensor &a);
Tensor square(const Tensor &a);

/// Softmax over the last axis of a rank-2 tensor, max-subtracted.
Tensor softmax_rows(const Tensor &e);
/// Stable log(sum(exp(a))) over all entries; shape [1].
Tensor logsumexp(const Tensor &a);
/// Sum of all entries; shape [1].
Tensor sum(const Tensor &a);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
/// Rows [begin, end) along axis 0.
Tensor slice(const Tensor &a, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor &a, const Shape &shape);

/// Row-major flatten of an [N,d] matrix, so variable n occupies [n*d, (n+1)*d).
Tensor vec(const Tensor &h);
Tensor matricize(const Tensor &v, std::size_t n_vars, std::size_t width);

} // namespace kernels
} // namespace mvlstm

#endif // MVLSTM_TENSOR_HPP
