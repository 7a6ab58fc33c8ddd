// SPDX-License-Identifier: Apache-2.0
#ifndef MVLSTM_TEST_UTIL_HPP
#define MVLSTM_TEST_UTIL_HPP

#include <mvlstm/tensor.hpp>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

namespace mvlstm::test {

inline Tensor random_tensor(const Shape &shape, std::mt19937_64 &rng,
                            double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Tensor t(shape);
  for (double &v : t.data())
    v = normal(rng);
  return t;
}

inline double max_abs_diff(const Tensor &a, const Tensor &b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline std::size_t draw(std::mt19937_64 &rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Fresh directory under the system temp dir, removed by the caller.
inline std::filesystem::path scratch_dir(const std::string &tag) {
  auto base = std::filesystem::temp_directory_path() /
              ("mvlstm_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(base);
  std::filesystem::create_directories(base);
  return base;
}

} // namespace mvlstm::test

#endif
