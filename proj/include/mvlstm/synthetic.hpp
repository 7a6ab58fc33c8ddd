// SPDX-License-Identifier: Apache-2.0
/**
 * @file   synthetic.hpp
 * @brief  Seeded ARMA generator for a target driven by two lagged exogenous
 *         series, with the planted dependencies recorded in a manifest.
 *
 * Exogenous series x0..x{K-1} are independent ARMA draws. The target is
 *   y_t = a_t + g2 tanh(x2_{t-l2}) + g3 tanh(x3_{t-l3})
 * where a_t is the target's own ARMA process.
 */

#ifndef MVLSTM_SYNTHETIC_HPP
#define MVLSTM_SYNTHETIC_HPP

#include <mvlstm/data.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mvlstm {

inline constexpr std::size_t kBurnIn = 100;
inline constexpr std::size_t kMaxLag = 5;
inline constexpr std::array<std::size_t, 2> kCoupledSources = {2, 3};

struct ArmaSpec {
  std::vector<double> phi;        ///< AR coefficients, phi[0] multiplies x_{t-1}
  std::vector<double> theta;      ///< MA coefficients
  double noise_std = 1.0;
  std::vector<double> reflection; ///< partial autocorrelations, when drawn

  std::size_t p() const { return phi.size(); }
  std::size_t q() const { return theta.size(); }
  bool stationary() const;
};

/// Largest eigenvalue modulus of the AR companion matrix (0 for no AR terms).
double spectral_radius(std::span<const double> phi);
/// Durbin-Levinson map from reflection coefficients in (-1,1) to AR
/// coefficients of a stationary process.
std::vector<double> reflection_to_ar(std::span<const double> reflection);

/// p,q uniform in {1,2,3}; reflections U(-0.9,0.9); MA U(-0.5,0.5); unit noise.
ArmaSpec randomize_spec(std::mt19937_64 &rng);

/// Simulates `length` steps from a zero state and drops the first kBurnIn,
/// returning length - kBurnIn values.
std::vector<double> sample_arma(const ArmaSpec &spec, std::size_t length,
                                std::mt19937_64 &rng);

struct CouplingSpec {
  std::array<std::size_t, 2> sources = kCoupledSources;
  std::array<std::size_t, 2> lags{};
  std::array<double, 2> gains{};
};

struct GenerateOptions {
  std::uint64_t seed = 0;
  std::size_t length = 0; ///< simulated steps including burn-in
  std::size_t n_exo = 10;
  /// Replaces the drawn gains (the draws still happen).
  std::optional<std::array<double, 2>> gains;
};

struct SyntheticData {
  RawSeries series; ///< columns x0..x{K-1}, y
  std::vector<ArmaSpec> exogenous;
  ArmaSpec target;
  CouplingSpec coupling;
  GenerateOptions options;

  /// Ground-truth description as JSON text.
  std::string manifest_json() const;
};

SyntheticData generate_dataset(const GenerateOptions &options);

} // namespace mvlstm

#endif // MVLSTM_SYNTHETIC_HPP
