// SPDX-License-Identifier: Apache-2.0

#include <mvlstm/error.hpp>
#include <mvlstm/synthetic.hpp>

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>

namespace mvlstm {

double spectral_radius(std::span<const double> phi) {
  const auto p = static_cast<Eigen::Index>(phi.size());
  if (p == 0)
    return 0.0;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    companion(0, j) = phi[j];
  for (Eigen::Index i = 1; i < p; ++i)
    companion(i, i - 1) = 1.0;
  return companion.eigenvalues().cwiseAbs().maxCoeff();
}

bool ArmaSpec::stationary() const { return spectral_radius(phi) < 1.0; }

std::vector<double> reflection_to_ar(std::span<const double> reflection) {
  std::vector<double> phi;
  for (double k : reflection) {
    if (!(std::abs(k) < 1.0))
      throw ContractViolation("reflection coefficients must lie in (-1,1)");
    std::vector<double> next(phi.size() + 1);
    for (std::size_t j = 0; j < phi.size(); ++j)
      next[j] = phi[j] - k * phi[phi.size() - 1 - j];
    next.back() = k;
    phi = std::move(next);
  }
  return phi;
}

ArmaSpec randomize_spec(std::mt19937_64 &rng) {
  std::uniform_int_distribution<int> order(1, 3);
  std::uniform_real_distribution<double> refl(-0.9, 0.9);
  std::uniform_real_distribution<double> ma(-0.5, 0.5);
  ArmaSpec s;
  const int p = order(rng);
  const int q = order(rng);
  for (int i = 0; i < p; ++i)
    s.reflection.push_back(refl(rng));
  s.phi = reflection_to_ar(s.reflection);
  for (int j = 0; j < q; ++j)
    s.theta.push_back(ma(rng));
  s.noise_std = 1.0;
  return s;
}

std::vector<double> sample_arma(const ArmaSpec &spec, std::size_t length,
                                std::mt19937_64 &rng) {
  if (length <= kBurnIn)
    throw ContractViolation("ARMA length must exceed the burn-in of " +
                            std::to_string(kBurnIn) + ", got " +
                            std::to_string(length));
  if (!spec.stationary())
    throw ContractViolation("ARMA spec is not stationary (spectral radius " +
                            std::to_string(spectral_radius(spec.phi)) + ")");
  if (spec.noise_std < 0.0)
    throw ContractViolation("ARMA noise_std must be nonnegative");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(length, 0.0), eps(length, 0.0);
  for (std::size_t t = 0; t < length; ++t) {
    eps[t] = spec.noise_std * normal(rng);
    double v = eps[t];
    for (std::size_t i = 0; i < spec.p() && i < t; ++i)
      v += spec.phi[i] * x[t - 1 - i];
    for (std::size_t j = 0; j < spec.q() && j < t; ++j)
      v += spec.theta[j] * eps[t - 1 - j];
    x[t] = v;
  }
  return {x.begin() + kBurnIn, x.end()};
}

SyntheticData generate_dataset(const GenerateOptions &options) {
  if (options.n_exo < kCoupledSources.back() + 1)
    throw ContractViolation("need at least " +
                            std::to_string(kCoupledSources.back() + 1) +
                            " exogenous series, got " +
                            std::to_string(options.n_exo));
  if (options.length <= kBurnIn + kMaxLag)
    throw ContractViolation("length must exceed " +
                            std::to_string(kBurnIn + kMaxLag) + ", got " +
                            std::to_string(options.length));

  std::mt19937_64 rng(options.seed);
  SyntheticData out;
  out.options = options;

  std::uniform_int_distribution<std::size_t> lag(1, kMaxLag);
  std::uniform_real_distribution<double> gain(0.8, 1.5);
  for (std::size_t k = 0; k < 2; ++k) {
    out.coupling.lags[k] = lag(rng);
    out.coupling.gains[k] = gain(rng);
  }
  if (options.gains)
    out.coupling.gains = *options.gains;

  // Exogenous series carry kMaxLag extra leading samples so every lag is
  // defined from the first emitted row.
  const std::size_t rows = options.length - kBurnIn;
  std::vector<std::vector<double>> exo;
  for (std::size_t k = 0; k < options.n_exo; ++k) {
    out.exogenous.push_back(randomize_spec(rng));
    exo.push_back(sample_arma(out.exogenous.back(), options.length + kMaxLag,
                              rng));
  }
  out.target = randomize_spec(rng);
  const std::vector<double> own = sample_arma(out.target, options.length, rng);

  const std::size_t n = options.n_exo + 1;
  Tensor values({rows, n});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < options.n_exo; ++k)
      values(r, k) = exo[k][r + kMaxLag];
    double y = own[r];
    for (std::size_t s = 0; s < 2; ++s) {
      const auto &src = exo[out.coupling.sources[s]];
      y += out.coupling.gains[s] *
           std::tanh(src[r + kMaxLag - out.coupling.lags[s]]);
    }
    values(r, options.n_exo) = y;
  }
  for (std::size_t k = 0; k < options.n_exo; ++k)
    out.series.names.push_back("x" + std::to_string(k));
  out.series.names.push_back("y");
  out.series.values = std::move(values);
  return out;
}

std::string SyntheticData::manifest_json() const {
  using nlohmann::json;
  auto spec_json = [](const ArmaSpec &s) {
    return json{{"p", s.p()},
                {"q", s.q()},
                {"phi", s.phi},
                {"theta", s.theta},
                {"reflection", s.reflection},
                {"noise_std", s.noise_std}};
  };
  json exo = json::array();
  for (std::size_t k = 0; k < exogenous.size(); ++k) {
    json e = spec_json(exogenous[k]);
    e["column"] = series.names[k];
    exo.push_back(std::move(e));
  }
  json coupling = json::array();
  for (std::size_t s = 0; s < 2; ++s)
    coupling.push_back({{"source", series.names[this->coupling.sources[s]]},
                        {"variable", this->coupling.sources[s]},
                        {"lag", this->coupling.lags[s]},
                        {"gain", this->coupling.gains[s]},
                        {"form", "gain * tanh(x[t - lag])"}});
  json m{{"generator", "arma-tanh-coupling"},
         {"seed", options.seed},
         {"length", options.length},
         {"burn_in", kBurnIn},
         {"rows", series.length()},
         {"n_exo", options.n_exo},
         {"columns", series.names},
         {"target_column", series.names.back()},
         {"gains_overridden", options.gains.has_value()},
         {"exogenous", exo},
         {"target_arma", spec_json(target)},
         {"coupling", coupling},
         {"important_variables", this->coupling.sources}};
  return m.dump(2) + "\n";
}

} // namespace mvlstm
