#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "special.hpp"

namespace cumjump {

/// Constant-weight Gamma mixture  sum_m pi_m Gamma(k_m, b_m)  with shape k_m and
/// rate b_m (component mean k_m / b_m). Immutable once constructed.
class GammaMixture {
 public:
  /// Validates and returns a mixture. Weights summing to 1 within 1e-9 are
  /// renormalized; anything further off is rejected.
  static GammaMixture make(std::vector<double> weights, std::vector<double> shapes,
                           std::vector<double> rates) {
    require(!weights.empty(), Errc::InvalidMixture, "mixture needs at least one component");
    require(weights.size() == shapes.size() && shapes.size() == rates.size(), Errc::DimensionMismatch,
            "weights, shapes and rates must have the same length");
    double sum = 0.0;
    for (std::size_t m = 0; m < weights.size(); ++m) {
      require(std::isfinite(weights[m]) && weights[m] >= 0.0, Errc::InvalidMixture,
              "weight " + std::to_string(m) + " must be finite and nonnegative");
      require(std::isfinite(shapes[m]) && shapes[m] > 0.0, Errc::InvalidMixture,
              "shape " + std::to_string(m) + " must be positive");
      require(std::isfinite(rates[m]) && rates[m] > 0.0, Errc::InvalidMixture,
              "rate " + std::to_string(m) + " must be positive");
      sum += weights[m];
    }
    require(std::abs(sum - 1.0) <= 1e-9, Errc::InvalidMixture,
            "weights must sum to one (got " + std::to_string(sum) + ")");
    if (sum != 1.0)
      for (double& w : weights) w /= sum;
    return GammaMixture(std::move(weights), std::move(shapes), std::move(rates));
  }

  static GammaMixture single(double shape, double rate) { return make({1.0}, {shape}, {rate}); }

  std::size_t size() const noexcept { return weights_.size(); }
  double weight(std::size_t m) const { return weights_[m]; }
  double shape(std::size_t m) const { return shapes_[m]; }
  double rate(std::size_t m) const { return rates_[m]; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> shapes() const noexcept { return shapes_; }
  std::span<const double> rates() const noexcept { return rates_; }
  double min_rate() const { return *std::min_element(rates_.begin(), rates_.end()); }

  /// Density of component m at x.
  double component_pdf(std::size_t m, double x) const {
    if (x <= 0.0) return 0.0;
    const double k = shapes_[m], b = rates_[m];
    return std::exp(k * std::log(b) + (k - 1.0) * std::log(x) - b * x - special::log_gamma(k));
  }

  double pdf(double x) const {
    double s = 0.0;
    for (std::size_t m = 0; m < size(); ++m) s += weights_[m] * component_pdf(m, x);
    return s;
  }

 private:
  GammaMixture(std::vector<double> w, std::vector<double> k, std::vector<double> b)
      : weights_(std::move(w)), shapes_(std::move(k)), rates_(std::move(b)) {}

  std::vector<double> weights_;
  std::vector<double> shapes_;
  std::vector<double> rates_;
};

/// Dynamics of the intensity: d lambda = kappa (lambda_bar - lambda) dt + beta dU.
struct ModelParams {
  double kappa = 8.0;
  double lambda_bar = 2.0;
  double beta = 1.0;
  double r = 0.02;
  double T = 150.0 / 365.0;
  double lambda0 = 2.5;
  double u0 = 0.0;

  void validate() const {
    require(std::isfinite(kappa) && kappa > 0.0, Errc::InvalidModel, "kappa must be positive");
    require(std::isfinite(lambda_bar) && lambda_bar >= 0.0, Errc::InvalidModel, "lambda_bar must be >= 0");
    require(std::isfinite(beta) && beta >= 0.0, Errc::InvalidModel, "beta must be >= 0");
    require(std::isfinite(r) && r >= 0.0, Errc::InvalidModel, "r must be >= 0");
    require(std::isfinite(T) && T > 0.0, Errc::InvalidModel, "T must be positive");
    require(std::isfinite(lambda0) && lambda0 >= 0.0, Errc::InvalidModel, "lambda0 must be >= 0");
    require(std::isfinite(u0) && u0 >= 0.0, Errc::InvalidModel, "u0 must be >= 0");
  }

  double drift(double lambda) const noexcept { return kappa * (lambda_bar - lambda); }
};

namespace detail {
inline void require_tilt_domain(const GammaMixture& mix, double theta, Errc code) {
  require(std::isfinite(theta) && theta < mix.min_rate(), code,
          "exponent " + std::to_string(theta) + " must be below the smallest rate " +
              std::to_string(mix.min_rate()));
}
}  // namespace detail

/// Normalized Esscher tilt e^{theta x} nu(dx) / E[e^{theta X}]. Gamma(k, b)
/// components become Gamma(k, b - theta) and weights pick up (b/(b-theta))^k.
inline GammaMixture esscher_tilt(const GammaMixture& mix, double theta) {
  detail::require_tilt_domain(mix, theta, Errc::TiltOutOfDomain);
  const std::size_t M = mix.size();
  std::vector<double> w(M), k(M), b(M);
  // Factors computed in log space; large shapes overflow otherwise.
  std::vector<double> logf(M);
  for (std::size_t m = 0; m < M; ++m) logf[m] = -mix.shape(m) * std::log1p(-theta / mix.rate(m));
  const double shift = *std::max_element(logf.begin(), logf.end());
  double sum = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    w[m] = mix.weight(m) * std::exp(logf[m] - shift);
    sum += w[m];
  }
  for (std::size_t m = 0; m < M; ++m) {
    w[m] /= sum;
    k[m] = mix.shape(m);
    b[m] = mix.rate(m) - theta;
  }
  return GammaMixture::make(std::move(w), std::move(k), std::move(b));
}

/// E[e^{sX}] = sum_m pi_m (b_m / (b_m - s))^{k_m}.
inline double mgf(const GammaMixture& mix, double s) {
  detail::require_tilt_domain(mix, s, Errc::MomentDiverges);
  double acc = 0.0;
  for (std::size_t m = 0; m < mix.size(); ++m)
    acc += mix.weight(m) * std::exp(-mix.shape(m) * std::log1p(-s / mix.rate(m)));
  return acc;
}

/// Analytic continuation of mgf to Re(eta) < min rate, principal branch.
inline std::complex<double> complex_mgf(const GammaMixture& mix, std::complex<double> eta) {
  detail::require_tilt_domain(mix, eta.real(), Errc::MomentDiverges);
  std::complex<double> acc = 0.0;
  for (std::size_t m = 0; m < mix.size(); ++m) {
    // Re(1 - eta/b) > 0, so the principal log never crosses its cut.
    const std::complex<double> base = 1.0 - eta / mix.rate(m);
    acc += mix.weight(m) * std::exp(-mix.shape(m) * std::log(base));
  }
  return acc;
}

inline double mean(const GammaMixture& mix) {
  double acc = 0.0;
  for (std::size_t m = 0; m < mix.size(); ++m) acc += mix.weight(m) * mix.shape(m) / mix.rate(m);
  return acc;
}

struct StabilityCheck {
  bool satisfied = false;
  double margin = 0.0;
};

/// Mean reversion against the worst-case tilted self-excitation:
/// kappa > beta * max_m k_m / (b_m - theta).
inline StabilityCheck check_stability(const ModelParams& model, const GammaMixture& mix, double theta) {
  detail::require_tilt_domain(mix, theta, Errc::TiltOutOfDomain);
  double worst = 0.0;
  for (std::size_t m = 0; m < mix.size(); ++m) worst = std::max(worst, mix.shape(m) / (mix.rate(m) - theta));
  const double margin = model.kappa - model.beta * worst;
  return {margin > 0.0, margin};
}

/// Parameter box K = [k_lo, k_hi] x [b_lo, b_hi] containing both mixtures of a
/// weighted-TV comparison.
struct ParamBox {
  double k_lo = 0.0;
  double k_hi = 0.0;
  double b_lo = 0.0;
  double b_hi = 0.0;
};

/// Box-uniform Lipschitz constants of (k, b) -> int e^{delta x} f_{k,b}(x) dx in
/// weighted L1. With c = b - delta and Y ~ Gamma(k, c):
///   |d_b f| integrates to M E|k/b - Y|       <= M (k delta / (b c) + sqrt(k) / c)
///   |d_k f| integrates to M E|ln(bY) - psi(k)| <= M (ln(b/c) + sqrt(psi1(k)))
/// with M = (b/c)^k. Every factor is monotone in k and b separately, so the
/// supremum is bounded by the product of per-factor corner maxima.
struct TvConstants {
  double c_shape = 0.0;
  double c_rate = 0.0;
};

inline TvConstants tv_lipschitz_constants(const ParamBox& box, double delta) {
  require(box.k_lo > 0.0 && box.k_lo <= box.k_hi, Errc::InvalidArgument, "shape box must satisfy 0 < k_lo <= k_hi");
  require(box.b_lo > delta && box.b_lo <= box.b_hi, Errc::TiltOutOfDomain,
          "rate box must satisfy delta < b_lo <= b_hi");
  auto corner_max = [&](auto&& f) {
    double v = -std::numeric_limits<double>::infinity();
    for (double k : {box.k_lo, box.k_hi})
      for (double b : {box.b_lo, box.b_hi}) v = std::max(v, f(k, b));
    return v;
  };
  const double M = corner_max([&](double k, double b) { return std::exp(-k * std::log1p(-delta / b)); });
  const double shift = corner_max([&](double k, double b) { return k * std::abs(delta) / (b * (b - delta)); });
  const double spread = corner_max([&](double k, double b) { return std::sqrt(k) / (b - delta); });
  const double log_ratio = corner_max([&](double, double b) { return std::abs(std::log(b / (b - delta))); });
  TvConstants out;
  out.c_rate = M * (shift + spread);
  out.c_shape = M * (log_ratio + std::sqrt(special::trigamma(box.k_lo)));
  return out;
}

/// Upper bound on int e^{delta x} |nu_A - nu_B|(dx) for two mixtures with the
/// same component count whose parameters all lie inside `box`.
inline double weighted_tv_bound(const GammaMixture& a, const GammaMixture& b, double delta, const ParamBox& box) {
  require(a.size() == b.size(), Errc::DimensionMismatch, "mixtures must have the same number of components");
  require(delta < a.min_rate() && delta < b.min_rate(), Errc::TiltOutOfDomain,
          "delta must be below every rate of both mixtures");
  for (std::size_t m = 0; m < a.size(); ++m)
    for (const GammaMixture* mix : {&a, &b})
      require(mix->shape(m) >= box.k_lo && mix->shape(m) <= box.k_hi && mix->rate(m) >= box.b_lo &&
                  mix->rate(m) <= box.b_hi,
              Errc::InvalidArgument, "mixture parameters must lie inside the parameter box");
  const TvConstants cst = tv_lipschitz_constants(box, delta);
  double bound = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    const double moment = std::exp(-a.shape(m) * std::log1p(-delta / a.rate(m)));
    bound += std::abs(a.weight(m) - b.weight(m)) * moment;
    bound += b.weight(m) * (cst.c_shape * std::abs(a.shape(m) - b.shape(m)) +
                            cst.c_rate * std::abs(a.rate(m) - b.rate(m)));
  }
  return bound;
}

}  // namespace cumjump
