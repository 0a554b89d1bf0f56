#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "error.hpp"
#include "interp.hpp"
#include "marks.hpp"
#include "pide.hpp"
#include "quadrature.hpp"

namespace cumjump {

/// f(u) = min((u - K)^+, C).
struct CappedCallPayoff {
  double K = 1.2;
  double C = 3.0;

  void validate() const {
    require(std::isfinite(K) && K >= 0.0, Errc::InvalidArgument, "strike must be >= 0");
    require(std::isfinite(C) && C > 0.0, Errc::InvalidArgument, "cap must be positive");
  }

  double operator()(double u) const { return std::min(std::max(u - K, 0.0), C); }
};

/// Simpson grid y_j = j Y_max / (N_y - 1), j = 0..N_y-1, on the line Re(eta) = delta.
struct BromwichSpec {
  double delta = 0.3;
  double Y_max = 120.0;
  int N_y = 1537;

  void validate() const {
    require(std::isfinite(delta) && delta > 0.0, Errc::InvalidArgument, "damping must be positive");
    require(std::isfinite(Y_max) && Y_max > 0.0, Errc::InvalidArgument, "Y_max must be positive");
    require(N_y >= 3 && N_y % 2 == 1, Errc::InvalidArgument, "Simpson needs an odd N_y >= 3");
  }

  double dy() const noexcept { return Y_max / (N_y - 1); }
  double y(int j) const noexcept { return j == N_y - 1 ? Y_max : j * dy(); }
  std::complex<double> eta(int j) const noexcept { return {delta, y(j)}; }
};

namespace detail {
inline double simpson_weight(int j, int n) {
  if (j == 0 || j == n - 1) return 1.0 / 3.0;
  return (j % 2 == 1) ? 4.0 / 3.0 : 2.0 / 3.0;
}
}  // namespace detail

/// int_0^inf e^{-eta u} min((u-K)^+, C) du = e^{-eta K} (1 - e^{-eta C}) / eta^2.
inline std::complex<double> capped_call_transform(const CappedCallPayoff& payoff, double delta, double y) {
  require(delta > 0.0, Errc::InvalidArgument, "damping must be positive");
  const std::complex<double> eta(delta, y);
  // -expm1 keeps accuracy when |eta C| is small.
  const std::complex<double> z = -eta * payoff.C;
  const std::complex<double> one_minus = (std::abs(z) < 1e-5) ? -(z + 0.5 * z * z) : 1.0 - std::exp(z);
  return std::exp(-eta * payoff.K) * one_minus / (eta * eta);
}

/// Composite Simpson approximation of int_0^inf e^{-(delta+iy)u} f(u) du for a
/// payoff sampled at u_j = j du (odd sample count). The grid must reach far
/// enough that the damped tail e^{-delta U} |f(U)| / delta is below tail_tol.
inline std::complex<double> numeric_transform(std::span<const double> f_samples, double du, double delta, double y,
                                              double tail_tol = 1e-8) {
  require(delta > 0.0 && du > 0.0, Errc::InvalidArgument, "need positive damping and step");
  require(f_samples.size() >= 3 && f_samples.size() % 2 == 1, Errc::InvalidArgument,
          "Simpson needs an odd number of samples >= 3");
  const int n = static_cast<int>(f_samples.size());
  const double U = du * (n - 1);
  require(std::exp(-delta * U) * std::abs(f_samples.back()) / delta <= tail_tol, Errc::SupportNotCovered,
          "damped payoff is not negligible at the end of the sample grid");
  const std::complex<double> eta(delta, y);
  std::complex<double> acc = 0.0;
  for (int j = 0; j < n; ++j) {
    if (f_samples[j] == 0.0) continue;
    acc += detail::simpson_weight(j, n) * f_samples[j] * std::exp(-eta * (j * du));
  }
  return acc * du;
}

struct PriceResult {
  double price = 0.0;
  /// |Im| of the two-sided reconstruction relative to |price|.
  double imag_residual = 0.0;
  double boundary_hit = 0.0;
  /// F(0, lambda0, delta + i y_j), kept on request.
  std::vector<std::complex<double>> modal;
};

/// One-sided Simpson inversion
///   V = e^{delta u0} / pi * int_0^{Y_max} Re(fhat(y) F(y) e^{i y u0}) dy.
/// When `transform_neg` (fhat at -y_j, evaluated independently) is supplied,
/// the imaginary residual of the two-sided sum is reported; otherwise it is 0.
inline PriceResult invert_price(std::span<const std::complex<double>> modal,
                                std::span<const std::complex<double>> transform, const BromwichSpec& spec, double u0,
                                std::span<const std::complex<double>> transform_neg = {}) {
  spec.validate();
  const auto n = static_cast<std::size_t>(spec.N_y);
  require(modal.size() == n && transform.size() == n, Errc::GridMismatch,
          "modal and transform values must sit on the same frequency grid");
  require(transform_neg.empty() || transform_neg.size() == n, Errc::GridMismatch,
          "negative-frequency transform has the wrong length");
  const double scale = std::exp(spec.delta * u0) * spec.dy();
  double re = 0.0;
  std::complex<double> two_sided = 0.0;
  for (int j = 0; j < spec.N_y; ++j) {
    const double w = detail::simpson_weight(j, spec.N_y);
    const double y = spec.y(j);
    const std::complex<double> phase(std::cos(y * u0), std::sin(y * u0));
    const std::complex<double> g = transform[j] * modal[j] * phase;
    re += w * g.real();
    if (!transform_neg.empty()) two_sided += w * (g + transform_neg[j] * std::conj(modal[j]) * std::conj(phase));
  }
  PriceResult out;
  out.price = scale * re / std::numbers::pi;
  if (!transform_neg.empty()) {
    const double im = std::abs(scale * two_sided.imag() / (2.0 * std::numbers::pi));
    out.imag_residual = (im == 0.0) ? 0.0 : im / std::max(std::abs(out.price), 1e-300);
  }
  return out;
}

struct PriceOptions {
  int Q = 24;
  ModalOptions modal;
  /// Worker threads for the frequency sweep; 0 picks hardware concurrency.
  unsigned threads = 0;
  bool keep_modal = false;
};

/// Solves every modal PIDE on the Bromwich grid once and keeps F(0, ., eta_j)
/// on the whole intensity grid, so prices for any (lambda0, u0) are cheap.
/// Frequencies are distributed over worker threads; each writes only its own
/// slot, so the result does not depend on scheduling.
class BromwichPricer {
 public:
  BromwichPricer(const ModelParams& model, const GammaMixture& mix, double theta, const CappedCallPayoff& payoff,
                 const SolverGrid& grid, const BromwichSpec& spec, PriceOptions opts = {})
      : model_(model),
        tilted_(esscher_tilt(mix, theta)),
        payoff_(payoff),
        spec_(spec),
        opts_(opts),
        rules_(make_component_rules(tilted_, opts.Q)),
        solver_(grid, model, tilted_, rules_, opts.modal) {
    payoff.validate();
    spec.validate();
    require(spec.delta < tilted_.min_rate(), Errc::TiltOutOfDomain,
            "damping must stay below every tilted mark rate");
    transform_.resize(spec.N_y);
    transform_neg_.resize(spec.N_y);
    for (int j = 0; j < spec.N_y; ++j) {
      transform_[j] = capped_call_transform(payoff, spec.delta, spec.y(j));
      transform_neg_[j] = capped_call_transform(payoff, spec.delta, -spec.y(j));
    }
  }

  void run() {
    modes_ = sweep(solver_, spec_, opts_.threads);
  }

  bool solved() const noexcept { return !modes_.empty(); }

  /// F(0, lambda, eta_j) for every j, read off the intensity grid with a
  /// clamped PCHIP interpolant.
  std::vector<std::complex<double>> modal_at(double lambda) const {
    require(solved(), Errc::InvalidArgument, "run() must be called before reading prices");
    std::vector<std::complex<double>> out(modes_.size());
    const auto nodes = solver_.nodes();
    const Stencil s = make_stencil(nodes, lambda, InterpMode::pchip, Boundary::clamp);
    std::vector<std::complex<double>> slopes(nodes.size());
    for (std::size_t j = 0; j < modes_.size(); ++j) {
      pchip_slopes<std::complex<double>>(nodes, modes_[j], slopes);
      out[j] = apply_stencil<std::complex<double>>(s, modes_[j], slopes);
    }
    return out;
  }

  PriceResult price_at(double lambda0, double u0) const {
    auto modal = modal_at(lambda0);
    PriceResult res = invert_price(modal, transform_, spec_, u0, transform_neg_);
    res.boundary_hit = boundary_hit();
    if (opts_.keep_modal) res.modal = std::move(modal);
    return res;
  }

  PriceResult price() const { return price_at(model_.lambda0, model_.u0); }

  double boundary_hit() const { return boundary_hit_ratio(solver_.nodes(), model_.beta, tilted_, rules_); }
  CflReport cfl() const { return check_cfl(solver_.grid(), spec_.delta, tilted_, rules_); }

  const ModalSolver& solver() const noexcept { return solver_; }
  const GammaMixture& tilted() const noexcept { return tilted_; }
  const ComponentRules& rules() const noexcept { return rules_; }
  const BromwichSpec& spec() const noexcept { return spec_; }
  std::span<const std::complex<double>> transform() const noexcept { return transform_; }
  const std::vector<std::vector<std::complex<double>>>& modes() const noexcept { return modes_; }

  /// Runs solver.solve(eta_j) for every frequency of `spec`.
  static std::vector<std::vector<std::complex<double>>> sweep(const ModalSolver& solver, const BromwichSpec& spec,
                                                              unsigned threads = 0) {
    std::vector<std::vector<std::complex<double>>> out(spec.N_y);
    unsigned n_threads = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(spec.N_y));
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
      for (int j = next++; j < spec.N_y; j = next++) {
        try {
          out[j] = solver.solve(spec.eta(j));
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    };
    if (n_threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
    return out;
  }

 private:
  ModelParams model_;
  GammaMixture tilted_;
  CappedCallPayoff payoff_;
  BromwichSpec spec_;
  PriceOptions opts_;
  ComponentRules rules_;
  ModalSolver solver_;
  std::vector<std::complex<double>> transform_;
  std::vector<std::complex<double>> transform_neg_;
  std::vector<std::vector<std::complex<double>>> modes_;
};

/// Full pipeline: tilt, rules, one modal solve per frequency, transforms,
/// Simpson inversion at (lambda0, u0), boundary diagnostic.
inline PriceResult price(const ModelParams& model, const GammaMixture& mix, double theta,
                         const CappedCallPayoff& payoff, const SolverGrid& grid, const BromwichSpec& spec,
                         PriceOptions opts = {}) {
  BromwichPricer pricer(model, mix, theta, payoff, grid, spec, opts);
  pricer.run();
  return pricer.price();
}

}  // namespace cumjump
