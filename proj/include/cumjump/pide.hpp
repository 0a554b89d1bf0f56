#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "interp.hpp"
#include "marks.hpp"
#include "quadrature.hpp"

namespace cumjump {

/// Uniform (t, lambda) grid: nodes lambda_i = lambda_min + i h, i = 0..N_lambda,
/// and N_t backward steps of size dt with N_t dt = T.
struct SolverGrid {
  double lambda_min = 0.0;
  double lambda_max = 450.0;
  int N_lambda = 600;
  double dt = 1.0 / 365.0;
  int N_t = 150;

  /// Rounds T / dt_target to the nearest step count and shrinks or stretches
  /// dt so the steps tile [0, T] exactly.
  static SolverGrid make(double lambda_min, double lambda_max, int N_lambda, double T, double dt_target) {
    require(std::isfinite(T) && T > 0.0, Errc::InvalidGrid, "horizon must be positive");
    require(std::isfinite(dt_target) && dt_target > 0.0, Errc::InvalidGrid, "dt must be positive");
    SolverGrid g;
    g.lambda_min = lambda_min;
    g.lambda_max = lambda_max;
    g.N_lambda = N_lambda;
    g.N_t = std::max(1, static_cast<int>(std::lround(T / dt_target)));
    g.dt = T / g.N_t;
    g.validate(T);
    return g;
  }

  void validate(double T) const {
    require(std::isfinite(lambda_min) && std::isfinite(lambda_max) && lambda_min < lambda_max, Errc::InvalidGrid,
            "need lambda_min < lambda_max");
    require(lambda_min >= 0.0, Errc::InvalidGrid, "intensity grid must start at a nonnegative value");
    require(N_lambda >= 2, Errc::InvalidGrid, "need at least two lambda cells");
    require(dt > 0.0 && N_t >= 1, Errc::InvalidGrid, "need a positive time step");
    require(std::abs(N_t * dt - T) <= 1e-12 * std::max(1.0, T), Errc::InvalidGrid, "N_t * dt must equal T");
  }

  double h() const noexcept { return (lambda_max - lambda_min) / N_lambda; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(N_lambda) + 1; }
  double node(std::size_t i) const noexcept {
    return i == static_cast<std::size_t>(N_lambda) ? lambda_max : lambda_min + static_cast<double>(i) * h();
  }
  std::vector<double> nodes() const {
    std::vector<double> x(size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = node(i);
    return x;
  }
};

/// Tridiagonal matrix: sub[i] = A(i+1, i), super[i] = A(i, i+1).
struct TriDiag {
  std::vector<double> sub;
  std::vector<double> diag;
  std::vector<double> super;

  std::size_t size() const noexcept { return diag.size(); }

  template <class T>
  std::vector<T> multiply(std::span<const T> x) const {
    const std::size_t n = size();
    std::vector<T> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      T v = diag[i] * x[i];
      if (i > 0) v += sub[i - 1] * x[i - 1];
      if (i + 1 < n) v += super[i] * x[i + 1];
      y[i] = v;
    }
    return y;
  }
};

/// I - dt L_imp with upwind drift and implicit discount:
///   A(i,i)   = 1 + dt ((mu+ - mu-) / h + r)
///   A(i,i-1) = dt mu- / h,   A(i,i+1) = -dt mu+ / h.
/// Differences that would reach past the grid are dropped (ghost node with
/// zero gradient), which is the Neumann condition at lambda_min and is never
/// triggered at lambda_max when lambda_max > lambda_bar since the drift points
/// inward there.
inline TriDiag build_implicit_matrix(const SolverGrid& grid, const ModelParams& model) {
  const std::size_t n = grid.size();
  const double h = grid.h();
  TriDiag A;
  A.diag.resize(n);
  A.sub.assign(n - 1, 0.0);
  A.super.assign(n - 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = model.drift(grid.node(i));
    const double up = (i + 1 < n) ? std::max(mu, 0.0) : 0.0;
    const double down = (i > 0) ? std::min(mu, 0.0) : 0.0;
    A.diag[i] = 1.0 + grid.dt * ((up - down) / h + model.r);
    if (i > 0) A.sub[i - 1] = grid.dt * down / h;
    if (i + 1 < n) A.super[i] = -grid.dt * up / h;
  }
  return A;
}

/// LU factors of a tridiagonal matrix (no pivoting; valid for diagonally
/// dominant systems). Factor once, solve many right-hand sides.
class ThomasFactor {
 public:
  explicit ThomasFactor(const TriDiag& A) : sub_(A.sub), cprime_(A.size()), inv_denom_(A.size()) {
    const std::size_t n = A.size();
    require(n >= 1 && A.sub.size() + 1 == n && A.super.size() + 1 == n, Errc::DimensionMismatch,
            "tridiagonal band lengths are inconsistent");
    double denom = A.diag[0];
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) denom = A.diag[i] - A.sub[i - 1] * cprime_[i - 1];
      require(denom != 0.0 && std::isfinite(denom), Errc::SingularMatrix, "zero pivot in Thomas elimination");
      inv_denom_[i] = 1.0 / denom;
      cprime_[i] = (i + 1 < n) ? A.super[i] * inv_denom_[i] : 0.0;
    }
  }

  std::size_t size() const noexcept { return inv_denom_.size(); }

  template <class T>
  void solve_in_place(std::span<T> x) const {
    const std::size_t n = size();
    require(x.size() == n, Errc::DimensionMismatch, "right-hand side has the wrong length");
    x[0] *= inv_denom_[0];
    for (std::size_t i = 1; i < n; ++i) x[i] = (x[i] - sub_[i - 1] * x[i - 1]) * inv_denom_[i];
    for (std::size_t i = n - 1; i-- > 0;) x[i] -= cprime_[i] * x[i + 1];
  }

 private:
  std::vector<double> sub_;
  std::vector<double> cprime_;
  std::vector<double> inv_denom_;
};

template <class T>
std::vector<T> thomas_solve(const TriDiag& A, std::span<const T> rhs) {
  std::vector<T> x(rhs.begin(), rhs.end());
  ThomasFactor(A).solve_in_place<T>(x);
  return x;
}

/// F(t_n, lambda_i, eta) on the whole grid at one time level.
struct ModalSurface {
  std::complex<double> eta;
  std::vector<std::complex<double>> values;
  int time_index = 0;
};

struct ModalOptions {
  InterpMode interp = InterpMode::linear;
  Boundary boundary = Boundary::clamp;
  /// Replace the implicit-Euler discount (1 + dt r)^{-N_t} accumulated by the
  /// steps with the exact factor e^{-r T}. The correction is a global scalar
  /// (1 + dt r)^{N_t} e^{-r T}; the steps themselves are unchanged.
  bool exact_discount = true;
};

/// Backward IMEX solver for one (grid, model, tilted mark law). Holds the
/// factorized implicit matrix and the precomputed jump stencils; immutable
/// after construction, so one instance serves concurrent frequency solves.
class ModalSolver {
 public:
  ModalSolver(const SolverGrid& grid, const ModelParams& model, const GammaMixture& tilted,
              const ComponentRules& rules, ModalOptions opts = {})
      : grid_(grid),
        model_(model),
        tilted_(tilted),
        opts_(opts),
        nodes_(grid.nodes()),
        A_(build_implicit_matrix(grid, model)),
        lu_(A_),
        jump_(nodes_, model.beta, tilted, rules, opts.interp, opts.boundary) {
    model.validate();
    grid.validate(model.T);
  }

  const SolverGrid& grid() const noexcept { return grid_; }
  const ModelParams& model() const noexcept { return model_; }
  const TriDiag& matrix() const noexcept { return A_; }
  const JumpOperator& jump_operator() const noexcept { return jump_; }
  std::span<const double> nodes() const noexcept { return nodes_; }

  ModalSurface terminal(std::complex<double> eta) const {
    check_eta(eta);
    return {eta, std::vector<std::complex<double>>(nodes_.size(), 1.0), grid_.N_t};
  }

  /// One IMEX-Euler step t_{n+1} -> t_n:
  ///   A F^n = (1 - dt lambda_i) F^{n+1}_i + dt lambda_i Q_i^{n+1}.
  ModalSurface step(const ModalSurface& next) const {
    require(next.time_index >= 1, Errc::InvalidArgument, "cannot step before t = 0");
    require(next.values.size() == nodes_.size(), Errc::DimensionMismatch, "surface does not match the grid");
    check_eta(next.eta);
    const auto coef = jump_.coefficients(next.eta);
    ModalSurface out{next.eta, next.values, next.time_index - 1};
    std::vector<std::complex<double>> gain(nodes_.size()), slopes(nodes_.size());
    advance(out.values, coef, gain, slopes);
    return out;
  }

  /// F(0, ., eta) on the whole lambda grid.
  std::vector<std::complex<double>> solve(std::complex<double> eta) const {
    check_eta(eta);
    const std::size_t n = nodes_.size();
    std::vector<std::complex<double>> F(n, 1.0), gain(n), slopes(n);
    const auto coef = jump_.coefficients(eta);
    for (int step = 0; step < grid_.N_t; ++step) advance(F, coef, gain, slopes);
    if (opts_.exact_discount && model_.r != 0.0) {
      const double c = std::exp(grid_.N_t * (std::log1p(grid_.dt * model_.r) - grid_.dt * model_.r));
      for (auto& v : F) v *= c;
    }
    return F;
  }

  ModalSurface solve_surface(std::complex<double> eta) const { return {eta, solve(eta), 0}; }

 private:
  void check_eta(std::complex<double> eta) const {
    require(eta.real() < tilted_.min_rate(), Errc::TiltOutOfDomain,
            "Re(eta) must stay below every tilted mark rate");
  }

  void advance(std::vector<std::complex<double>>& F, std::span<const std::complex<double>> coef,
               std::vector<std::complex<double>>& gain, std::vector<std::complex<double>>& slopes) const {
    jump_.apply(F, coef, slopes, gain);
    const double dt = grid_.dt;
    for (std::size_t i = 0; i < F.size(); ++i) {
      const double a = dt * nodes_[i];
      F[i] = (1.0 - a) * F[i] + a * gain[i];
    }
    lu_.solve_in_place<std::complex<double>>(F);
  }

  SolverGrid grid_;
  ModelParams model_;
  GammaMixture tilted_;
  ModalOptions opts_;
  std::vector<double> nodes_;
  TriDiag A_;
  ThomasFactor lu_;
  JumpOperator jump_;
};

/// One backward step with a freshly assembled operator. Convenience wrapper;
/// sweeps should keep a ModalSolver alive instead.
inline ModalSurface imex_step(const ModalSurface& next, const SolverGrid& grid, const ModelParams& model,
                              const GammaMixture& tilted, const ComponentRules& rules, ModalOptions opts = {}) {
  return ModalSolver(grid, model, tilted, rules, opts).step(next);
}

inline ModalSurface solve_modal(std::complex<double> eta, const SolverGrid& grid, const ModelParams& model,
                                const GammaMixture& tilted, const ComponentRules& rules, ModalOptions opts = {}) {
  return ModalSolver(grid, model, tilted, rules, opts).solve_surface(eta);
}

/// Computable Lipschitz bound of the explicit jump operator:
///   max_i lambda_i (sum_m pi_m / Gamma(k_m) sum_q w_mq e^{delta z_mq / b_m} + 1).
inline double lipschitz_constant(std::span<const double> lambda_nodes, double delta, const GammaMixture& tilted,
                                 const ComponentRules& rules) {
  require(delta < tilted.min_rate(), Errc::TiltOutOfDomain, "delta must stay below every tilted rate");
  double lam = 0.0;
  for (double x : lambda_nodes) lam = std::max(lam, x);
  if (lam == 0.0) return 0.0;
  return lam * (gl_moment(delta, tilted, rules) + 1.0);
}

struct CflReport {
  double lipschitz = 0.0;
  double dt_times_lipschitz = 0.0;
  bool satisfied = false;
};

/// Sufficient explicit CFL condition dt L < 1. Large lambda_max violates it
/// long before the scheme misbehaves, so callers treat a miss as a warning.
inline CflReport check_cfl(const SolverGrid& grid, double delta, const GammaMixture& tilted,
                           const ComponentRules& rules) {
  CflReport rep;
  rep.lipschitz = lipschitz_constant(grid.nodes(), delta, tilted, rules);
  rep.dt_times_lipschitz = grid.dt * rep.lipschitz;
  rep.satisfied = rep.dt_times_lipschitz < 1.0;
  return rep;
}

/// Uniform bound |F(t, ., delta + iy)| <= exp((T - t)(lambda_max (M* - 1) - r)), M* = mgf at delta.
inline double mode_bound(const SolverGrid& grid, const ModelParams& model, const GammaMixture& tilted, double delta,
                         double t) {
  return std::exp((model.T - t) * (grid.lambda_max * (mgf(tilted, delta) - 1.0) - model.r));
}

}  // namespace cumjump
