#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "error.hpp"
#include "interp.hpp"
#include "marks.hpp"
#include "special.hpp"

namespace cumjump {

/// Gauss rule for the weight z^alpha e^{-z} on (0, inf).
struct GLRule {
  double alpha = 0.0;
  std::vector<double> nodes;
  std::vector<double> weights;
  /// weights / Gamma(alpha + 1); overflow-free even for large alpha.
  std::vector<double> normalized_weights;

  std::size_t size() const noexcept { return nodes.size(); }
};

namespace detail {

// Orthonormal Laguerre recurrence scaled so that q_0 = 1:
//   sqrt(b_{k+1}) q_{k+1} = (x - a_k) q_k - sqrt(b_k) q_{k-1},
//   a_k = 2k + alpha + 1,  b_k = k (k + alpha).
// Returns q_n(x), q_n'(x) and sum_{k<n} q_k(x)^2.
struct LaguerreEval {
  double value;
  double derivative;
  double christoffel_sum;
};

inline LaguerreEval laguerre_orthonormal(double alpha, int n, double x) {
  double q_prev = 0.0, q = 1.0;
  double dq_prev = 0.0, dq = 0.0;
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    sum += q * q;
    const double a = 2.0 * k + alpha + 1.0;
    const double sb = std::sqrt(k * (k + alpha));
    const double sb_next = std::sqrt((k + 1.0) * (k + 1.0 + alpha));
    const double q_next = ((x - a) * q - sb * q_prev) / sb_next;
    const double dq_next = ((x - a) * dq + q - sb * dq_prev) / sb_next;
    q_prev = q;
    q = q_next;
    dq_prev = dq;
    dq = dq_next;
  }
  return {q, dq, sum};
}

}  // namespace detail

/// Generalized Gauss-Laguerre rule with Q points.
///
/// Nodes are the eigenvalues of the symmetric Jacobi matrix (Golub-Welsch),
/// polished by Newton steps on the degree-Q orthonormal polynomial. Weights
/// use the squared first eigenvector component, evaluated through the
/// recurrence as Gamma(alpha+1) / sum_k q_k(z)^2 so that tiny tail weights keep
/// full relative accuracy.
inline GLRule gauss_laguerre(double alpha, int Q) {
  require(std::isfinite(alpha) && alpha > -1.0, Errc::InvalidAlpha, "alpha must exceed -1");
  require(Q >= 1, Errc::InvalidArgument, "rule needs at least one node");

  Eigen::VectorXd diag(Q), sub(std::max(Q - 1, 0));
  for (int j = 0; j < Q; ++j) diag[j] = 2.0 * j + alpha + 1.0;
  for (int j = 1; j < Q; ++j) sub[j - 1] = std::sqrt(j * (j + alpha));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  require(solver.info() == Eigen::Success, Errc::EigenFailure, "Jacobi eigensolve did not converge");

  GLRule rule;
  rule.alpha = alpha;
  rule.nodes.resize(Q);
  rule.weights.resize(Q);
  rule.normalized_weights.resize(Q);
  const double log_mu0 = special::log_gamma(alpha + 1.0);
  for (int q = 0; q < Q; ++q) {
    double z = solver.eigenvalues()[q];
    for (int it = 0; it < 8; ++it) {
      const auto ev = detail::laguerre_orthonormal(alpha, Q, z);
      const double step = ev.value / ev.derivative;
      z -= step;
      if (std::abs(step) <= 4e-16 * std::abs(z)) break;
    }
    const auto ev = detail::laguerre_orthonormal(alpha, Q, z);
    rule.nodes[q] = z;
    rule.normalized_weights[q] = 1.0 / ev.christoffel_sum;
    rule.weights[q] = std::exp(log_mu0) / ev.christoffel_sum;
  }
  for (int q = 0; q + 1 < Q; ++q)
    require(rule.nodes[q] > 0.0 && rule.nodes[q] < rule.nodes[q + 1], Errc::EigenFailure,
            "Gauss-Laguerre nodes are not strictly increasing and positive");
  require(rule.nodes.front() > 0.0, Errc::EigenFailure, "Gauss-Laguerre node is not positive");
  return rule;
}

/// Process-wide cache of rules keyed by (alpha, Q). Lookups lock briefly;
/// returned rules are immutable and shared.
class RuleCache {
 public:
  std::shared_ptr<const GLRule> get(double alpha, int Q) {
    std::lock_guard lock(mu_);
    auto& slot = rules_[{alpha, Q}];
    if (!slot) slot = std::make_shared<const GLRule>(gauss_laguerre(alpha, Q));
    return slot;
  }

  static RuleCache& global() {
    static RuleCache cache;
    return cache;
  }

 private:
  std::mutex mu_;
  std::map<std::pair<double, int>, std::shared_ptr<const GLRule>> rules_;
};

/// One rule per mixture component, with alpha_m = k_m - 1.
using ComponentRules = std::vector<std::shared_ptr<const GLRule>>;

inline ComponentRules make_component_rules(const GammaMixture& mix, int Q) {
  ComponentRules rules;
  rules.reserve(mix.size());
  for (std::size_t m = 0; m < mix.size(); ++m) rules.push_back(RuleCache::global().get(mix.shape(m) - 1.0, Q));
  return rules;
}

namespace detail {
inline void check_rules(const GammaMixture& mix, const ComponentRules& rules) {
  require(rules.size() == mix.size(), Errc::RuleMismatch, "one rule per mixture component is required");
  for (std::size_t m = 0; m < mix.size(); ++m)
    require(rules[m] && std::abs(rules[m]->alpha - (mix.shape(m) - 1.0)) <= 1e-12, Errc::RuleMismatch,
            "rule " + std::to_string(m) + " does not match alpha = k - 1");
}
}  // namespace detail

/// Nonlocal jump gain at grid node lambda_i (reference path):
///   sum_m pi_m / Gamma(k_m) sum_q w_mq e^{eta z_mq / b_m} F(lambda_i + beta z_mq / b_m)
/// with F read through the interpolant (its boundary policy handles nodes
/// past the grid).
inline std::complex<double> jump_gain(const Interpolant<std::complex<double>>& F, double lambda_i,
                                      std::complex<double> eta, double beta, const GammaMixture& tilted,
                                      const ComponentRules& rules) {
  detail::check_rules(tilted, rules);
  require(eta.real() < tilted.min_rate(), Errc::TiltOutOfDomain, "Re(eta) must be below every tilted rate");
  std::complex<double> acc = 0.0;
  for (std::size_t m = 0; m < tilted.size(); ++m) {
    const GLRule& rule = *rules[m];
    const double b = tilted.rate(m);
    std::complex<double> inner = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double x = rule.nodes[q] / b;
      inner += rule.normalized_weights[q] * std::exp(eta * x) * F(lambda_i + beta * x);
    }
    acc += tilted.weight(m) * inner;
  }
  return acc;
}

/// Discrete envelope sum_m pi_m / Gamma(k_m) sum_q w_mq e^{delta z_mq / b_m}.
/// Equals the quadrature of the mixture mgf at delta.
inline double gl_moment(double delta, const GammaMixture& tilted, const ComponentRules& rules) {
  detail::check_rules(tilted, rules);
  double acc = 0.0;
  for (std::size_t m = 0; m < tilted.size(); ++m) {
    const GLRule& rule = *rules[m];
    double inner = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q)
      inner += rule.normalized_weights[q] * std::exp(delta * rule.nodes[q] / tilted.rate(m));
    acc += tilted.weight(m) * inner;
  }
  return acc;
}

/// Quadrature-weighted share of jump-gain evaluations whose shifted argument
/// lambda_i + beta z / b_m lands beyond lambda_max, averaged over the grid.
inline double boundary_hit_ratio(std::span<const double> lambda_nodes, double beta, const GammaMixture& tilted,
                                 const ComponentRules& rules) {
  detail::check_rules(tilted, rules);
  if (beta == 0.0 || lambda_nodes.empty()) return 0.0;
  const double lambda_max = lambda_nodes.back();
  double total = 0.0;
  for (double lam : lambda_nodes) {
    double out = 0.0;
    for (std::size_t m = 0; m < tilted.size(); ++m) {
      const GLRule& rule = *rules[m];
      double mass = 0.0;
      for (std::size_t q = 0; q < rule.size(); ++q)
        if (lam + beta * rule.nodes[q] / tilted.rate(m) > lambda_max) mass += rule.normalized_weights[q];
      out += tilted.weight(m) * mass;
    }
    total += out;
  }
  return std::min(1.0, total / static_cast<double>(lambda_nodes.size()));
}

/// Jump gain on every grid node with all interpolation stencils precomputed.
/// Stencils are real and frequency independent; only the exponential
/// factors e^{eta z / b} change per frequency.
class JumpOperator {
 public:
  JumpOperator(std::span<const double> lambda_nodes, double beta, const GammaMixture& tilted,
               const ComponentRules& rules, InterpMode mode, Boundary boundary)
      : mode_(mode), nodes_(lambda_nodes.begin(), lambda_nodes.end()) {
    detail::check_rules(tilted, rules);
    detail::check_grid(nodes_);
    for (std::size_t m = 0; m < tilted.size(); ++m) {
      const GLRule& rule = *rules[m];
      for (std::size_t q = 0; q < rule.size(); ++q) {
        shifts_.push_back(rule.nodes[q] / tilted.rate(m));
        masses_.push_back(tilted.weight(m) * rule.normalized_weights[q]);
      }
    }
    const std::size_t E = shifts_.size();
    const std::size_t N = nodes_.size();
    idx_.resize(N * E);
    c0_.resize(N * E);
    c1_.resize(N * E);
    if (mode == InterpMode::pchip) {
      c2_.resize(N * E);
      c3_.resize(N * E);
    }
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t e = 0; e < E; ++e) {
        const Stencil s = make_stencil(nodes_, nodes_[i] + beta * shifts_[e], mode, boundary);
        const std::size_t k = i * E + e;
        idx_[k] = static_cast<std::uint32_t>(s.j);
        c0_[k] = s.c0;
        c1_[k] = s.c1;
        if (mode == InterpMode::pchip) {
          c2_[k] = s.c2;
          c3_[k] = s.c3;
        }
      }
  }

  std::size_t entries_per_node() const noexcept { return shifts_.size(); }
  std::span<const double> nodes() const noexcept { return nodes_; }
  InterpMode mode() const noexcept { return mode_; }

  /// Per-frequency quadrature coefficients pi_m w_mq / Gamma(k_m) e^{eta z_mq / b_m}.
  std::vector<std::complex<double>> coefficients(std::complex<double> eta) const {
    std::vector<std::complex<double>> c(shifts_.size());
    for (std::size_t e = 0; e < c.size(); ++e) c[e] = masses_[e] * std::exp(eta * shifts_[e]);
    return c;
  }

  /// out[i] = jump gain at node i. `slopes` is scratch space in pchip mode.
  void apply(std::span<const std::complex<double>> F, std::span<const std::complex<double>> coef,
             std::span<std::complex<double>> slopes, std::span<std::complex<double>> out) const {
    const std::size_t E = shifts_.size();
    const std::size_t N = nodes_.size();
    if (mode_ == InterpMode::pchip) pchip_slopes<std::complex<double>>(nodes_, F, slopes);
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t base = i * E;
      double re = 0.0, im = 0.0;
      for (std::size_t e = 0; e < E; ++e) {
        const std::size_t k = base + e;
        const std::size_t j = idx_[k];
        std::complex<double> v = c0_[k] * F[j] + c1_[k] * F[j + 1];
        if (mode_ == InterpMode::pchip) v += c2_[k] * slopes[j] + c3_[k] * slopes[j + 1];
        const std::complex<double> c = coef[e];
        re += c.real() * v.real() - c.imag() * v.imag();
        im += c.real() * v.imag() + c.imag() * v.real();
      }
      out[i] = {re, im};
    }
  }

 private:
  InterpMode mode_;
  std::vector<double> nodes_;
  std::vector<double> shifts_;
  std::vector<double> masses_;
  std::vector<std::uint32_t> idx_;
  std::vector<double> c0_, c1_, c2_, c3_;
};

}  // namespace cumjump
