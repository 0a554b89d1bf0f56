#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "error.hpp"
#include "marks.hpp"
#include "mc.hpp"
#include "special.hpp"

namespace cumjump {

/// Solves log k - psi(k) = gap for the Gamma shape (weighted MLE).
inline double newton_gamma_shape(double gap) {
  require(std::isfinite(gap) && gap > 0.0, Errc::GapNonPositive, "log-mean gap must be positive");
  double k = (3.0 - gap + std::sqrt((gap - 3.0) * (gap - 3.0) + 24.0 * gap)) / (12.0 * gap);
  // g is decreasing and convex in k, so Newton from any point converges once
  // it stays positive; halve toward 0 when a step overshoots.
  for (int it = 0; it < 100; ++it) {
    const double g = special::log_minus_digamma(k) - gap;
    const double dg = 1.0 / k - special::trigamma(k);
    double next = k - g / dg;
    if (!(next > 0.0)) next = 0.5 * k;
    if (std::abs(next - k) <= 1e-15 * k) {
      k = next;
      break;
    }
    k = next;
  }
  return k;
}

enum class EMInit { kmeans_moments, user_supplied };

struct EMConfig {
  std::size_t M = 2;
  int max_iter = 500;
  /// Relative change of the log-likelihood that stops the iteration.
  double tol = 1e-10;
  double shape_floor = 1e-2;
  double rate_floor = 1e-2;
  EMInit init = EMInit::kmeans_moments;
  /// Starting point when init == user_supplied.
  std::optional<GammaMixture> start;

  void validate() const {
    require(M >= 1, Errc::InvalidArgument, "need at least one component");
    require(tol > 0.0, Errc::InvalidArgument, "tol must be positive");
    require(max_iter >= 1, Errc::InvalidArgument, "max_iter must be >= 1");
    require(shape_floor > 0.0 && rate_floor > 0.0, Errc::InvalidArgument, "floors must be positive");
    require(init != EMInit::user_supplied || (start && start->size() == M), Errc::InvalidArgument,
            "user-supplied start must have M components");
  }
};

struct EMResult {
  GammaMixture mixture;
  /// Log-likelihood of the parameters entering each E-step, then of the final fit.
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double gamma_log_pdf(double x, double k, double b) {
  return k * std::log(b) + (k - 1.0) * std::log(x) - b * x - std::lgamma(k);
}

inline void moment_match(double mean, double var, double k_floor, double b_floor, double& k, double& b) {
  k = std::max(mean * mean / var, k_floor);
  b = std::max(mean / var, b_floor);
}

// Lloyd iterations on the line from quantile-spaced centres, then per-cluster
// moment matching.
inline GammaMixture kmeans_moment_start(std::span<const double> x, const EMConfig& cfg) {
  const std::size_t n = x.size();
  const std::size_t M = cfg.M;
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> centre(M);
  for (std::size_t m = 0; m < M; ++m)
    centre[m] = sorted[std::min(n - 1, static_cast<std::size_t>((m + 0.5) * n / M))];
  std::vector<std::size_t> label(n, 0);
  for (int it = 0; it < 100; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t m = 1; m < M; ++m)
        if (std::abs(x[i] - centre[m]) < std::abs(x[i] - centre[best])) best = m;
      changed |= (best != label[i]);
      label[i] = best;
    }
    std::vector<double> sum(M, 0.0);
    std::vector<std::size_t> cnt(M, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[label[i]] += x[i];
      ++cnt[label[i]];
    }
    for (std::size_t m = 0; m < M; ++m)
      if (cnt[m]) centre[m] = sum[m] / cnt[m];
    if (!changed && it > 0) break;
  }
  const double gmean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double gvar = 0.0;
  for (double v : x) gvar += (v - gmean) * (v - gmean);
  gvar /= (n - 1);
  std::vector<double> w(M), k(M), b(M);
  for (std::size_t m = 0; m < M; ++m) {
    double s = 0.0, s2 = 0.0;
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (label[i] == m) {
        s += x[i];
        s2 += x[i] * x[i];
        ++c;
      }
    const double mean = c ? s / c : gmean;
    const double var = (c >= 2) ? std::max((s2 - c * mean * mean) / (c - 1), 1e-12 * mean * mean) : gvar;
    moment_match(mean, var, cfg.shape_floor, cfg.rate_floor, k[m], b[m]);
    w[m] = std::max<double>(c, 1.0);
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return GammaMixture::make(w, k, b);
}

}  // namespace detail

/// Constant-weight Gamma mixture by EM. The M-step is the exact weighted MLE:
/// pi_m = mean responsibility, k_m from newton_gamma_shape on the gap
/// log(weighted mean) - weighted mean of log, b_m = k_m / weighted mean.
inline EMResult em_fit(std::span<const double> samples, const EMConfig& cfg) {
  cfg.validate();
  for (double v : samples)
    require(std::isfinite(v) && v > 0.0, Errc::NonPositiveSample, "mark samples must be finite and positive");
  require(samples.size() >= 2 * cfg.M, Errc::DegenerateData, "need at least 2M samples");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  require(*lo < *hi, Errc::DegenerateData, "all samples are equal");

  const std::size_t n = samples.size();
  const std::size_t M = cfg.M;
  GammaMixture mix =
      cfg.init == EMInit::user_supplied ? *cfg.start : detail::kmeans_moment_start(samples, cfg);
  std::vector<double> logx(n);
  for (std::size_t i = 0; i < n; ++i) logx[i] = std::log(samples[i]);

  std::vector<double> resp(n * M);
  auto e_step = [&](const GammaMixture& g) {
    double ll = 0.0;
    std::vector<double> lp(M);
    for (std::size_t i = 0; i < n; ++i) {
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < M; ++m) {
        lp[m] = (g.weight(m) > 0.0 ? std::log(g.weight(m)) : -std::numeric_limits<double>::infinity()) +
                detail::gamma_log_pdf(samples[i], g.shape(m), g.rate(m));
        top = std::max(top, lp[m]);
      }
      double s = 0.0;
      for (std::size_t m = 0; m < M; ++m) s += std::exp(lp[m] - top);
      const double lse = top + std::log(s);
      ll += lse;
      for (std::size_t m = 0; m < M; ++m) resp[i * M + m] = std::exp(lp[m] - lse);
    }
    return ll;
  };

  EMResult out{mix, {}, 0, false};
  double ll = e_step(mix);
  out.log_likelihood.push_back(ll);
  for (int it = 0; it < cfg.max_iter; ++it) {
    std::vector<double> w(M), k(M), b(M);
    for (std::size_t m = 0; m < M; ++m) {
      double Nm = 0.0, sx = 0.0, slx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * M + m];
        Nm += r;
        sx += r * samples[i];
        slx += r * logx[i];
      }
      require(Nm > 1e-10 * static_cast<double>(n), Errc::DegenerateData, "a mixture component lost all its mass");
      const double xbar = sx / Nm;
      const double gap = std::log(xbar) - slx / Nm;
      require(gap > 0.0, Errc::DegenerateData, "a mixture component collapsed onto a single value");
      k[m] = std::max(newton_gamma_shape(gap), cfg.shape_floor);
      b[m] = std::max(k[m] / xbar, cfg.rate_floor);
      w[m] = Nm / static_cast<double>(n);
    }
    mix = GammaMixture::make(w, k, b);
    const double next = e_step(mix);
    out.log_likelihood.push_back(next);
    out.iterations = it + 1;
    const bool done = std::abs(next - ll) <= cfg.tol * std::abs(ll);
    ll = next;
    if (done) {
      out.converged = true;
      break;
    }
  }
  out.mixture = mix;
  return out;
}

struct SwapQuote {
  double t1 = 0.0;
  double t2 = 0.0;
  double price = 0.0;
};

struct ThetaCalibConfig {
  double theta_lo = 0.0;
  double theta_hi = 0.8;
  /// Margin kept between theta_hi and the smallest mark rate.
  double eps_mom = 1e-3;
  double tol_theta = 1e-4;
  /// Stop once two successive best-value improvements are both below this.
  double tol_objective = 0.0;
  int max_iter = 200;
  bool allow_negative = false;
  std::vector<SwapQuote> quotes;
  MCConfig mc;
};

struct ThetaCalibResult {
  double theta_star = 0.0;
  double objective = 0.0;
  int iterations = 0;
};

/// Brent minimization (golden section with parabolic steps) of f over [a, b].
struct BrentResult {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
};

inline BrentResult brent_minimize(const std::function<double(double)>& f, double a, double b, double tol_x,
                                  double tol_f = 0.0, int max_iter = 200) {
  require(a < b, Errc::BracketInvalid, "bracket needs lo < hi");
  constexpr double cgold = 0.3819660112501051;
  constexpr double zeps = 1e-14;
  double x = a + cgold * (b - a), w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  double prev_gain = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < max_iter; ++it) {
    const double xm = 0.5 * (a + b);
    const double tol1 = 0.5 * tol_x + zeps * std::abs(x);
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (!(std::abs(p) >= std::abs(0.5 * q * etemp) || p <= q * (a - x) || p >= q * (b - x))) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = std::copysign(tol1, xm - x);
        golden = false;
      }
    }
    if (golden) {
      e = (x >= xm) ? a - x : b - x;
      d = cgold * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + std::copysign(tol1, d);
    const double fu = f(u);
    if (fu <= fx) {
      const double gain = fx - fu;
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
      if (tol_f > 0.0) {
        if (gain <= tol_f && prev_gain <= tol_f) {
          ++it;
          break;
        }
        prev_gain = gain;
      }
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return {x, fx, it};
}

/// Least-squares Esscher exponent against swap quotes. Every evaluation of the
/// objective reuses the same seed, so the simulated paths are shared across
/// theta and only the mark scaling and component choice move with it.
inline ThetaCalibResult calibrate_theta(const ModelParams& model, const GammaMixture& mix,
                                        const ThetaCalibConfig& cfg) {
  require(cfg.eps_mom > 0.0, Errc::BracketInvalid, "eps_mom must be positive");
  require(std::isfinite(cfg.theta_lo) && std::isfinite(cfg.theta_hi) && cfg.theta_lo < cfg.theta_hi,
          Errc::BracketInvalid, "bracket needs lo < hi");
  require(cfg.theta_hi < mix.min_rate() - cfg.eps_mom, Errc::BracketInvalid,
          "bracket must stay below the smallest mark rate");
  require(cfg.allow_negative || cfg.theta_lo >= 0.0, Errc::BracketInvalid,
          "negative tilts are disabled for this calibration");
  require(!cfg.quotes.empty(), Errc::InvalidArgument, "need at least one swap quote");
  std::vector<Window> windows;
  for (const SwapQuote& q : cfg.quotes) windows.push_back({q.t1, q.t2});
  auto objective = [&](double theta) {
    const auto res = price_swaps_mc(model, esscher_tilt(mix, theta), windows, cfg.mc);
    double phi = 0.0;
    for (std::size_t j = 0; j < res.size(); ++j) {
      const double e = res[j].estimate - cfg.quotes[j].price;
      phi += e * e;
    }
    require(std::isfinite(phi), Errc::ObjectiveNotFinite, "calibration objective is not finite");
    return phi;
  };
  const BrentResult br = brent_minimize(objective, cfg.theta_lo, cfg.theta_hi, cfg.tol_theta, cfg.tol_objective,
                                        cfg.max_iter);
  return {br.x, br.fx, br.iterations};
}

}  // namespace cumjump
