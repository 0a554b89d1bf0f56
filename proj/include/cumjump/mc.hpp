#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "bromwich.hpp"
#include "error.hpp"
#include "marks.hpp"

namespace cumjump {

struct MCConfig {
  std::size_t n_paths = 50000;
  std::uint64_t seed = 20240611;
  /// Dominating-rate inflation M = (1 + eps) max(lambda, lambda_bar).
  double epsilon_safety = 0.01;
  /// Odd paths reuse the streams of the preceding even path with every
  /// random word complemented.
  bool antithetic = false;
  unsigned threads = 0;

  void validate() const {
    require(n_paths >= 1, Errc::InvalidArgument, "need at least one path");
    require(std::isfinite(epsilon_safety) && epsilon_safety >= 0.0, Errc::InvalidArgument,
            "epsilon_safety must be >= 0");
  }
};

struct MCResult {
  double estimate = 0.0;
  /// NaN when fewer than two paths are available.
  double stderr_ = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n_paths = 0;
  double accept_ratio = 0.0;
};

/// SplitMix64 generator; also used to derive independent stream seeds.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state, bool complement = false) : state_(state), complement_(complement) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const result_type z = mix(state_ += 0x9e3779b97f4a7c15ULL);
    return complement_ ? ~z : z;
  }

  /// Uniform in (0, 1), never exactly 0 or 1.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Seed of stream `stream` for path `path` under master seed `seed`.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t path, std::uint64_t stream) {
    return mix(mix(mix(seed) ^ (path + 0x632be59bd9b4e019ULL)) ^ (stream * 0x9e3779b97f4a7c15ULL + 1));
  }

 private:
  std::uint64_t state_;
  bool complement_;
};

/// Random streams of one path. Event times and thinning draws come from one
/// stream; the mark of the n-th accepted event is drawn from its own stream,
/// so changing the mark law (e.g. the Esscher tilt) never shifts the draws of
/// later events.
class PathStreams {
 public:
  PathStreams(std::uint64_t seed, std::uint64_t path, bool antithetic)
      : seed_(seed),
        base_path_(antithetic ? path & ~std::uint64_t{1} : path),
        complement_(antithetic && (path & 1U)),
        clock_(SplitMix64::derive(seed, base_path_, 0), complement_) {}

  SplitMix64& clock() { return clock_; }
  SplitMix64 mark_stream(std::uint64_t event) const {
    return SplitMix64(SplitMix64::derive(seed_, base_path_, event + 1), complement_);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t base_path_;
  bool complement_;
  SplitMix64 clock_;
};

/// Draws a mark from the (tilted) mixture: the component by inverse CDF on
/// one uniform, then Gamma(k_m, 1) scaled by 1 / b_m.
inline double sample_mark(const GammaMixture& mix, SplitMix64& rng) {
  const double u = rng.uniform();
  std::size_t m = 0;
  double cdf = mix.weight(0);
  while (u > cdf && m + 1 < mix.size()) cdf += mix.weight(++m);
  std::gamma_distribution<double> gamma(mix.shape(m), 1.0);
  return gamma(rng) / mix.rate(m);
}

struct JumpEvent {
  double time = 0.0;
  double mark = 0.0;
  double lambda_after = 0.0;
};

struct PathOutcome {
  double lambda_T = 0.0;
  double U_T = 0.0;
  std::size_t n_events = 0;
  std::size_t n_candidates = 0;
  double min_lambda = 0.0;
  /// Sum of marks with event time in (t1, t2] for each requested window.
  std::vector<double> window_increments;
};

struct Window {
  double t1 = 0.0;
  double t2 = 0.0;
};

/// Exact simulation of (lambda, U) on [0, horizon] by thinning. Between
/// candidates lambda follows lambda_bar + (lambda - lambda_bar) e^{-kappa s};
/// the flow moves monotonically toward lambda_bar, so the rate
/// M = (1 + eps) max(lambda, lambda_bar) refreshed at every candidate
/// dominates it until the next candidate.
inline PathOutcome simulate_path(const ModelParams& model, const GammaMixture& tilted, double horizon,
                                 PathStreams& streams, double epsilon_safety, std::span<const Window> windows = {},
                                 const std::function<void(const JumpEvent&)>& on_event = {}) {
  PathOutcome out;
  out.window_increments.assign(windows.size(), 0.0);
  double s = 0.0;
  double lambda = model.lambda0;
  double U = model.u0;
  double min_between = lambda;
  SplitMix64& clock = streams.clock();
  while (true) {
    const double M = (1.0 + epsilon_safety) * std::max(lambda, model.lambda_bar);
    if (!(M > 0.0)) break;
    const double gap = -std::log(clock.uniform()) / M;
    if (s + gap > horizon) {
      lambda = model.lambda_bar + (lambda - model.lambda_bar) * std::exp(-model.kappa * (horizon - s));
      min_between = std::min(min_between, lambda);
      break;
    }
    s += gap;
    lambda = model.lambda_bar + (lambda - model.lambda_bar) * std::exp(-model.kappa * gap);
    min_between = std::min(min_between, lambda);
    ++out.n_candidates;
    if (lambda > M * (1.0 + 1e-12)) fail(Errc::DominatedRateViolated, "thinning rate no longer dominates the flow");
    if (clock.uniform() * M >= lambda) continue;
    SplitMix64 mark_rng = streams.mark_stream(out.n_events);
    const double x = sample_mark(tilted, mark_rng);
    ++out.n_events;
    U += x;
    lambda += model.beta * x;
    for (std::size_t w = 0; w < windows.size(); ++w)
      if (s > windows[w].t1 && s <= windows[w].t2) out.window_increments[w] += x;
    if (on_event) on_event({s, x, lambda});
  }
  out.lambda_T = lambda;
  out.U_T = U;
  out.min_lambda = min_between;
  return out;
}

namespace detail {

// Pairwise sum: result depends only on the values and their order.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline MCResult summarize(std::span<const double> values, double accept_ratio) {
  MCResult r;
  r.n_paths = values.size();
  const double n = static_cast<double>(values.size());
  r.estimate = pairwise_sum(values) / n;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!values.empty() && *lo == *hi) r.estimate = *lo;  // constant payoff: no rounding in mean or spread
  if (values.size() < 2) {
    r.stderr_ = std::numeric_limits<double>::quiet_NaN();
    r.ci_lo = r.ci_hi = r.estimate;
  } else {
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - r.estimate) * (values[i] - r.estimate);
    const double var = pairwise_sum(sq) / (n - 1.0);
    r.stderr_ = std::sqrt(var / n);
    r.ci_lo = r.estimate - 1.96 * r.stderr_;
    r.ci_hi = r.estimate + 1.96 * r.stderr_;
  }
  r.accept_ratio = accept_ratio;
  return r;
}

// Runs body(path) for every path over worker threads. body writes only its own slot.
template <class Body>
void for_each_path(std::size_t n_paths, unsigned threads, Body&& body) {
  unsigned n_threads = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, (n_paths + 1023) / 1024));
  if (n_threads <= 1) {
    for (std::size_t p = 0; p < n_paths; ++p) body(p);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto worker = [&] {
    constexpr std::size_t chunk = 256;
    for (std::size_t start = next.fetch_add(chunk); start < n_paths; start = next.fetch_add(chunk)) {
      try {
        for (std::size_t p = start; p < std::min(n_paths, start + chunk); ++p) body(p);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// e^{-rT} E[f(U_T)] under the tilted mark law.
inline MCResult price_capped_call_mc(const ModelParams& model, const GammaMixture& mix, double theta,
                                    const CappedCallPayoff& payoff, const MCConfig& cfg) {
  model.validate();
  payoff.validate();
  cfg.validate();
  const GammaMixture tilted = esscher_tilt(mix, theta);
  std::vector<double> values(cfg.n_paths);
  std::vector<std::size_t> candidates(cfg.n_paths), events(cfg.n_paths);
  const double disc = std::exp(-model.r * model.T);
  detail::for_each_path(cfg.n_paths, cfg.threads, [&](std::size_t p) {
    PathStreams streams(cfg.seed, p, cfg.antithetic);
    const PathOutcome o = simulate_path(model, tilted, model.T, streams, cfg.epsilon_safety);
    values[p] = disc * payoff(o.U_T);
    candidates[p] = o.n_candidates;
    events[p] = o.n_events;
  });
  std::size_t c = 0, e = 0;
  for (std::size_t p = 0; p < cfg.n_paths; ++p) {
    c += candidates[p];
    e += events[p];
  }
  return detail::summarize(values, c ? static_cast<double>(e) / static_cast<double>(c) : 1.0);
}

/// Discounted windowed increments e^{-r t2} (U_{t2} - U_{t1}) for several
/// windows from one set of paths (common random numbers across windows).
inline std::vector<MCResult> price_swaps_mc(const ModelParams& model, const GammaMixture& tilted,
                                            std::span<const Window> windows, const MCConfig& cfg) {
  model.validate();
  cfg.validate();
  double horizon = 0.0;
  for (const Window& w : windows) {
    require(std::isfinite(w.t1) && std::isfinite(w.t2) && w.t1 >= 0.0 && w.t2 >= w.t1, Errc::BadWindow,
            "swap window needs 0 <= t1 <= t2");
    horizon = std::max(horizon, w.t2);
  }
  const std::size_t W = windows.size();
  std::vector<double> values(cfg.n_paths * W);
  std::vector<std::size_t> candidates(cfg.n_paths), events(cfg.n_paths);
  detail::for_each_path(cfg.n_paths, cfg.threads, [&](std::size_t p) {
    PathStreams streams(cfg.seed, p, cfg.antithetic);
    const PathOutcome o = simulate_path(model, tilted, horizon, streams, cfg.epsilon_safety, windows);
    for (std::size_t w = 0; w < W; ++w)
      values[w * cfg.n_paths + p] = std::exp(-model.r * windows[w].t2) * o.window_increments[w];
    candidates[p] = o.n_candidates;
    events[p] = o.n_events;
  });
  std::size_t c = 0, e = 0;
  for (std::size_t p = 0; p < cfg.n_paths; ++p) {
    c += candidates[p];
    e += events[p];
  }
  const double ratio = c ? static_cast<double>(e) / static_cast<double>(c) : 1.0;
  std::vector<MCResult> out;
  out.reserve(W);
  for (std::size_t w = 0; w < W; ++w) {
    if (windows[w].t1 == windows[w].t2) {
      MCResult zero;
      zero.n_paths = cfg.n_paths;
      zero.accept_ratio = ratio;
      out.push_back(zero);
      continue;
    }
    out.push_back(detail::summarize(std::span<const double>(values).subspan(w * cfg.n_paths, cfg.n_paths), ratio));
  }
  return out;
}

inline MCResult price_swap_mc(const ModelParams& model, const GammaMixture& mix, double theta, double t1, double t2,
                              const MCConfig& cfg) {
  const Window w{t1, t2};
  return price_swaps_mc(model, esscher_tilt(mix, theta), std::span<const Window>(&w, 1), cfg).front();
}

/// e^{-r t2} m1 int_{t1}^{t2} E[lambda_s] ds with E[lambda] from the first-moment ODE
///   dE/ds = kappa (lambda_bar - E) + beta m1 E,
/// m1 the mean of the tilted mark law. Requires kappa != beta m1.
inline double swap_first_moment(const ModelParams& model, const GammaMixture& tilted, double t1, double t2) {
  const double m1 = mean(tilted);
  const double a = model.kappa - model.beta * m1;
  require(a != 0.0, Errc::InvalidArgument, "first-moment ODE is degenerate at kappa = beta m1");
  const double c_star = model.kappa * model.lambda_bar / a;
  const double d = model.lambda0 - c_star;
  // int e^{-a s} ds over [t1, t2]
  const double decay = (std::exp(-a * t1) - std::exp(-a * t2)) / a;
  const double integral = c_star * (t2 - t1) + d * decay;
  return std::exp(-model.r * t2) * m1 * integral;
}

}  // namespace cumjump
