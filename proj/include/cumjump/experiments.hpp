#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bromwich.hpp"
#include "config.hpp"
#include "error.hpp"
#include "mc.hpp"
#include "pide.hpp"

namespace cumjump {

/// Least-squares slope of log y against log x.
inline double fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, Errc::InvalidArgument, "need at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, Errc::InvalidArgument, "log-log fit needs positive data");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline PriceResult price_config(const RunConfig& cfg) {
  return price(cfg.model, cfg.marks.mixture(), cfg.marks.theta, cfg.payoff, cfg.solver_grid(), cfg.bromwich,
               cfg.price_options());
}

struct SweepRow {
  double param = 0.0;
  double price = 0.0;
  double mc_mean = 0.0;
  double mc_lo = 0.0;
  double mc_hi = 0.0;
};

/// PIDE price and Monte Carlo estimate for each beta, everything else fixed.
inline std::vector<SweepRow> sweep_beta(const RunConfig& cfg, std::span<const double> betas, bool with_mc = true) {
  require(!betas.empty(), Errc::InvalidArgument, "beta list is empty");
  std::vector<SweepRow> rows;
  for (double beta : betas) {
    RunConfig c = cfg;
    c.model.beta = beta;
    c.validate();
    SweepRow row{beta, price_config(c).price, NAN, NAN, NAN};
    if (with_mc) {
      const MCResult mc = price_capped_call_mc(c.model, c.marks.mixture(), c.marks.theta, c.payoff, c.mc);
      row.mc_mean = mc.estimate;
      row.mc_lo = mc.ci_lo;
      row.mc_hi = mc.ci_hi;
    }
    rows.push_back(row);
  }
  return rows;
}

struct ConvergenceRow {
  double level = 0.0;
  double value = 0.0;
  double abs_err = 0.0;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  double reference = 0.0;
  /// Log-log slope of abs_err against the refinement measure (dt, h or dy).
  double slope = 0.0;
};

namespace detail {
inline void finish_convergence(ConvergenceResult& out, std::span<const double> measure) {
  std::vector<double> err;
  for (auto& r : out.rows) {
    r.abs_err = std::abs(r.value - out.reference);
    err.push_back(r.abs_err);
  }
  bool positive = true;
  for (double e : err) positive &= e > 0.0;
  out.slope = (positive && err.size() >= 2) ? fit_loglog_slope(measure, err) : NAN;
}
}  // namespace detail

/// Time refinement. Each level is a target step; the step actually used tiles
/// [0, T] exactly and is the reported level. Reference: finest step / ref_factor.
inline ConvergenceResult converge_dt(const RunConfig& cfg, std::span<const double> dts, int ref_factor = 8) {
  require(!dts.empty() && ref_factor >= 2, Errc::InvalidArgument, "need levels and a refinement factor >= 2");
  ConvergenceResult out;
  std::vector<double> used;
  double finest = dts.front();
  for (double dt : dts) {
    RunConfig c = cfg;
    c.grid.dt = dt;
    const SolverGrid g = c.solver_grid();
    finest = std::min(finest, g.dt);
    used.push_back(g.dt);
    out.rows.push_back({g.dt, price_config(c).price, 0.0});
  }
  RunConfig ref = cfg;
  ref.grid.dt = finest / ref_factor;
  out.reference = price_config(ref).price;
  detail::finish_convergence(out, used);
  return out;
}

/// Frequency refinement at the configured Y_max. Levels nested in the
/// reference grid reuse its modal solves.
inline ConvergenceResult converge_ny(const RunConfig& cfg, std::span<const int> levels, int N_ref = 8193) {
  require(!levels.empty(), Errc::InvalidArgument, "need at least one level");
  BromwichSpec ref_spec = cfg.bromwich;
  ref_spec.N_y = N_ref;
  ref_spec.validate();
  BromwichPricer ref(cfg.model, cfg.marks.mixture(), cfg.marks.theta, cfg.payoff, cfg.solver_grid(), ref_spec,
                     cfg.price_options());
  ref.run();
  ConvergenceResult out;
  out.reference = ref.price().price;
  const auto modal_ref = ref.modal_at(cfg.model.lambda0);
  std::vector<double> dys;
  for (int n : levels) {
    BromwichSpec s = cfg.bromwich;
    s.N_y = n;
    s.validate();
    double v;
    if ((N_ref - 1) % (n - 1) == 0) {
      const int stride = (N_ref - 1) / (n - 1);
      std::vector<std::complex<double>> modal(n), tr(n);
      for (int j = 0; j < n; ++j) {
        modal[j] = modal_ref[static_cast<std::size_t>(j) * stride];
        tr[j] = capped_call_transform(cfg.payoff, s.delta, s.y(j));
      }
      v = invert_price(modal, tr, s, cfg.model.u0).price;
    } else {
      RunConfig c = cfg;
      c.bromwich = s;
      v = price_config(c).price;
    }
    out.rows.push_back({static_cast<double>(n), v, 0.0});
    dys.push_back(s.dy());
  }
  detail::finish_convergence(out, dys);
  return out;
}

/// Space refinement along a coupled path: dt shrinks in proportion to the
/// grid spacing, starting from the configured dt at the first level. The
/// reference doubles the finest level.
inline ConvergenceResult converge_nlambda(const RunConfig& cfg, std::span<const int> levels) {
  require(!levels.empty(), Errc::InvalidArgument, "need at least one level");
  const double n0 = levels.front();
  auto at = [&](double n) {
    RunConfig c = cfg;
    c.grid.N_lambda = static_cast<int>(n);
    c.grid.dt = cfg.grid.dt * n0 / n;
    return price_config(c).price;
  };
  ConvergenceResult out;
  std::vector<double> hs;
  int finest = levels.front();
  for (int n : levels) {
    out.rows.push_back({static_cast<double>(n), at(n), 0.0});
    hs.push_back((cfg.grid.lambda_max - cfg.grid.lambda_min) / n);
    finest = std::max(finest, n);
  }
  out.reference = at(2.0 * finest);
  detail::finish_convergence(out, hs);
  return out;
}

struct GreekRow {
  double lambda0 = 0.0;
  double price = 0.0;
  double delta = 0.0;
};

/// Prices on a lambda0 grid and centred differences with h = rel_step lambda0.
/// One frequency sweep serves every point: only the read-out position moves.
inline std::vector<GreekRow> greek_lambda0(const RunConfig& cfg, std::span<const double> lambda0s, double rel_step) {
  require(rel_step > 0.0 && std::isfinite(rel_step), Errc::InvalidArgument, "rel_step must be positive");
  require(!lambda0s.empty(), Errc::InvalidArgument, "lambda0 grid is empty");
  BromwichPricer pricer(cfg.model, cfg.marks.mixture(), cfg.marks.theta, cfg.payoff, cfg.solver_grid(),
                        cfg.bromwich, cfg.price_options());
  pricer.run();
  std::vector<GreekRow> rows;
  for (double l0 : lambda0s) {
    require(l0 > 0.0, Errc::InvalidArgument, "lambda0 grid must be positive for a relative step");
    const double h = rel_step * l0;
    const double up = pricer.price_at(l0 + h, cfg.model.u0).price;
    const double dn = pricer.price_at(l0 - h, cfg.model.u0).price;
    rows.push_back({l0, pricer.price_at(l0, cfg.model.u0).price, (up - dn) / (2.0 * h)});
  }
  return rows;
}

}  // namespace cumjump
