// Batch driver: pricing, sweeps, convergence studies, Greeks, Monte Carlo and
// calibration, all emitting CSV.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <cumjump.hpp>

namespace {

using namespace cumjump;

struct NonFinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class CsvOut {
 public:
  explicit CsvOut(const std::string& path) {
    if (path.empty() || path == "-") {
      os_ = &std::cout;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw ConfigError("cannot open output file '" + path + "'");
      os_ = file_.get();
    }
  }

  void header(std::initializer_list<const char*> cols) {
    bool first = true;
    for (const char* c : cols) {
      *os_ << (first ? "" : ",") << c;
      first = false;
    }
    *os_ << '\n';
  }

  void row(std::initializer_list<double> vals) {
    bool first = true;
    for (double v : vals) {
      *os_ << (first ? "" : ",") << format_number(v);
      first = false;
    }
    *os_ << '\n';
  }

  void flush() { os_->flush(); }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

void check_finite(std::initializer_list<double> vals, const char* what) {
  for (double v : vals)
    if (!std::isfinite(v)) throw NonFinite(std::string("non-finite ") + what);
}

std::vector<double> parse_levels(const std::string& text, const char* flag) {
  if (text.empty()) throw ConfigError(std::string(flag) + " is empty");
  return parse_list(text, flag);
}

// "a:b:step" or a comma list.
std::vector<double> parse_range(const std::string& text, const char* flag) {
  if (text.find(':') == std::string::npos) return parse_levels(text, flag);
  std::vector<double> p;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ':')) p.push_back(parse_number(tok, flag));
  if (p.size() != 3 || !(p[2] > 0.0) || p[1] < p[0]) throw ConfigError(std::string(flag) + " must be lo:hi:step");
  std::vector<double> out;
  const long n = std::lround(std::floor((p[1] - p[0]) / p[2] + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(p[0] + i * p[2]);
  return out;
}

void warn_cfl(const RunConfig& cfg) {
  const GammaMixture tilted = esscher_tilt(cfg.marks.mixture(), cfg.marks.theta);
  const CflReport rep =
      check_cfl(cfg.solver_grid(), cfg.bromwich.delta, tilted, make_component_rules(tilted, cfg.grid.Q));
  if (!rep.satisfied)
    std::cerr << "warning: explicit CFL bound dt*L = " << rep.dt_times_lipschitz
              << " exceeds 1 (sufficient condition only)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Options on accumulated marks of a self-exciting point process"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  std::optional<std::uint64_t> seed;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration file")->required();
    sub->add_option("--out", out_path, "CSV output path (default stdout)");
    sub->add_option("--seed", seed, "override mc.seed");
  };

  auto* price_cmd = app.add_subcommand("price", "PIDE price with diagnostics");
  common(price_cmd);

  std::string betas = "0,0.5,1,1.5,2";
  bool no_mc = false;
  auto* sweep_cmd = app.add_subcommand("sweep-beta", "price and MC estimate across beta");
  common(sweep_cmd);
  sweep_cmd->add_option("--betas", betas, "comma-separated beta values");
  sweep_cmd->add_flag("--no-mc", no_mc, "skip the Monte Carlo columns (written as NA)");

  std::string axis, levels;
  int ny_ref = 8193, dt_ref_factor = 8;
  auto* conv_cmd = app.add_subcommand("converge", "refinement study against an internal reference");
  common(conv_cmd);
  conv_cmd->add_option("--axis", axis, "dt | nlambda | ny")->required()->check(CLI::IsMember({"dt", "nlambda", "ny"}));
  conv_cmd->add_option("--levels", levels, "comma-separated levels (fractions allowed for dt)");
  conv_cmd->add_option("--ny-ref", ny_ref, "reference N_y for axis=ny");
  conv_cmd->add_option("--dt-ref-factor", dt_ref_factor, "reference step = finest dt / factor");

  std::string l0_grid = "1:4:0.25";
  double rel_step = 0.01;
  auto* greek_cmd = app.add_subcommand("greek-lambda0", "sensitivity to the initial intensity");
  common(greek_cmd);
  greek_cmd->add_option("--lambda0-grid", l0_grid, "lo:hi:step or comma list");
  greek_cmd->add_option("--rel-step", rel_step, "relative bump h = rel_step * lambda0");

  std::string event_log;
  std::size_t event_log_paths = 10;
  auto* mc_cmd = app.add_subcommand("mc-bench", "Monte Carlo capped-call price");
  common(mc_cmd);
  mc_cmd->add_option("--event-log", event_log, "write per-event CSV for the first paths");
  mc_cmd->add_option("--event-log-paths", event_log_paths, "number of paths to log");

  std::string target, input;
  std::size_t components = 0;
  double theta_lo = 0.0, theta_hi = 0.8, tol_theta = 1e-4;
  bool allow_negative = false;
  auto* cal_cmd = app.add_subcommand("calibrate", "fit marks (EM) or theta (swap quotes)");
  common(cal_cmd);
  cal_cmd->add_option("--target", target, "marks | theta")->required()->check(CLI::IsMember({"marks", "theta"}));
  cal_cmd->add_option("--input", input, "samples CSV (marks) or quotes CSV t1,t2,price (theta)")->required();
  cal_cmd->add_option("--components", components, "mixture size for marks (default: config)");
  cal_cmd->add_option("--theta-lo", theta_lo, "lower end of the theta bracket");
  cal_cmd->add_option("--theta-hi", theta_hi, "upper end of the theta bracket");
  cal_cmd->add_option("--tol-theta", tol_theta, "bracket-width tolerance");
  cal_cmd->add_flag("--allow-negative", allow_negative, "admit negative tilts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = load_run_config(config_path);
    if (seed) cfg.mc.seed = *seed;
    CsvOut out(out_path);

    if (*price_cmd) {
      warn_cfl(cfg);
      const PriceResult r = price_config(cfg);
      check_finite({r.price, r.imag_residual, r.boundary_hit}, "price");
      out.header({"price", "imag_residual", "boundary_hit"});
      out.row({r.price, r.imag_residual, r.boundary_hit});
    } else if (*sweep_cmd) {
      const auto list = parse_levels(betas, "--betas");
      const auto rows = sweep_beta(cfg, list, !no_mc);
      out.header({"param", "price", "mc_mean", "mc_lo", "mc_hi"});
      for (const auto& r : rows) {
        check_finite({r.price}, "price");
        out.row({r.param, r.price, r.mc_mean, r.mc_lo, r.mc_hi});
      }
    } else if (*conv_cmd) {
      ConvergenceResult res;
      if (axis == "dt") {
        const auto lv = parse_levels(levels.empty() ? "1/91,1/182,1/365,1/730" : levels, "--levels");
        res = converge_dt(cfg, lv, dt_ref_factor);
      } else {
        const auto raw = parse_levels(levels.empty() ? (axis == "ny" ? "513,1025,2049,4097" : "150,300,600,1200")
                                                     : levels,
                                      "--levels");
        std::vector<int> lv;
        for (double v : raw) {
          if (v != std::floor(v) || v < 2) throw ConfigError("--levels must be integers >= 2 for this axis");
          lv.push_back(static_cast<int>(v));
        }
        res = axis == "ny" ? converge_ny(cfg, lv, ny_ref) : converge_nlambda(cfg, lv);
      }
      out.header({"level", "value", "abs_err_vs_ref"});
      for (const auto& r : res.rows) {
        check_finite({r.value}, "value");
        out.row({r.level, r.value, r.abs_err});
      }
      std::cerr << "reference," << format_number(res.reference) << "\nslope," << format_number(res.slope) << '\n';
    } else if (*greek_cmd) {
      if (!(rel_step > 0.0)) throw ConfigError("--rel-step must be positive");
      const auto grid = parse_range(l0_grid, "--lambda0-grid");
      const auto rows = greek_lambda0(cfg, grid, rel_step);
      out.header({"lambda0", "price", "delta"});
      for (const auto& r : rows) {
        check_finite({r.price, r.delta}, "greek");
        out.row({r.lambda0, r.price, r.delta});
      }
    } else if (*mc_cmd) {
      const MCResult r = price_capped_call_mc(cfg.model, cfg.marks.mixture(), cfg.marks.theta, cfg.payoff, cfg.mc);
      check_finite({r.estimate}, "estimate");
      out.header({"estimate", "stderr", "ci_lo", "ci_hi", "n_paths", "accept_ratio"});
      out.row({r.estimate, r.stderr_, r.ci_lo, r.ci_hi, static_cast<double>(r.n_paths), r.accept_ratio});
      if (!event_log.empty()) {
        CsvOut log(event_log);
        log.header({"path_id", "event_time", "mark", "lambda_after"});
        const GammaMixture tilted = esscher_tilt(cfg.marks.mixture(), cfg.marks.theta);
        for (std::size_t p = 0; p < std::min(event_log_paths, cfg.mc.n_paths); ++p) {
          PathStreams streams(cfg.mc.seed, p, cfg.mc.antithetic);
          simulate_path(cfg.model, tilted, cfg.model.T, streams, cfg.mc.epsilon_safety, {},
                        [&](const JumpEvent& e) { log.row({static_cast<double>(p), e.time, e.mark, e.lambda_after}); });
        }
      }
    } else if (*cal_cmd) {
      if (target == "marks") {
        const auto samples = read_samples_csv(input);
        EMConfig em;
        em.M = components ? components : cfg.marks.weights.size();
        const EMResult fit = em_fit(samples, em);
        out.header({"component", "weight", "shape", "rate"});
        for (std::size_t m = 0; m < fit.mixture.size(); ++m) {
          check_finite({fit.mixture.weight(m), fit.mixture.shape(m), fit.mixture.rate(m)}, "mixture parameter");
          out.row({static_cast<double>(m), fit.mixture.weight(m), fit.mixture.shape(m), fit.mixture.rate(m)});
        }
      } else {
        ThetaCalibConfig tc;
        tc.quotes = read_quotes_csv(input);
        tc.theta_lo = theta_lo;
        tc.theta_hi = theta_hi;
        tc.tol_theta = tol_theta;
        tc.allow_negative = allow_negative;
        tc.mc = cfg.mc;
        const ThetaCalibResult r = calibrate_theta(cfg.model, cfg.marks.mixture(), tc);
        check_finite({r.theta_star, r.objective}, "calibration result");
        out.header({"theta", "objective", "iters"});
        out.row({r.theta_star, r.objective, static_cast<double>(r.iterations)});
      }
    }
    out.flush();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NonFinite& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}
