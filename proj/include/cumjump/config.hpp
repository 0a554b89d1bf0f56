#pragma once

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bromwich.hpp"
#include "calib.hpp"
#include "error.hpp"
#include "marks.hpp"
#include "mc.hpp"
#include "pide.hpp"

namespace cumjump {

/// Malformed configuration or input files (as opposed to library preconditions).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_plain(const std::string& tok, const std::string& what) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || tok.empty()) throw ConfigError(what + ": cannot parse '" + tok + "' as a number");
  return v;
}

}  // namespace detail

/// Parses a number, also accepting a ratio "a/b" (e.g. 150/365).
inline double parse_number(std::string_view text, const std::string& what = "value") {
  const std::string tok = detail::trim(text);
  const auto slash = tok.find('/');
  if (slash == std::string::npos) return detail::parse_plain(tok, what);
  const double num = detail::parse_plain(detail::trim(tok.substr(0, slash)), what);
  const double den = detail::parse_plain(detail::trim(tok.substr(slash + 1)), what);
  if (den == 0.0) throw ConfigError(what + ": zero denominator in '" + tok + "'");
  return num / den;
}

inline std::vector<double> parse_list(std::string_view text, const std::string& what) {
  std::vector<double> out;
  std::string tok;
  std::stringstream ss{std::string(text)};
  while (std::getline(ss, tok, ',')) out.push_back(parse_number(tok, what));
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

/// Flat "dotted.key = value" file; '#' starts a comment.
inline std::map<std::string, std::string> read_key_values(std::istream& in, const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key or value");
    if (!kv.emplace(key, value).second)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return kv;
}

struct GridConfig {
  double lambda_min = 0.0;
  double lambda_max = 450.0;
  int N_lambda = 600;
  double dt = 1.0 / 365.0;
  int Q = 24;
  InterpMode interp = InterpMode::linear;
  Boundary boundary = Boundary::clamp;
};

struct MarksConfig {
  std::vector<double> weights{0.6, 0.4};
  std::vector<double> shapes{2.0, 6.0};
  std::vector<double> rates{4.0, 2.5};
  double theta = 0.0;

  GammaMixture mixture() const { return GammaMixture::make(weights, shapes, rates); }
};

/// Everything a CLI run needs. Defaults are the baseline experiment.
struct RunConfig {
  ModelParams model;
  MarksConfig marks;
  CappedCallPayoff payoff;
  GridConfig grid;
  BromwichSpec bromwich;
  MCConfig mc;
  unsigned threads = 0;

  SolverGrid solver_grid() const {
    return SolverGrid::make(grid.lambda_min, grid.lambda_max, grid.N_lambda, model.T, grid.dt);
  }
  PriceOptions price_options() const {
    PriceOptions o;
    o.Q = grid.Q;
    o.modal.interp = grid.interp;
    o.modal.boundary = grid.boundary;
    o.threads = threads;
    return o;
  }

  /// Re-checks every module invariant; failures are configuration errors.
  void validate() const {
    try {
      model.validate();
      const GammaMixture mix = marks.mixture();
      (void)esscher_tilt(mix, marks.theta);
      payoff.validate();
      bromwich.validate();
      (void)solver_grid();
      mc.validate();
      if (grid.Q < 1) throw ConfigError("grid.Q must be >= 1");
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    double min_rate = marks.rates.front();
    for (double b : marks.rates) min_rate = std::min(min_rate, b);
    if (!(bromwich.delta < min_rate - marks.theta))
      throw ConfigError("bromwich.delta must be below min(marks.rates) - marks.theta");
  }
};

inline RunConfig parse_run_config(const std::map<std::string, std::string>& kv) {
  RunConfig c;
  auto num = [](const std::string& key, const std::string& v) { return parse_number(v, key); };
  auto integer = [&](const std::string& key, const std::string& v) {
    const double x = num(key, v);
    if (x != std::floor(x) || std::abs(x) > 9.0e15) throw ConfigError(key + ": expected an integer");
    return x;
  };
  for (const auto& [key, v] : kv) {
    if (key == "model.kappa") c.model.kappa = num(key, v);
    else if (key == "model.lambda_bar") c.model.lambda_bar = num(key, v);
    else if (key == "model.beta") c.model.beta = num(key, v);
    else if (key == "model.r") c.model.r = num(key, v);
    else if (key == "model.T") c.model.T = num(key, v);
    else if (key == "model.lambda0") c.model.lambda0 = num(key, v);
    else if (key == "model.u0") c.model.u0 = num(key, v);
    else if (key == "marks.weights") c.marks.weights = parse_list(v, key);
    else if (key == "marks.shapes") c.marks.shapes = parse_list(v, key);
    else if (key == "marks.rates") c.marks.rates = parse_list(v, key);
    else if (key == "marks.theta") c.marks.theta = num(key, v);
    else if (key == "payoff.K") c.payoff.K = num(key, v);
    else if (key == "payoff.C") c.payoff.C = num(key, v);
    else if (key == "grid.lambda_min") c.grid.lambda_min = num(key, v);
    else if (key == "grid.lambda_max") c.grid.lambda_max = num(key, v);
    else if (key == "grid.N_lambda") c.grid.N_lambda = static_cast<int>(integer(key, v));
    else if (key == "grid.dt") c.grid.dt = num(key, v);
    else if (key == "grid.Q") c.grid.Q = static_cast<int>(integer(key, v));
    else if (key == "grid.interp") {
      if (v == "linear") c.grid.interp = InterpMode::linear;
      else if (v == "pchip") c.grid.interp = InterpMode::pchip;
      else throw ConfigError("grid.interp must be linear or pchip");
    } else if (key == "grid.boundary") {
      if (v == "clamp") c.grid.boundary = Boundary::clamp;
      else if (v == "extrapolate") c.grid.boundary = Boundary::extrapolate;
      else throw ConfigError("grid.boundary must be clamp or extrapolate");
    } else if (key == "bromwich.delta") c.bromwich.delta = num(key, v);
    else if (key == "bromwich.Y_max") c.bromwich.Y_max = num(key, v);
    else if (key == "bromwich.N_y") c.bromwich.N_y = static_cast<int>(integer(key, v));
    else if (key == "mc.n_paths") {
      const double n = integer(key, v);
      if (n < 1) throw ConfigError("mc.n_paths must be >= 1");
      c.mc.n_paths = static_cast<std::size_t>(n);
    } else if (key == "mc.seed") {
      std::uint64_t s = 0;
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
      if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("mc.seed must be an unsigned integer");
      c.mc.seed = s;
    } else if (key == "mc.epsilon") c.mc.epsilon_safety = num(key, v);
    else if (key == "mc.antithetic") {
      if (v == "true" || v == "1") c.mc.antithetic = true;
      else if (v == "false" || v == "0") c.mc.antithetic = false;
      else throw ConfigError("mc.antithetic must be true or false");
    } else if (key == "run.threads") c.threads = static_cast<unsigned>(integer(key, v));
    else throw ConfigError("unknown config key '" + key + "'");
  }
  c.mc.threads = c.threads;
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_run_config(read_key_values(in, path));
}

/// Numeric CSV with a fixed column count; a non-numeric first row is a header.
inline std::vector<std::vector<double>> read_numeric_csv(const std::string& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open input file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(t);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(detail::trim(cell));
    if (cells.size() != columns)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) + " columns");
    std::vector<double> row;
    try {
      for (const auto& c : cells) row.push_back(parse_number(c, path));
    } catch (const ConfigError&) {
      if (rows.empty() && lineno == 1) continue;
      throw;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path + ": no data rows");
  return rows;
}

inline std::vector<SwapQuote> read_quotes_csv(const std::string& path) {
  std::vector<SwapQuote> q;
  for (const auto& r : read_numeric_csv(path, 3)) q.push_back({r[0], r[1], r[2]});
  return q;
}

inline std::vector<double> read_samples_csv(const std::string& path) {
  std::vector<double> s;
  for (const auto& r : read_numeric_csv(path, 1)) s.push_back(r[0]);
  return s;
}

/// Shortest round-trip-safe decimal used in every CSV cell.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace cumjump
