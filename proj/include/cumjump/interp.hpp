#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

#include "error.hpp"

namespace cumjump {

enum class InterpMode { linear, pchip };

/// Policy for queries outside [xs.front(), xs.back()].
enum class Boundary { clamp, extrapolate };

/// Interpolated value as a fixed linear combination of nodal data:
///   c0 y[j] + c1 y[j+1] + c2 s[j] + c3 s[j+1]
/// where s are PCHIP nodal slopes (c2 = c3 = 0 in linear mode). Stencils depend
/// only on the grid and the query point, so they can be built once and
/// applied to many data vectors.
struct Stencil {
  std::size_t j = 0;
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
};

namespace detail {

template <class T>
struct is_complex : std::false_type {};
template <class R>
struct is_complex<std::complex<R>> : std::true_type {};

inline void check_grid(std::span<const double> xs) {
  require(xs.size() >= 2, Errc::TooFewPoints, "interpolation needs at least two nodes");
  for (std::size_t j = 0; j + 1 < xs.size(); ++j)
    require(xs[j] < xs[j + 1], Errc::NonMonotoneGrid, "abscissae must be strictly increasing");
}

// Fritsch-Carlson interior slope: weighted harmonic mean of the two secants,
// zero at local extrema.
inline double fc_interior(double h_left, double h_right, double d_left, double d_right) {
  if (d_left * d_right <= 0.0) return 0.0;
  const double w1 = 2.0 * h_right + h_left;
  const double w2 = h_right + 2.0 * h_left;
  return (w1 + w2) / (w1 / d_left + w2 / d_right);
}

// One-sided three-point end slope, limited so the end cell stays monotone.
// h0/d0 belong to the boundary cell, h1/d1 to its neighbour.
inline double fc_endpoint(double h0, double h1, double d0, double d1) {
  if (d0 * d1 <= 0.0) return 0.0;
  const double m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
  if (m * d0 <= 0.0) return 0.0;
  if (std::abs(m) > 3.0 * std::abs(d0)) return 3.0 * d0;
  return m;
}

inline void real_slopes(std::span<const double> xs, const double* ys, std::size_t stride, double* out) {
  const std::size_t n = xs.size();
  if (n == 2) {
    const double d = (ys[stride] - ys[0]) / (xs[1] - xs[0]);
    out[0] = out[stride] = d;
    return;
  }
  double h_prev = xs[1] - xs[0];
  double d_prev = (ys[stride] - ys[0]) / h_prev;
  double h_first = h_prev, d_first = d_prev;
  for (std::size_t j = 1; j + 1 < n; ++j) {
    const double h = xs[j + 1] - xs[j];
    const double d = (ys[(j + 1) * stride] - ys[j * stride]) / h;
    out[j * stride] = fc_interior(h_prev, h, d_prev, d);
    if (j == 1) {
      out[0] = fc_endpoint(h_first, h, d_first, d);
    }
    if (j + 2 == n) {
      out[(n - 1) * stride] = fc_endpoint(h, h_prev, d, d_prev);
    }
    h_prev = h;
    d_prev = d;
  }
}

}  // namespace detail

/// PCHIP nodal slopes. Complex data are handled componentwise.
template <class T>
void pchip_slopes(std::span<const double> xs, std::span<const T> ys, std::span<T> out) {
  if constexpr (detail::is_complex<T>::value) {
    using R = typename T::value_type;
    static_assert(std::is_same_v<R, double>);
    const double* in = reinterpret_cast<const double*>(ys.data());
    double* o = reinterpret_cast<double*>(out.data());
    detail::real_slopes(xs, in, 2, o);
    detail::real_slopes(xs, in + 1, 2, o + 1);
  } else {
    detail::real_slopes(xs, ys.data(), 1, out.data());
  }
}

/// Locates x on the grid and returns its interpolation weights. Cell lookup is
/// a binary search, so nonuniform grids are fine.
inline Stencil make_stencil(std::span<const double> xs, double x, InterpMode mode, Boundary boundary) {
  const std::size_t n = xs.size();
  Stencil s;
  if (x <= xs.front()) {
    s.j = 0;
    const double d = xs.front() - x;
    if (boundary == Boundary::clamp || d == 0.0) {
      s.c0 = 1.0;
    } else if (mode == InterpMode::linear) {
      const double h = xs[1] - xs[0];
      s.c0 = 1.0 + d / h;
      s.c1 = -d / h;
    } else {
      s.c0 = 1.0;
      s.c2 = -d;
    }
    return s;
  }
  if (x >= xs.back()) {
    s.j = n - 2;
    const double d = x - xs.back();
    if (boundary == Boundary::clamp || d == 0.0) {
      s.c1 = 1.0;
    } else if (mode == InterpMode::linear) {
      const double h = xs[n - 1] - xs[n - 2];
      s.c0 = -d / h;
      s.c1 = 1.0 + d / h;
    } else {
      s.c1 = 1.0;
      s.c3 = d;
    }
    return s;
  }
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  s.j = static_cast<std::size_t>(it - xs.begin()) - 1;
  const double h = xs[s.j + 1] - xs[s.j];
  const double t = (x - xs[s.j]) / h;
  if (mode == InterpMode::linear) {
    s.c0 = 1.0 - t;
    s.c1 = t;
  } else {
    const double u = 1.0 - t;
    s.c0 = (1.0 + 2.0 * t) * u * u;
    s.c1 = t * t * (3.0 - 2.0 * t);
    s.c2 = h * t * u * u;
    s.c3 = -h * t * t * u;
  }
  return s;
}

template <class T>
T apply_stencil(const Stencil& s, std::span<const T> ys, std::span<const T> slopes) {
  T v = s.c0 * ys[s.j] + s.c1 * ys[s.j + 1];
  if (s.c2 != 0.0) v += s.c2 * slopes[s.j];
  if (s.c3 != 0.0) v += s.c3 * slopes[s.j + 1];
  return v;
}

/// Shape-preserving interpolant on a fixed grid, real or complex valued.
template <class T>
class Interpolant {
 public:
  static Interpolant build(std::vector<double> xs, std::vector<T> ys, InterpMode mode,
                           Boundary boundary = Boundary::clamp) {
    detail::check_grid(xs);
    require(xs.size() == ys.size(), Errc::DimensionMismatch, "xs and ys must have the same length");
    Interpolant it(std::move(xs), std::move(ys), mode, boundary);
    if (mode == InterpMode::pchip) {
      it.slopes_.resize(it.ys_.size());
      pchip_slopes<T>(it.xs_, it.ys_, it.slopes_);
    }
    return it;
  }

  T operator()(double x) const { return eval(x); }

  T eval(double x) const {
    const Stencil s = make_stencil(xs_, x, mode_, boundary_);
    return apply_stencil<T>(s, ys_, slopes_);
  }

  std::span<const double> xs() const noexcept { return xs_; }
  std::span<const T> ys() const noexcept { return ys_; }
  std::span<const T> slopes() const noexcept { return slopes_; }
  InterpMode mode() const noexcept { return mode_; }
  Boundary boundary() const noexcept { return boundary_; }

 private:
  Interpolant(std::vector<double> xs, std::vector<T> ys, InterpMode mode, Boundary boundary)
      : xs_(std::move(xs)), ys_(std::move(ys)), mode_(mode), boundary_(boundary) {}

  std::vector<double> xs_;
  std::vector<T> ys_;
  std::vector<T> slopes_;
  InterpMode mode_;
  Boundary boundary_;
};

}  // namespace cumjump
