#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

#include "niqc/errors.hpp"

// Uniformly sampled vector-valued signals on [0, horizon], their one-sided
// Fourier transforms on a linear frequency grid, and the handful of
// quadratures the verification checks are built from. All integrals are
// trapezoidal, in time and in frequency.

namespace niqc {

using Complex = std::complex<double>;

struct Signal {
  double dt = 0;
  std::size_t dim = 0;
  std::vector<double> samples;  // frame-major: samples[m * dim + i]

  Signal() = default;
  Signal(double dt_, std::size_t dim_, std::vector<double> samples_)
      : dt(dt_), dim(dim_), samples(std::move(samples_)) {
    validate();
  }

  std::size_t frames() const { return dim == 0 ? 0 : samples.size() / dim; }
  double horizon() const { return dt * static_cast<double>(frames() - 1); }
  double time(std::size_t m) const { return dt * static_cast<double>(m); }

  double at(std::size_t m, std::size_t i) const { return samples[m * dim + i]; }
  double& at(std::size_t m, std::size_t i) { return samples[m * dim + i]; }

  void validate() const {
    if (!(dt > 0)) throw ModelError("signal: dt must be positive");
    if (dim < 1) throw ModelError("signal: dimension must be >= 1");
    if (samples.size() % dim != 0) throw ModelError("signal: ragged sample array");
    if (frames() < 2) throw ModelError("signal: need at least two samples");
    for (double v : samples)
      if (!std::isfinite(v)) throw ModelError("signal: non-finite sample");
  }
};

inline Signal zeros(double dt, double horizon, std::size_t dim = 1) {
  const auto frames = static_cast<std::size_t>(std::llround(horizon / dt)) + 1;
  return Signal(dt, dim, std::vector<double>(frames * dim, 0.0));
}

// Samples a scalar function of time on [0, horizon].
inline Signal sample_function(double dt, double horizon,
                              const std::function<double(double)>& f) {
  const auto frames = static_cast<std::size_t>(std::llround(horizon / dt)) + 1;
  std::vector<double> v(frames);
  for (std::size_t m = 0; m < frames; ++m) v[m] = f(dt * static_cast<double>(m));
  return Signal(dt, 1, std::move(v));
}

// Rectangular pulse of the given width whose trapezoid integral is exactly 1:
// height 1/width on [0, width) with a half-height closing sample, then a
// final normalization to absorb grid round-off.
inline Signal unit_pulse(double dt, double horizon, double width) {
  if (!(width > 0) || width >= horizon)
    throw ModelError("unit_pulse: width must lie inside the horizon");
  Signal u = zeros(dt, horizon, 1);
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(width / dt)));
  const double h = 1.0 / width;
  for (std::size_t m = 0; m < k && m < u.frames(); ++m) u.samples[m] = h;
  if (k < u.frames()) u.samples[k] = 0.5 * h;
  double area = 0;  // trapezoid
  for (std::size_t m = 0; m + 1 < u.frames(); ++m)
    area += 0.5 * (u.samples[m] + u.samples[m + 1]) * dt;
  for (double& v : u.samples) v /= area;
  return u;
}

namespace detail {
inline void check_same_grid(const Signal& a, const Signal& b) {
  if (a.dt != b.dt || a.frames() != b.frames() || a.dim != b.dim)
    throw AnalysisError("signals live on different grids");
}
}  // namespace detail

// Trapezoid integral of each component over the full horizon.
inline std::vector<double> integral(const Signal& u) {
  std::vector<double> acc(u.dim, 0.0);
  const std::size_t n = u.frames();
  for (std::size_t i = 0; i < u.dim; ++i) {
    double s = 0.5 * (u.at(0, i) + u.at(n - 1, i));
    for (std::size_t m = 1; m + 1 < n; ++m) s += u.at(m, i);
    acc[i] = s * u.dt;
  }
  return acc;
}

inline double l2_norm(const Signal& u) {
  const std::size_t n = u.frames();
  double s = 0;
  for (std::size_t m = 0; m < n; ++m) {
    double q = 0;
    for (std::size_t i = 0; i < u.dim; ++i) q += u.at(m, i) * u.at(m, i);
    s += (m == 0 || m == n - 1) ? 0.5 * q : q;
  }
  return std::sqrt(s * u.dt);
}

inline double sup_norm(const Signal& u) {
  double v = 0;
  for (double x : u.samples) v = std::max(v, std::abs(x));
  return v;
}

// Time truncation: samples strictly after T are zeroed, grid unchanged.
inline Signal truncate(const Signal& u, double t_cut) {
  Signal r = u;
  const std::size_t n = r.frames();
  for (std::size_t m = 0; m < n; ++m)
    if (r.time(m) > t_cut + 1e-12 * r.dt)
      for (std::size_t i = 0; i < r.dim; ++i) r.at(m, i) = 0.0;
  return r;
}

// Second-order differentiation: central differences inside, one-sided
// three-point stencils at both ends.
inline Signal derivative(const Signal& u) {
  const std::size_t n = u.frames();
  if (n < 3) throw AnalysisError("derivative: need at least three samples");
  Signal d = u;
  const double inv2 = 1.0 / (2.0 * u.dt);
  for (std::size_t i = 0; i < u.dim; ++i) {
    d.at(0, i) = (-3 * u.at(0, i) + 4 * u.at(1, i) - u.at(2, i)) * inv2;
    for (std::size_t m = 1; m + 1 < n; ++m)
      d.at(m, i) = (u.at(m + 1, i) - u.at(m - 1, i)) * inv2;
    d.at(n - 1, i) =
        (3 * u.at(n - 1, i) - 4 * u.at(n - 2, i) + u.at(n - 3, i)) * inv2;
  }
  return d;
}

// Trapezoid of <a(t), b(t)> over [0, T]. T lands on the grid in normal use;
// a fractional final cell is handled by linear interpolation of each factor.
inline double inner_integral(const Signal& a, const Signal& b, double t_end) {
  detail::check_same_grid(a, b);
  if (t_end <= 0) return 0.0;
  const std::size_t n = a.frames();
  const double t_max = a.horizon();
  const double t = std::min(t_end, t_max);
  const auto full = static_cast<std::size_t>(std::floor(t / a.dt + 1e-9));
  auto dot = [&](std::size_t m) {
    double q = 0;
    for (std::size_t i = 0; i < a.dim; ++i) q += a.at(m, i) * b.at(m, i);
    return q;
  };
  double s = 0;
  const std::size_t last = std::min(full, n - 1);
  for (std::size_t m = 0; m + 1 <= last; ++m)
    s += 0.5 * (dot(m) + dot(m + 1)) * a.dt;
  const double t_grid = a.dt * static_cast<double>(last);
  if (t > t_grid + 1e-12 && last + 1 < n) {
    const double frac = (t - t_grid) / a.dt;
    double qa = 0;
    for (std::size_t i = 0; i < a.dim; ++i) {
      const double av = a.at(last, i) + frac * (a.at(last + 1, i) - a.at(last, i));
      const double bv = b.at(last, i) + frac * (b.at(last + 1, i) - b.at(last, i));
      qa += av * bv;
    }
    s += 0.5 * (dot(last) + qa) * (t - t_grid);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Frequency domain
// ---------------------------------------------------------------------------

struct FreqGrid {
  double omega_max = 0;
  std::size_t count = 0;  // linear spacing, nodes 0 .. omega_max inclusive

  FreqGrid() = default;
  FreqGrid(double omega_max_, std::size_t count_)
      : omega_max(omega_max_), count(count_) {
    if (!(omega_max > 0)) throw ModelError("freq grid: omega_max must be positive");
    if (count < 64) throw ModelError("freq grid: need at least 64 nodes");
  }

  // Default analysis grid: 4096 nodes up to min(100, Nyquist) rad/s.
  static FreqGrid standard(double dt) {
    return FreqGrid(std::min(100.0, std::numbers::pi / dt), 4096);
  }

  static double nyquist(double dt) { return std::numbers::pi / dt; }

  double spacing() const {
    return omega_max / static_cast<double>(count - 1);
  }
  double omega(std::size_t k) const {
    return spacing() * static_cast<double>(k);
  }
};

struct Spectrum {
  FreqGrid grid;
  std::size_t dim = 0;
  std::vector<Complex> values;  // frame-major: values[k * dim + i]

  Complex at(std::size_t k, std::size_t i) const { return values[k * dim + i]; }
};

// One-sided Fourier transform with the unitary convention
//   u_hat(j w) = (2 pi)^{-1/2} * Integral_0^inf u(t) e^{-j w t} dt,
// evaluated by trapezoid quadrature on the sample grid. The grid must not
// extend past Nyquist. Direct evaluation; the inner loop walks blocks of
// eight frequencies with rotating phasors so it stays throughput-bound.
inline Spectrum fourier(const Signal& u, const FreqGrid& grid) {
  if (grid.omega_max > FreqGrid::nyquist(u.dt) * (1 + 1e-12))
    throw AnalysisError("fourier: grid extends past Nyquist");
  const std::size_t nf = grid.count;
  const std::size_t nt = u.frames();
  Spectrum sp{grid, u.dim, std::vector<Complex>(nf * u.dim)};

  const double norm = u.dt / std::sqrt(2.0 * std::numbers::pi);
  std::vector<double> w(nt);
  for (std::size_t i = 0; i < u.dim; ++i) {
    for (std::size_t m = 0; m < nt; ++m) {
      const double wt = (m == 0 || m == nt - 1) ? 0.5 : 1.0;
      w[m] = wt * u.at(m, i) * norm;
    }
    constexpr std::size_t kBlock = 8;
    for (std::size_t k0 = 0; k0 < nf; k0 += kBlock) {
      const std::size_t nb = std::min(kBlock, nf - k0);
      double zr[kBlock], zi[kBlock], rr[kBlock], ri[kBlock];
      double sr[kBlock] = {0}, si[kBlock] = {0};
      for (std::size_t b = 0; b < nb; ++b) {
        const double th = grid.omega(k0 + b) * u.dt;
        zr[b] = 1.0;
        zi[b] = 0.0;
        rr[b] = std::cos(th);
        ri[b] = -std::sin(th);
      }
      for (std::size_t b = nb; b < kBlock; ++b) {
        zr[b] = zi[b] = ri[b] = 0.0;
        rr[b] = 1.0;
      }
      for (std::size_t m = 0; m < nt; ++m) {
        const double v = w[m];
        for (std::size_t b = 0; b < kBlock; ++b) {
          sr[b] += v * zr[b];
          si[b] += v * zi[b];
          const double t = zr[b] * rr[b] - zi[b] * ri[b];
          zi[b] = zr[b] * ri[b] + zi[b] * rr[b];
          zr[b] = t;
        }
      }
      for (std::size_t b = 0; b < nb; ++b)
        sp.values[(k0 + b) * u.dim + i] = Complex(sr[b], si[b]);
    }
  }
  return sp;
}

namespace detail {

// Integral over [lo, hi] of the piecewise-linear interpolant of nodal values
// f(k) on the grid. Fractional cells at both band edges are handled exactly.
template <typename F>
double band_integrate(const FreqGrid& g, F&& f, double lo, double hi) {
  if (!(lo >= -1e-12) || lo > hi || hi > g.omega_max * (1 + 1e-12))
    throw AnalysisError("band integral outside the frequency grid");
  lo = std::max(lo, 0.0);
  hi = std::min(hi, g.omega_max);
  if (hi <= lo) return 0.0;
  const double d = g.spacing();
  const auto cell_lo = static_cast<std::size_t>(std::floor(lo / d * (1 + 1e-15)));
  const auto cell_hi = std::min<std::size_t>(
      g.count - 2, static_cast<std::size_t>(std::floor(hi / d * (1 + 1e-15))));
  auto value_at = [&](double om, std::size_t cell) {
    const double frac = (om - g.omega(cell)) / d;
    return f(cell) + frac * (f(cell + 1) - f(cell));
  };
  if (cell_lo == cell_hi || g.omega(cell_lo + 1) >= hi) {
    const std::size_t c = cell_lo;
    return 0.5 * (value_at(lo, c) + value_at(hi, c)) * (hi - lo);
  }
  double s = 0;
  // leading partial cell
  s += 0.5 * (value_at(lo, cell_lo) + f(cell_lo + 1)) * (g.omega(cell_lo + 1) - lo);
  // interior whole cells
  for (std::size_t c = cell_lo + 1; c < cell_hi; ++c)
    s += 0.5 * (f(c) + f(c + 1)) * d;
  // trailing partial cell
  s += 0.5 * (f(cell_hi) + value_at(hi, cell_hi)) * (hi - g.omega(cell_hi));
  return s;
}

}  // namespace detail

// Integral of |u_hat|^2 over the band [lo, hi].
inline double band_energy(const Spectrum& u, double lo, double hi) {
  return detail::band_integrate(
      u.grid,
      [&](std::size_t k) {
        double q = 0;
        for (std::size_t i = 0; i < u.dim; ++i) q += std::norm(u.at(k, i));
        return q;
      },
      lo, hi);
}

// Re Integral_lo^hi <u_hat(jw), jw y_hat(jw)> dw, the band functional whose
// sign pattern characterizes negative-imaginary behavior.
inline double band_quadratic(const Spectrum& u, const Spectrum& y, double lo,
                             double hi) {
  if (u.grid.count != y.grid.count || u.grid.omega_max != y.grid.omega_max ||
      u.dim != y.dim)
    throw AnalysisError("band_quadratic: spectra on different grids");
  return detail::band_integrate(
      u.grid,
      [&](std::size_t k) {
        double q = 0;
        for (std::size_t i = 0; i < u.dim; ++i)
          q -= std::imag(std::conj(u.at(k, i)) * y.at(k, i));
        return q * u.grid.omega(k);
      },
      lo, hi);
}

}  // namespace niqc
