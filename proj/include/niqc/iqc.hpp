#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "niqc/errors.hpp"
#include "niqc/linalg.hpp"
#include "niqc/ni_analysis.hpp"
#include "niqc/signal.hpp"
#include "niqc/sysmodel.hpp"
#include "niqc/verdict.hpp"

// Quadratic-constraint set machinery: membership of a system in the set
// B(Xi, eps) defined through time-averaged input/output pairs, the
// complementary set via the antidiagonal swap, the DC sufficient condition
// for linear systems, and the frequency-band multiplier inequalities.

namespace niqc {

struct XiConstraint {
  ComplexMatrix xi;  // Hermitian, 2n x 2n, blocks ordered [output; input]
  double epsilon = 0;

  XiConstraint(ComplexMatrix m, double eps) : xi(std::move(m)), epsilon(eps) {
    if (epsilon < 0)
      throw AnalysisError("xi constraint: epsilon must be nonnegative");
    if (xi.rows() == 0 || xi.rows() != xi.cols() || xi.rows() % 2 != 0)
      throw AnalysisError("xi constraint: matrix must be 2n x 2n");
    if (!is_hermitian(xi, 1e-12))
      throw AnalysisError("xi constraint: matrix must be Hermitian");
  }

  std::size_t n() const { return xi.rows() / 2; }

  XiConstraint with_epsilon(double eps) const { return {xi, eps}; }
};

// The two canonical scalar constraint matrices used by the demonstration
// systems: the antidiagonal coupling form and the sign-split form.
inline XiConstraint xi_cross(std::size_t n, double eps) {
  ComplexMatrix m(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, n + i) = 1;
    m(n + i, i) = 1;
  }
  return {std::move(m), eps};
}

inline XiConstraint xi_sign_split(std::size_t n, double eps) {
  ComplexMatrix m(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 1;
    m(n + i, n + i) = -1;
  }
  return {std::move(m), eps};
}

// Complementary constraint: Xi~ = -J Xi J with J the block swap. Applying
// it twice returns the original matrix.
inline XiConstraint complement(const XiConstraint& c) {
  const std::size_t n = c.n();
  ComplexMatrix out(2 * n, 2 * n);
  auto swapped = [&](std::size_t i) { return i < n ? i + n : i - n; };
  for (std::size_t i = 0; i < 2 * n; ++i)
    for (std::size_t j = 0; j < 2 * n; ++j)
      out(i, j) = -c.xi(swapped(i), swapped(j));
  return {std::move(out), c.epsilon};
}

struct TimeAverage {
  std::vector<double> value;
  bool decayed = true;  // final frame below the L1-evidence floor
};

// Per-component integral over the horizon; flags signals that have not
// decayed enough for the average to stand in for an infinite-horizon one.
// The trapezoid sum carries the first endpoint correction (h^2/12 times the
// end-slope difference, three-point stencils): without it the quadrature
// error at oscillatory battery members is larger than the membership
// allowances these averages feed. The stencil is exact on constants, so
// rectangular pulse areas are preserved exactly.
inline TimeAverage time_average(const Signal& sig, double floor = 1e-6) {
  TimeAverage r;
  r.value = integral(sig);
  const std::size_t nf = sig.frames();
  if (nf >= 3) {
    const double h = sig.dt;
    for (std::size_t i = 0; i < sig.dim; ++i) {
      const double d0 =
          (-3 * sig.at(0, i) + 4 * sig.at(1, i) - sig.at(2, i)) / (2 * h);
      const double dT = (3 * sig.at(nf - 1, i) - 4 * sig.at(nf - 2, i) +
                         sig.at(nf - 3, i)) /
                        (2 * h);
      r.value[i] -= h * h / 12.0 * (dT - d0);
    }
  }
  const std::size_t last = nf - 1;
  for (std::size_t i = 0; i < sig.dim; ++i)
    if (std::abs(sig.at(last, i)) > floor) r.decayed = false;
  return r;
}

namespace detail {

inline double stacked_allowance(double uu, double yy) {
  // absolute floor plus a scale-aware term so boundary members (forms that
  // vanish identically in exact arithmetic) are not rejected on quadrature
  // residue, while genuine order-one violations still fail
  return 1e-9 + 1e-5 * (uu + yy);
}

}  // namespace detail

// Membership of sys in B(Xi, eps): the stacked averaged pair [y_avg; u_avg]
// must satisfy the quadratic bound q <= -eps |u_avg|^2 for every battery
// member (up to the scale-aware allowance).
inline VerdictReport b_membership(const SystemModel& sys,
                                  const XiConstraint& c,
                                  const InputBattery& battery) {
  const std::size_t n = sys.io_dim();
  if (c.n() != n)
    throw AnalysisError("b_membership: constraint dimension mismatch");
  VerdictReport rep;
  rep.check = "b-membership";
  double min_slack = std::numeric_limits<double>::infinity();
  double worst_q = -std::numeric_limits<double>::infinity();
  double eps_meas = std::numeric_limits<double>::infinity();
  bool any_nonzero = false, all_decayed = true;
  int witness = -1;
  for (std::size_t i = 0; i < battery.size(); ++i) {
    const Signal& u = battery.members()[i];
    const Signal y = simulate(sys, u).output;
    const TimeAverage ua = time_average(u), ya = time_average(y);
    all_decayed = all_decayed && ua.decayed && ya.decayed;
    std::vector<double> v(2 * n);
    double uu = 0, yy = 0;
    for (std::size_t k = 0; k < n; ++k) {
      v[k] = ya.value[k];
      v[n + k] = ua.value[k];
      uu += ua.value[k] * ua.value[k];
      yy += ya.value[k] * ya.value[k];
    }
    const double q = real_quadratic_form(c.xi, v);
    const double allow = detail::stacked_allowance(uu, yy);
    const double slack = (-c.epsilon * uu + allow) - q;
    if (slack < min_slack) {
      min_slack = slack;
      witness = static_cast<int>(i);
    }
    worst_q = std::max(worst_q, q);
    if (uu >= 1e-18) {
      any_nonzero = true;
      eps_meas = std::min(eps_meas, -q / uu);
    }
  }
  if (!any_nonzero)
    throw AnalysisError("b_membership: every battery member averages to zero");
  rep.verdict = min_slack >= 0 ? Verdict::pass : Verdict::fail;
  rep.margin = min_slack;
  rep.witness_index = rep.verdict == Verdict::fail ? witness : -1;
  rep.metrics["eps_meas"] = eps_meas;
  rep.metrics["worst_q"] = worst_q;
  rep.metrics["epsilon"] = c.epsilon;
  rep.metrics["battery_count"] = static_cast<double>(battery.size());
  if (!all_decayed)
    rep.notes.push_back("warning: some signals had not decayed at the horizon");
  return rep;
}

// Membership in the complementary set.
inline VerdictReport bc_membership(const SystemModel& sys,
                                   const XiConstraint& c,
                                   const InputBattery& battery) {
  VerdictReport rep = b_membership(sys, complement(c), battery);
  rep.check = "bc-membership";
  return rep;
}

struct ScaledMembership {
  VerdictReport report;
  double worst_tau = 0;
};

// Complementary-set membership of Scaled(tau, sys) verified for every
// tau in [0, 1] at once: output averages scale linearly in tau, so each
// member's form is an exact quadratic in tau and its maximum over the
// interval is attained at an endpoint or the interior vertex.
inline ScaledMembership bc_membership_scaled(const SystemModel& sys,
                                             const XiConstraint& c,
                                             const InputBattery& battery) {
  const std::size_t n = sys.io_dim();
  if (c.n() != n)
    throw AnalysisError("bc_membership_scaled: constraint dimension mismatch");
  const ComplexMatrix xt = complement(c).xi;
  ScaledMembership out;
  VerdictReport& rep = out.report;
  rep.check = "bc-membership-scaled";
  double min_slack = std::numeric_limits<double>::infinity();
  int witness = -1;
  bool any_nonzero = false, all_decayed = true;
  for (std::size_t i = 0; i < battery.size(); ++i) {
    const Signal& u = battery.members()[i];
    const Signal y = simulate(sys, u).output;
    const TimeAverage ua = time_average(u), ya = time_average(y);
    all_decayed = all_decayed && ua.decayed && ya.decayed;
    double uu = 0, yy = 0;
    Complex qa = 0, qb = 0, qc = 0;
    for (std::size_t k = 0; k < n; ++k) {
      uu += ua.value[k] * ua.value[k];
      yy += ya.value[k] * ya.value[k];
      for (std::size_t l = 0; l < n; ++l) {
        qa += ya.value[k] * xt(k, l) * ya.value[l];
        qb += ya.value[k] * xt(k, n + l) * ua.value[l];
        qc += ua.value[k] * xt(n + k, n + l) * ua.value[l];
      }
    }
    if (uu >= 1e-18) any_nonzero = true;
    // q(tau) = a tau^2 + b tau + c0 with the averaged output scaled by tau
    const double a = qa.real(), b = 2 * qb.real(), c0 = qc.real();
    double qmax = std::max(c0, a + b + c0);
    double atmax = qmax == c0 ? 0.0 : 1.0;
    if (a < 0) {
      const double tv = -b / (2 * a);
      if (tv > 0 && tv < 1) {
        const double qv = a * tv * tv + b * tv + c0;
        if (qv > qmax) {
          qmax = qv;
          atmax = tv;
        }
      }
    }
    const double allow = detail::stacked_allowance(uu, yy);
    const double slack = (-c.epsilon * uu + allow) - qmax;
    if (slack < min_slack) {
      min_slack = slack;
      witness = static_cast<int>(i);
      out.worst_tau = atmax;
    }
  }
  if (!any_nonzero)
    throw AnalysisError(
        "bc_membership_scaled: every battery member averages to zero");
  rep.verdict = min_slack >= 0 ? Verdict::pass : Verdict::fail;
  rep.margin = min_slack;
  rep.witness_index = rep.verdict == Verdict::fail ? witness : -1;
  rep.metrics["worst_tau"] = out.worst_tau;
  rep.metrics["epsilon"] = c.epsilon;
  rep.metrics["battery_count"] = static_cast<double>(battery.size());
  if (!all_decayed)
    rep.notes.push_back("warning: some signals had not decayed at the horizon");
  return out;
}

// DC sufficient condition for a linear system: the Hermitian form
// [G(j0); I]^* Xi [G(j0); I] must be <= -eps I in the eigenvalue sense.
inline VerdictReport lti_b_condition(const SystemModel& sys,
                                     const XiConstraint& c) {
  if (!sys.is_lti())
    throw AnalysisError("lti_b_condition: model is not linear");
  const std::size_t n = sys.io_dim();
  if (c.n() != n)
    throw AnalysisError("lti_b_condition: constraint dimension mismatch");
  const ComplexMatrix g0 = freq_response(sys, 0.0);
  ComplexMatrix stack(2 * n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) stack(i, j) = g0(i, j);
    stack(n + i, i) = 1;
  }
  const ComplexMatrix m = adjoint(stack) * c.xi * stack;
  const double lam = max_eigenvalue(m);
  VerdictReport rep;
  rep.check = "lti-b-condition";
  rep.margin = -c.epsilon - lam;
  rep.verdict = lam <= -c.epsilon + 1e-12 ? Verdict::pass : Verdict::fail;
  rep.metrics["max_eig"] = lam;
  rep.metrics["epsilon"] = c.epsilon;
  rep.metrics["dc_gain_00"] = g0(0, 0).real();
  return rep;
}

// Frequency-band multipliers derived from a strict constraint: the low-band
// multiplier relaxes Xi by a third of its strictness margin, the high-band
// one bounds the response roll-off against the gain bound alpha.
struct MultiplierSet {
  ComplexMatrix pi0, pi_inf;
  double eps0 = 0, eps_inf = 0, alpha = 0;

  static ComplexMatrix pi_m(double omega, std::size_t n) {
    ComplexMatrix m(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      m(i, n + i) = Complex(0, omega);
      m(n + i, i) = Complex(0, -omega);
    }
    return m;
  }
};

inline MultiplierSet construct_multipliers(const XiConstraint& c, double alpha,
                                           double eps_inf) {
  if (!(c.epsilon > 0))
    throw AnalysisError(
        "construct_multipliers: strictness margin epsilon > 0 required");
  if (!(alpha > 0) || !(eps_inf > 0))
    throw AnalysisError("construct_multipliers: alpha and eps_inf must be > 0");
  const std::size_t n = c.n();
  MultiplierSet m;
  m.eps0 = c.epsilon / 3;
  m.eps_inf = eps_inf;
  m.alpha = alpha;
  m.pi0 = c.xi;
  for (std::size_t i = 0; i < n; ++i) m.pi0(n + i, n + i) += m.eps0;
  m.pi_inf = ComplexMatrix(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    m.pi_inf(i, i) = 1;
    m.pi_inf(n + i, n + i) = -(eps_inf + alpha * alpha);
  }
  return m;
}

namespace detail {

// Re of the band integral of [a; b]^* Pi [a; b] for spectra a, b on a
// shared grid, via the same piecewise-linear quadrature as band_energy.
inline double band_form(const Spectrum& a, const Spectrum& b,
                        const ComplexMatrix& pi, double lo, double hi) {
  const std::size_t n = a.dim;
  std::vector<Complex> v(2 * n);
  return band_integrate(
      a.grid,
      [&](std::size_t k) {
        for (std::size_t i = 0; i < n; ++i) {
          v[i] = a.at(k, i);
          v[n + i] = b.at(k, i);
        }
        return hermitian_form(pi, v);
      },
      lo, hi);
}

}  // namespace detail

// Numeric verification of the four band inequalities behind the multiplier
// stability argument: on the low band the P side must clear -eps0 times the
// input energy and the scaled-C side must stay nonnegative; likewise on the
// high band with the roll-off multiplier (truncated at Nyquist, the cap is
// reported). Mid-band rotation integrals are recorded as diagnostics.
inline VerdictReport verify_prop_iqc(const SystemModel& p,
                                     const SystemModel& c_sys,
                                     const MultiplierSet& m,
                                     const BandConfig& bands,
                                     const InputBattery& battery,
                                     const std::vector<double>& tau_grid) {
  bands.validate();
  const std::size_t n = p.io_dim();
  if (c_sys.io_dim() != n)
    throw AnalysisError("verify_prop_iqc: dimension mismatch");
  if (m.pi0.rows() != 2 * n)
    throw AnalysisError("verify_prop_iqc: multiplier dimension mismatch");
  const double dt = battery.config().dt;
  const double lo = bands.omega_lo_star, hi = bands.omega_hi_star;
  const double cap = FreqGrid::nyquist(dt);
  if (cap <= hi)
    throw AnalysisError("verify_prop_iqc: Nyquist below the high band");
  const FreqGrid fine = FreqGrid::standard(dt);
  const FreqGrid full(cap, 4096);

  VerdictReport rep;
  rep.check = "prop-iqc";
  double p_low = std::numeric_limits<double>::infinity();
  double c_low = std::numeric_limits<double>::infinity();
  double p_high = std::numeric_limits<double>::infinity();
  double c_high = std::numeric_limits<double>::infinity();
  double p_mid = std::numeric_limits<double>::infinity();
  double c_mid = std::numeric_limits<double>::infinity();
  int witness = -1;

  // split pi0 into blocks once for the tau-quadratic C-side form
  ComplexMatrix p11(n, n), p12(n, n), p22(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      p11(i, j) = m.pi0(i, j);
      p12(i, j) = m.pi0(i, n + j);
      p22(i, j) = m.pi0(n + i, n + j);
    }

  for (std::size_t idx = 0; idx < battery.size(); ++idx) {
    const Signal& u = battery.members()[idx];
    const Signal y = simulate(p, u).output;
    const Signal z = simulate(c_sys, u).output;
    const Spectrum uf = fourier(u, fine), yf = fourier(y, fine),
                   zf = fourier(z, fine);
    const Spectrum uc = fourier(u, full), yc = fourier(y, full),
                   zc = fourier(z, full);

    const double eu_lo = band_energy(uf, 0, lo);
    const double ey_lo = band_energy(yf, 0, lo);
    const double ez_lo = band_energy(zf, 0, lo);
    const double eu_hi = band_energy(uc, hi, cap);
    const double ey_hi = band_energy(yc, hi, cap);
    const double ez_hi = band_energy(zc, hi, cap);

    // P side, low band
    {
      const double val = detail::band_form(yf, uf, m.pi0, 0, lo);
      const double allow = 1e-9 + 1e-6 * (eu_lo + ey_lo);
      const double slack = (-m.eps0 * eu_lo + allow) - val;
      if (slack < p_low) {
        p_low = slack;
        if (slack < 0) witness = static_cast<int>(idx);
      }
    }
    // C side, low band: quadratic in tau with exact interval minimum
    {
      auto coef = [&](const ComplexMatrix& blk, const Spectrum& a,
                      const Spectrum& b) {
        return detail::band_integrate(
            fine,
            [&](std::size_t k) {
              Complex acc = 0;
              for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                  acc += std::conj(a.at(k, i)) * blk(i, j) * b.at(k, j);
              return acc.real();
            },
            0, lo);
      };
      const double A = coef(p11, uf, uf);
      const double B = 2 * coef(p12, uf, zf);
      const double C = coef(p22, zf, zf);
      const double allow = 1e-9 + 1e-6 * (eu_lo + ez_lo);
      double jmin = std::numeric_limits<double>::infinity();
      for (double tau : tau_grid)
        jmin = std::min(jmin, A + B * tau + C * tau * tau);
      if (C > 0) {  // convex: interior vertex is the true minimum
        const double tv = -B / (2 * C);
        if (tv > 0 && tv < 1)
          jmin = std::min(jmin, A + B * tv + C * tv * tv);
      }
      const double slack = jmin + allow;
      if (slack < c_low) {
        c_low = slack;
        if (slack < 0) witness = static_cast<int>(idx);
      }
    }
    // P side, high band (multiplier is diagonal)
    {
      const double val = detail::band_form(yc, uc, m.pi_inf, hi, cap);
      const double allow = 1e-9 + 1e-6 * (eu_hi + ey_hi);
      const double slack = (-m.eps_inf * eu_hi + allow) - val;
      if (slack < p_high) {
        p_high = slack;
        if (slack < 0) witness = static_cast<int>(idx);
      }
    }
    // C side, high band: J(tau) = E_u - (eps_inf + alpha^2) tau^2 E_z,
    // minimized at tau = 1
    {
      const double jmin = eu_hi - (m.eps_inf + m.alpha * m.alpha) * ez_hi;
      const double allow = 1e-9 + 1e-6 * (eu_hi + ez_hi);
      const double slack = std::min(eu_hi, jmin) + allow;
      if (slack < c_high) {
        c_high = slack;
        if (slack < 0) witness = static_cast<int>(idx);
      }
    }
    // mid-band rotation diagnostics, both oriented so NI behavior of each
    // side keeps the recorded minimum nonnegative
    p_mid = std::min(p_mid, 2 * band_quadratic(uf, yf, lo, hi));
    c_mid = std::min(c_mid, 2 * band_quadratic(uf, zf, lo, hi));
  }

  rep.metrics["p_low_slack"] = p_low;
  rep.metrics["c_low_slack"] = c_low;
  rep.metrics["p_high_slack"] = p_high;
  rep.metrics["c_high_slack"] = c_high;
  rep.metrics["p_mid_min"] = p_mid;
  rep.metrics["c_mid_min"] = c_mid;
  rep.metrics["high_band_cap"] = cap;
  rep.metrics["battery_count"] = static_cast<double>(battery.size());
  const double worst = std::min(std::min(p_low, c_low), std::min(p_high, c_high));
  rep.margin = worst;
  rep.verdict = worst >= 0 ? Verdict::pass : Verdict::fail;
  rep.witness_index = rep.verdict == Verdict::fail ? witness : -1;
  rep.notes.push_back("high band truncated at Nyquist");
  return rep;
}

}  // namespace niqc
