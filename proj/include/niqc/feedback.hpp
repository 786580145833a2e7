#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "niqc/errors.hpp"
#include "niqc/iqc.hpp"
#include "niqc/ni_analysis.hpp"
#include "niqc/signal.hpp"
#include "niqc/sysmodel.hpp"
#include "niqc/verdict.hpp"

// Positive-feedback interconnection: u1 = d1 + y2, u2 = d2 + y1 with
// y1 = P(u1), y2 = C(u2). Loop simulation, impulse diagnostics, and the
// assembled stability certificates.

namespace niqc {

struct LoopTrace {
  Signal d1, d2, u1, y1, u2, y2;
};

// Well-posedness gate: the product of instantaneous gains must stay below
// one so the algebraic loop at each instant is a contraction.
inline VerdictReport wellposed_gate(const SystemModel& p,
                                    const SystemModel& c) {
  const Gain gp = instantaneous_gain(p);
  const Gain gc = instantaneous_gain(c);
  VerdictReport rep;
  rep.check = "wellposed";
  const double product = gp.value * gc.value;
  rep.verdict = product < 1.0 - 1e-9 ? Verdict::pass : Verdict::fail;
  rep.margin = 1.0 - product;
  rep.metrics["gain_p"] = gp.value;
  rep.metrics["gain_c"] = gc.value;
  rep.metrics["product"] = product;
  if (!gp.exact || !gc.exact)
    rep.notes.push_back("instantaneous gain estimated by probing");
  return rep;
}

namespace detail {

struct LoopRun {
  LoopTrace trace;
  std::optional<double> overflow_time;
};

// Shared integrator behind simulate_loop and the impulse experiments.
// When stop_on_overflow is set, divergence truncates the trace (zeros past
// the overflow time) instead of throwing; that is the expected signature of
// an unstable loop, not a numerical accident.
inline LoopRun run_loop(const SystemModel& p, const SystemModel& c,
                        const Signal& d1, const Signal& d2,
                        bool stop_on_overflow) {
  const std::size_t n = p.io_dim();
  if (c.io_dim() != n)
    throw ModelError("loop: plant/controller dimension mismatch");
  if (d1.dim != n || d2.dim != n)
    throw ModelError("loop: disturbance dimension mismatch");
  if (d1.frames() != d2.frames() || d1.dt != d2.dt)
    throw ModelError("loop: disturbance grids differ");

  const CompiledModel cp = compile(p), cc = compile(c);
  const std::size_t nt = d1.frames();
  const double dt = d1.dt;
  std::vector<double> xp(cp.nx, 0.0), xc(cc.nx, 0.0);
  std::vector<double> xps(cp.nx), xcs(cc.nx);
  std::vector<double> k1p(cp.nx), k2p(cp.nx), k3p(cp.nx), k4p(cp.nx);
  std::vector<double> k1c(cc.nx), k2c(cc.nx), k3c(cc.nx), k4c(cc.nx);
  std::vector<double> u1(n), y1(n), u2(n), y2(n), d1h(n), d2h(n);
  const bool fp = p.has_feedthrough(), fc = c.has_feedthrough();

  LoopRun run;
  run.trace.d1 = d1;
  run.trace.d2 = d2;
  run.trace.u1 = zeros(dt, d1.horizon(), n);
  run.trace.y1 = zeros(dt, d1.horizon(), n);
  run.trace.u2 = zeros(dt, d1.horizon(), n);
  run.trace.y2 = zeros(dt, d1.horizon(), n);

  // Resolve the static node equations for given states and disturbances.
  // With at most one feedthrough side the loop is triangular; with both,
  // iterate the contraction (gain product < 1 per the well-posed gate).
  auto solve_node = [&](const double* sp, const double* sc, const double* dv1,
                        const double* dv2, double t) {
    if (!fp) {
      cp.output(sp, u1.data(), y1.data());  // independent of u1
      for (std::size_t i = 0; i < n; ++i) u2[i] = dv2[i] + y1[i];
      cc.output(sc, u2.data(), y2.data());
      for (std::size_t i = 0; i < n; ++i) u1[i] = dv1[i] + y2[i];
    } else if (!fc) {
      cc.output(sc, u2.data(), y2.data());
      for (std::size_t i = 0; i < n; ++i) u1[i] = dv1[i] + y2[i];
      cp.output(sp, u1.data(), y1.data());
      for (std::size_t i = 0; i < n; ++i) u2[i] = dv2[i] + y1[i];
    } else {
      std::fill(y2.begin(), y2.end(), 0.0);
      bool converged = false;
      for (int it = 0; it < 50 && !converged; ++it) {
        for (std::size_t i = 0; i < n; ++i) u1[i] = dv1[i] + y2[i];
        cp.output(sp, u1.data(), y1.data());
        for (std::size_t i = 0; i < n; ++i) u2[i] = dv2[i] + y1[i];
        converged = true;
        std::vector<double> next(n);
        cc.output(sc, u2.data(), next.data());
        for (std::size_t i = 0; i < n; ++i) {
          if (std::abs(next[i] - y2[i]) > 1e-12 * (1 + std::abs(next[i])))
            converged = false;
          y2[i] = next[i];
        }
      }
      if (!converged)
        throw SimulationError("algebraic loop did not converge", t);
    }
  };

  auto deriv_combined = [&](const double* sp, const double* sc,
                            const double* dv1, const double* dv2, double t,
                            double* dxp, double* dxc) {
    solve_node(sp, sc, dv1, dv2, t);
    cp.deriv(sp, u1.data(), dxp);
    cc.deriv(sc, u2.data(), dxc);
  };

  const StageInterpolator i1(d1), i2(d2);
  auto record = [&](std::size_t m) {
    solve_node(xp.data(), xc.data(), &d1.samples[m * n], &d2.samples[m * n],
               d1.time(m));
    for (std::size_t i = 0; i < n; ++i) {
      run.trace.u1.at(m, i) = u1[i];
      run.trace.y1.at(m, i) = y1[i];
      run.trace.u2.at(m, i) = u2[i];
      run.trace.y2.at(m, i) = y2[i];
    }
  };

  try {
    record(0);
    for (std::size_t m = 0; m + 1 < nt; ++m) {
      const double t = d1.time(m);
      try {
        const double* d1a = &d1.samples[m * n];
        const double* d1b = &d1.samples[(m + 1) * n];
        const double* d2a = &d2.samples[m * n];
        const double* d2b = &d2.samples[(m + 1) * n];
        i1.mid(m, d1h.data());
        i2.mid(m, d2h.data());

        deriv_combined(xp.data(), xc.data(), d1a, d2a, t, k1p.data(),
                       k1c.data());
        for (std::size_t i = 0; i < cp.nx; ++i)
          xps[i] = xp[i] + 0.5 * dt * k1p[i];
        for (std::size_t i = 0; i < cc.nx; ++i)
          xcs[i] = xc[i] + 0.5 * dt * k1c[i];
        deriv_combined(xps.data(), xcs.data(), d1h.data(), d2h.data(),
                       t + 0.5 * dt, k2p.data(), k2c.data());
        for (std::size_t i = 0; i < cp.nx; ++i)
          xps[i] = xp[i] + 0.5 * dt * k2p[i];
        for (std::size_t i = 0; i < cc.nx; ++i)
          xcs[i] = xc[i] + 0.5 * dt * k2c[i];
        deriv_combined(xps.data(), xcs.data(), d1h.data(), d2h.data(),
                       t + 0.5 * dt, k3p.data(), k3c.data());
        for (std::size_t i = 0; i < cp.nx; ++i) xps[i] = xp[i] + dt * k3p[i];
        for (std::size_t i = 0; i < cc.nx; ++i) xcs[i] = xc[i] + dt * k3c[i];
        deriv_combined(xps.data(), xcs.data(), d1b, d2b, t + dt, k4p.data(),
                       k4c.data());
        for (std::size_t i = 0; i < cp.nx; ++i)
          xp[i] += dt / 6.0 * (k1p[i] + 2 * k2p[i] + 2 * k3p[i] + k4p[i]);
        for (std::size_t i = 0; i < cc.nx; ++i)
          xc[i] += dt / 6.0 * (k1c[i] + 2 * k2c[i] + 2 * k3c[i] + k4c[i]);
      } catch (const expr::EvaluationError& e) {
        throw SimulationError(e.what(), t);
      }
      for (const auto* xv : {&xp, &xc})
        for (double v : *xv)
          if (!std::isfinite(v) || std::abs(v) > kStateCap)
            throw SimulationError("state overflow", t + dt);
      record(m + 1);
    }
  } catch (const SimulationError& e) {
    if (!stop_on_overflow) throw;
    run.overflow_time = e.time();
  }
  return run;
}

}  // namespace detail

inline LoopTrace simulate_loop(const SystemModel& p, const SystemModel& c,
                               const Signal& d1, const Signal& d2) {
  return detail::run_loop(p, c, d1, d2, false).trace;
}

enum class TailLabel { decaying, indeterminate, growing };

inline const char* to_string(TailLabel l) {
  switch (l) {
    case TailLabel::decaying: return "decaying";
    case TailLabel::growing: return "growing";
    default: return "indeterminate";
  }
}

struct ImpulseConfig {
  double dt = 1e-3;
  double horizon = 50.0;
  double pulse_width = 0.01;
  double decaying_below = 0.1;  // tail/head energy ratio thresholds
  double growing_above = 0.5;
};

struct ImpulseReport {
  LoopTrace trace;
  double tail_ratio = 0;
  double peak = 0;
  TailLabel label = TailLabel::indeterminate;
  std::optional<double> overflow_time;
};

// Impulse response experiment: a unit-area rectangular pulse on d1, nothing
// on d2. The label compares the energy of y1 in the second half of the
// horizon against the first half; divergence counts as growing.
inline ImpulseReport impulse_experiment(const SystemModel& p,
                                        const SystemModel& c,
                                        const ImpulseConfig& cfg = {}) {
  const std::size_t n = p.io_dim();
  Signal d1 = unit_pulse(cfg.dt, cfg.horizon, cfg.pulse_width);
  if (n > 1) {
    Signal v = zeros(cfg.dt, cfg.horizon, n);
    for (std::size_t m = 0; m < v.frames(); ++m) v.at(m, 0) = d1.at(m, 0);
    d1 = std::move(v);
  }
  const Signal d2 = zeros(cfg.dt, cfg.horizon, n);
  detail::LoopRun run = detail::run_loop(p, c, d1, d2, true);

  ImpulseReport rep;
  rep.trace = std::move(run.trace);
  rep.overflow_time = run.overflow_time;
  const Signal& y1 = rep.trace.y1;
  rep.peak = sup_norm(y1);
  const double half = 0.5 * y1.horizon();
  const double head = inner_integral(y1, y1, half);
  const double total = inner_integral(y1, y1, y1.horizon());
  const double tail = std::max(0.0, total - head);
  rep.tail_ratio = head > 0 ? tail / head
                            : (tail > 0
                                   ? std::numeric_limits<double>::infinity()
                                   : 0.0);
  if (run.overflow_time) {
    rep.label = TailLabel::growing;
    rep.tail_ratio = std::numeric_limits<double>::infinity();
  } else if (rep.tail_ratio < cfg.decaying_below) {
    rep.label = TailLabel::decaying;
  } else if (rep.tail_ratio > cfg.growing_above) {
    rep.label = TailLabel::growing;
  }
  return rep;
}

struct StabilityVerdict {
  std::map<std::string, VerdictReport> premises;
  bool certified = false;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> notes;

  void finalize() {
    certified = !premises.empty();
    for (const auto& [name, rep] : premises)
      certified = certified && rep.verdict == Verdict::pass;
  }
};

namespace detail {

// Rewrap an NI verdict as a premise that demands a minimum classification.
inline VerdictReport require_ni_class(const NIVerdict& nv, bool need_strict) {
  VerdictReport rep = nv.report;
  const bool ok = need_strict ? nv.classification == NIClass::sni : nv.is_ni();
  if (nv.classification == NIClass::inconclusive)
    rep.verdict = Verdict::inconclusive;
  else
    rep.verdict = ok ? Verdict::pass : Verdict::fail;
  rep.notes.push_back(std::string("required: ") +
                      (need_strict ? "SNI" : "NI or SNI"));
  return rep;
}

}  // namespace detail

// Certificate assembly for the strict/relaxed pairing: P strictly NI and
// inside B(Xi, eps) with eps > 0, C merely NI with every tau-scaling inside
// the complementary set at eps = 0, and the loop well-posed.
inline StabilityVerdict check_theorem_sni2(const SystemModel& p,
                                           const SystemModel& c,
                                           const XiConstraint& xi,
                                           const InputBattery& battery,
                                           const BandConfig& bands,
                                           const std::vector<double>& tau_grid) {
  if (!(xi.epsilon > 0))
    throw AnalysisError("check_theorem_sni2: xi.epsilon must be positive");
  StabilityVerdict sv;
  sv.premises["p_sni"] =
      detail::require_ni_class(check_ni(p, battery, bands), true);
  sv.premises["p_b_membership"] = b_membership(p, xi, battery);
  sv.premises["c_ni"] =
      detail::require_ni_class(check_ni(c, battery, bands), false);
  sv.premises["c_bc_membership"] =
      bc_membership_scaled(c, xi.with_epsilon(0), battery).report;
  sv.premises["wellposed"] = wellposed_gate(p, c);
  sv.notes.push_back(
      "tau scaling verified exactly over [0, 1] (quadratic interval analysis; "
      "grid size " +
      std::to_string(tau_grid.size()) + ")");
  sv.finalize();
  return sv;
}

// Certificate for an LTI plant against a (possibly nonlinear) controller
// with rotation evidence standing in for the controller's NI property.
inline StabilityVerdict check_corollary_nl(const SystemModel& p_lti,
                                           const SystemModel& c_nl,
                                           const XiConstraint& xi,
                                           const InputBattery& battery) {
  if (!p_lti.is_lti())
    throw AnalysisError("check_corollary_nl: plant must be linear");
  StabilityVerdict sv;
  sv.premises["p_sni_sweep"] =
      detail::require_ni_class(lti_ni_sweep(p_lti), true);
  // strict DC set condition for the plant
  VerdictReport dc = lti_b_condition(p_lti, xi.with_epsilon(0));
  const double lam = dc.metrics["max_eig"];
  dc.check = "dc-form-strict";
  dc.verdict = lam < -1e-12 ? Verdict::pass : Verdict::fail;
  dc.margin = -lam;
  sv.premises["p_dc_form"] = dc;
  sv.premises["c_ccw"] = check_ccw(c_nl, battery);
  sv.premises["c_bc_membership"] =
      bc_membership_scaled(c_nl, xi.with_epsilon(0), battery).report;
  // roll-off condition: controller instantaneous gain against the plant's
  // feedthrough bound
  {
    const Gain gc = instantaneous_gain(c_nl);
    const auto dp = detail::feedthrough_matrix(p_lti, 1.0);
    const double sp = max_singular_value(*dp);
    VerdictReport rep;
    rep.check = "rolloff";
    const double product = gc.value * sp;
    rep.verdict = product < 1.0 - 1e-9 ? Verdict::pass : Verdict::fail;
    rep.margin = 1.0 - product;
    rep.metrics["gain_c"] = gc.value;
    rep.metrics["p_inf_gain"] = sp;
    sv.premises["rolloff"] = rep;
  }
  sv.finalize();
  if (!sv.certified && sv.premises["p_sni_sweep"].verdict == Verdict::fail &&
      sv.premises["p_dc_form"].verdict == Verdict::pass &&
      sv.premises["c_bc_membership"].verdict == Verdict::pass)
    sv.notes.push_back(
        "set-membership premises hold but the frequency sweep is not SNI; "
        "certification withheld on the sweep evidence");
  return sv;
}

// Fully linear certificate: strict plant forms and nonnegative scaled
// controller forms at both frequency extremes, plus both NI sweeps.
inline StabilityVerdict check_corollary_lti(const SystemModel& p_tf,
                                            const SystemModel& c_tf,
                                            const XiConstraint& xi0,
                                            const XiConstraint& xi_inf,
                                            const std::vector<double>& tau_grid) {
  if (!p_tf.is_lti() || !c_tf.is_lti())
    throw AnalysisError("check_corollary_lti: both systems must be linear");
  const std::size_t n = p_tf.io_dim();
  if (c_tf.io_dim() != n || xi0.n() != n || xi_inf.n() != n)
    throw AnalysisError("check_corollary_lti: dimension mismatch");

  const ComplexMatrix p0 = freq_response(p_tf, 0.0);
  const ComplexMatrix c0 = freq_response(c_tf, 0.0);
  const ComplexMatrix pinf = to_complex(*detail::feedthrough_matrix(p_tf, 1.0));
  const ComplexMatrix cinf = to_complex(*detail::feedthrough_matrix(c_tf, 1.0));

  StabilityVerdict sv;
  auto p_form = [&](const ComplexMatrix& g, const ComplexMatrix& xi,
                    const char* name) {
    ComplexMatrix stack(2 * n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) stack(i, j) = g(i, j);
      stack(n + i, i) = 1;
    }
    const double lam = max_eigenvalue(adjoint(stack) * xi * stack);
    VerdictReport rep;
    rep.check = name;
    rep.verdict = lam < -1e-12 ? Verdict::pass : Verdict::fail;
    rep.margin = -lam;
    rep.metrics["max_eig"] = lam;
    sv.premises[name] = rep;
  };
  auto c_form = [&](const ComplexMatrix& g, const ComplexMatrix& xi,
                    const char* name) {
    // F(tau) = [I; tau G]^* xi [I; tau G], quadratic in tau; for the scalar
    // case the interval minimum is exact, otherwise the grid decides
    double fmin = std::numeric_limits<double>::infinity();
    double worst_tau = 0;
    auto eval = [&](double tau) {
      ComplexMatrix stack(2 * n, n);
      for (std::size_t i = 0; i < n; ++i) {
        stack(i, i) = 1;
        for (std::size_t j = 0; j < n; ++j) stack(n + i, j) = tau * g(i, j);
      }
      return min_eigenvalue(adjoint(stack) * xi * stack);
    };
    for (double tau : tau_grid) {
      const double v = eval(tau);
      if (v < fmin) {
        fmin = v;
        worst_tau = tau;
      }
    }
    if (n == 1) {
      const double a = (std::conj(g(0, 0)) * xi(1, 1) * g(0, 0)).real();
      const double b = 2 * (xi(0, 1) * g(0, 0)).real();
      if (a > 0) {
        const double tv = -b / (2 * a);
        if (tv > 0 && tv < 1) {
          const double v = eval(tv);
          if (v < fmin) {
            fmin = v;
            worst_tau = tv;
          }
        }
      }
    }
    VerdictReport rep;
    rep.check = name;
    rep.verdict = fmin >= -1e-12 ? Verdict::pass : Verdict::fail;
    rep.margin = fmin;
    rep.metrics["min_eig"] = fmin;
    rep.metrics["worst_tau"] = worst_tau;
    sv.premises[name] = rep;
  };

  p_form(p0, xi0.xi, "p_form_dc");
  p_form(pinf, xi_inf.xi, "p_form_inf");
  c_form(c0, xi0.xi, "c_form_dc");
  c_form(cinf, xi_inf.xi, "c_form_inf");
  sv.premises["p_sni_sweep"] =
      detail::require_ni_class(lti_ni_sweep(p_tf), true);
  sv.premises["c_ni_sweep"] =
      detail::require_ni_class(lti_ni_sweep(c_tf), false);
  sv.finalize();
  return sv;
}

}  // namespace niqc
