#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "niqc/errors.hpp"
#include "niqc/signal.hpp"
#include "niqc/sysmodel.hpp"
#include "niqc/verdict.hpp"

// Counterclockwise and negative-imaginary property checks. All "for all u"
// statements are probed by falsification over a seeded battery of decaying
// test inputs; a passing verdict means "not falsified, with margin" and the
// reports carry the battery size and seed.

namespace niqc {

struct BatteryConfig {
  std::uint64_t seed = 1;
  std::size_t count = 50;
  double dt = 1e-3;
  double horizon = 40.0;
  std::size_t dim = 1;
  int max_terms = 5;                  // damped sinusoids per member
  double lambda_lo = 0.2, lambda_hi = 2.0;
  double omega_lo = 0.05, omega_hi = 20.0;
  double amp_lo = 0.1, amp_hi = 1.0;
  bool include_pulses = true;         // every 10th member is a unit-area pulse
  double pulse_width = 0.01;
  double decay_floor = 1e-6;          // envelope bound at the horizon
};

// Deterministic family of test inputs: sums of damped sinusoids
// a e^{-lambda t} sin(w t + phi) whose envelope decays below decay_floor by
// the horizon (so each member is numerically in L1 and L2), plus optional
// unit-area pulses for broadband excitation.
class InputBattery {
public:
  explicit InputBattery(BatteryConfig cfg = {}) : cfg_(cfg) {
    if (cfg.count == 0) throw AnalysisError("battery: count must be positive");
    std::mt19937_64 eng(cfg.seed);
    // Raw 53-bit uniform; avoids distribution objects whose sequences are
    // not pinned down by the standard.
    auto uni = [&](double lo, double hi) {
      const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
      return lo + u * (hi - lo);
    };
    members_.reserve(cfg.count);
    for (std::size_t i = 0; i < cfg.count; ++i) {
      if (cfg.include_pulses && i % 10 == 9) {
        Signal p = unit_pulse(cfg.dt, cfg.horizon, cfg.pulse_width);
        if (cfg.dim > 1) {
          Signal v = zeros(cfg.dt, cfg.horizon, cfg.dim);
          for (std::size_t m = 0; m < v.frames(); ++m)
            v.at(m, i % cfg.dim) = p.at(m, 0);
          members_.push_back(std::move(v));
        } else {
          members_.push_back(std::move(p));
        }
        continue;
      }
      struct Term {
        double a, lambda, omega, phi;
      };
      std::vector<std::vector<Term>> comp(cfg.dim);
      for (auto& terms : comp) {
        const int k =
            1 + std::min<int>(cfg.max_terms - 1,
                              static_cast<int>(uni(0, cfg.max_terms)));
        for (int t = 0; t < k; ++t) {
          Term tm;
          tm.a = uni(cfg.amp_lo, cfg.amp_hi) * (uni(0, 1) < 0.5 ? -1.0 : 1.0);
          tm.omega = uni(cfg.omega_lo, cfg.omega_hi);
          tm.phi = uni(0, 2 * std::numbers::pi);
          // resample the decay rate until the term is negligible at the
          // horizon (keeps the battery inside L1 for the transforms)
          const double floor_k = cfg.decay_floor / static_cast<double>(k);
          tm.lambda = uni(cfg.lambda_lo, cfg.lambda_hi);
          while (std::abs(tm.a) * std::exp(-tm.lambda * cfg.horizon) > floor_k)
            tm.lambda = uni(cfg.lambda_lo, cfg.lambda_hi);
          terms.push_back(tm);
        }
      }
      Signal u = zeros(cfg.dt, cfg.horizon, cfg.dim);
      for (std::size_t m = 0; m < u.frames(); ++m) {
        const double t = u.time(m);
        for (std::size_t c = 0; c < cfg.dim; ++c) {
          double s = 0;
          for (const auto& tm : comp[c])
            s += tm.a * std::exp(-tm.lambda * t) *
                 std::sin(tm.omega * t + tm.phi);
          u.at(m, c) = s;
        }
      }
      members_.push_back(std::move(u));
    }
  }

  const std::vector<Signal>& members() const { return members_; }
  const BatteryConfig& config() const { return cfg_; }
  std::size_t size() const { return members_.size(); }

private:
  BatteryConfig cfg_;
  std::vector<Signal> members_;
};

// Frequency bands for the finite-frequency NI test. The starred band is the
// one a certificate is claimed for; probe bands must all contain it.
struct BandConfig {
  double omega_lo_star = 0.05;
  double omega_hi_star = 50.0;
  std::vector<std::pair<double, double>> probe_bands = {
      {0.05, 50.0}, {0.02, 50.0}, {0.05, 80.0}, {0.02, 80.0}};

  void validate() const {
    if (!(omega_lo_star > 0 && omega_lo_star <= omega_hi_star))
      throw AnalysisError("band config: need 0 < omega_lo* <= omega_hi*");
    for (const auto& [lo, hi] : probe_bands)
      if (lo > omega_lo_star || hi < omega_hi_star)
        throw AnalysisError(
            "band config: probe band must contain the starred band");
  }
};

// integral_0^T <u, dy/dt> dt
inline double ccw_functional(const Signal& u, const Signal& y, double T) {
  return inner_integral(u, derivative(y), T);
}

inline const std::vector<double>& ccw_horizon_fractions() {
  static const std::vector<double> f = {0.25, 0.5, 1.0};
  return f;
}

// Counterclockwise test: the input/output-derivative integral must be
// nonnegative (up to scale-aware tolerance) at every ladder horizon for
// every battery member. Strict positivity of the full-horizon value is the
// recorded evidence for the unbounded-rotation assumption.
inline VerdictReport check_ccw(const SystemModel& sys,
                               const InputBattery& battery) {
  VerdictReport rep;
  rep.check = "ccw";
  double min_slack = std::numeric_limits<double>::infinity();
  double min_value = std::numeric_limits<double>::infinity();
  double min_full = std::numeric_limits<double>::infinity();
  double min_deriv_energy = std::numeric_limits<double>::infinity();
  int witness = -1;
  for (std::size_t i = 0; i < battery.size(); ++i) {
    const Signal& u = battery.members()[i];
    const Signal y = simulate(sys, u).output;
    const Signal dy = derivative(y);
    const double allow = 1e-6 * (1 + l2_norm(u) * l2_norm(y));
    min_deriv_energy =
        std::min(min_deriv_energy, l2_norm(dy) * l2_norm(dy));
    for (double f : ccw_horizon_fractions()) {
      const double T = f * u.horizon();
      const double v = inner_integral(u, dy, T);
      min_value = std::min(min_value, v);
      if (f == 1.0) min_full = std::min(min_full, v);
      const double slack = v + allow;
      if (slack < min_slack) {
        min_slack = slack;
        witness = static_cast<int>(i);
      }
    }
  }
  rep.verdict = min_slack >= 0 ? Verdict::pass : Verdict::fail;
  rep.margin = min_slack;
  rep.metrics["min_value"] = min_value;
  rep.metrics["min_full_horizon"] = min_full;
  rep.metrics["min_deriv_energy"] = min_deriv_energy;
  rep.metrics["battery_count"] = static_cast<double>(battery.size());
  rep.metrics["seed"] = static_cast<double>(battery.config().seed);
  rep.witness_index = rep.verdict == Verdict::fail ? witness : -1;
  rep.notes.push_back(min_full > 0
                          ? "full-horizon integrals strictly positive "
                            "(rotation-assumption evidence)"
                          : "full-horizon integral not strictly positive");
  return rep;
}

enum class NIClass { sni, ni, not_ni, inconclusive };

inline const char* to_string(NIClass c) {
  switch (c) {
    case NIClass::sni: return "SNI";
    case NIClass::ni: return "NI";
    case NIClass::not_ni: return "not-NI";
    default: return "inconclusive";
  }
}

struct NIVerdict {
  NIClass classification = NIClass::inconclusive;
  double epsilon_hat = 0;   // estimated strictness margin, clipped at 0
  double min_band_value = 0;
  double min_ratio = 0;     // min band integral / band input energy
  std::pair<double, double> worst_band{0, 0};
  int witness_index = -1;
  VerdictReport report;

  bool is_ni() const {
    return classification == NIClass::sni || classification == NIClass::ni;
  }
};

inline constexpr double kSniRatioFloor = 1e-4;

// Finite-frequency NI test. For each battery member and each probe band the
// band functional r = Re Int <u_hat, jw y_hat> dw must be nonnegative up to
// an input-scaled tolerance; the system is strictly NI when r stays above a
// fixed fraction of the band input energy.
inline NIVerdict check_ni(const SystemModel& sys, const InputBattery& battery,
                          const BandConfig& bands,
                          std::optional<FreqGrid> grid_in = std::nullopt) {
  bands.validate();
  const FreqGrid grid =
      grid_in ? *grid_in : FreqGrid::standard(battery.config().dt);
  NIVerdict v;
  v.report.check = "ni-band";
  double min_slack = std::numeric_limits<double>::infinity();
  double min_value = std::numeric_limits<double>::infinity();
  double min_ratio = std::numeric_limits<double>::infinity();
  std::pair<double, double> worst{0, 0};
  int witness = -1;
  bool any_ratio = false;
  for (std::size_t i = 0; i < battery.size(); ++i) {
    const Signal& u = battery.members()[i];
    const Signal y = simulate(sys, u).output;
    const Spectrum uh = fourier(u, grid);
    const Spectrum yh = fourier(y, grid);
    const double nu = l2_norm(u);
    const double tol_abs = 1e-6 * (1 + nu * nu);
    for (const auto& band : bands.probe_bands) {
      const double r = band_quadratic(uh, yh, band.first, band.second);
      const double e = band_energy(uh, band.first, band.second);
      min_value = std::min(min_value, r);
      const double slack = r + tol_abs;
      if (slack < min_slack) {
        min_slack = slack;
        worst = band;
        witness = static_cast<int>(i);
      }
      if (e > 1e-12) {
        min_ratio = std::min(min_ratio, r / e);
        any_ratio = true;
      }
    }
  }
  if (!any_ratio) {
    v.classification = NIClass::inconclusive;
    v.report.verdict = Verdict::inconclusive;
    v.report.notes.push_back("no band carried measurable input energy");
    return v;
  }
  v.min_band_value = min_value;
  v.min_ratio = min_ratio;
  v.epsilon_hat = std::max(0.0, min_ratio);
  v.worst_band = worst;
  if (min_slack < 0) {
    v.classification = NIClass::not_ni;
    v.witness_index = witness;
    v.report.verdict = Verdict::fail;
    v.report.witness_index = witness;
  } else if (min_ratio >= kSniRatioFloor) {
    v.classification = NIClass::sni;
    v.report.verdict = Verdict::pass;
  } else {
    v.classification = NIClass::ni;
    v.report.verdict = Verdict::pass;
  }
  v.report.margin = min_slack;
  v.report.metrics["min_band_value"] = min_value;
  v.report.metrics["min_ratio"] = min_ratio;
  v.report.metrics["epsilon_hat"] = v.epsilon_hat;
  v.report.metrics["battery_count"] = static_cast<double>(battery.size());
  v.report.metrics["seed"] = static_cast<double>(battery.config().seed);
  v.report.notes.push_back(std::string("classification: ") +
                           to_string(v.classification));
  return v;
}

inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  std::vector<double> g(count);
  const double l0 = std::log(lo), l1 = std::log(hi);
  for (std::size_t i = 0; i < count; ++i)
    g[i] = std::exp(l0 + (l1 - l0) * static_cast<double>(i) /
                             static_cast<double>(count - 1));
  return g;
}

// Smallest eigenvalue of j(G(jw) - G(jw)^*) at one frequency; for scalar
// systems this is -2 Im G(jw).
inline double ni_sweep_value(const SystemModel& sys, double omega) {
  const ComplexMatrix g = freq_response(sys, omega);
  const std::size_t n = g.rows();
  if (n == 1) return -2.0 * std::imag(g(0, 0));
  ComplexMatrix m(n, n);
  const Complex j(0, 1);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      m(r, c) = j * (g(r, c) - std::conj(g(c, r)));
  return min_eigenvalue(m);
}

// Classical frequency-domain NI test for linear models: sweep the smallest
// eigenvalue of j(G - G^*) over a log grid of positive frequencies.
inline NIVerdict lti_ni_sweep(const SystemModel& sys,
                              const std::vector<double>& omegas = log_grid(
                                  1e-2, 1e2, 256),
                              double tol = 1e-9) {
  if (!sys.is_lti()) throw AnalysisError("lti_ni_sweep: model is not linear");
  if (omegas.empty()) throw AnalysisError("lti_ni_sweep: empty grid");
  NIVerdict v;
  v.report.check = "ni-sweep";
  double min_val = std::numeric_limits<double>::infinity();
  double worst_omega = omegas.front();
  for (double w : omegas) {
    const double val = ni_sweep_value(sys, w);
    if (val < min_val) {
      min_val = val;
      worst_omega = w;
    }
  }
  v.min_band_value = min_val;
  v.min_ratio = min_val;
  v.epsilon_hat = std::max(0.0, min_val);
  v.worst_band = {worst_omega, worst_omega};
  if (min_val > tol)
    v.classification = NIClass::sni;
  else if (min_val >= -tol)
    v.classification = NIClass::ni;
  else
    v.classification = NIClass::not_ni;
  v.report.verdict =
      v.classification == NIClass::not_ni ? Verdict::fail : Verdict::pass;
  v.report.margin = min_val;
  v.report.metrics["min_value"] = min_val;
  v.report.metrics["worst_omega"] = worst_omega;
  v.report.notes.push_back(std::string("classification: ") +
                           to_string(v.classification));
  return v;
}

struct CrossCheck {
  NIVerdict battery_verdict;
  NIVerdict sweep_verdict;
  bool agree = false;
  VerdictReport report;
};

// The time-domain battery test and the frequency sweep must classify a
// linear system identically; disagreement marks a numerical blind spot.
inline CrossCheck crosscheck_lti(const SystemModel& sys,
                                 const InputBattery& battery,
                                 const BandConfig& bands,
                                 std::optional<FreqGrid> grid = std::nullopt) {
  CrossCheck cc;
  cc.battery_verdict = check_ni(sys, battery, bands, grid);
  cc.sweep_verdict = lti_ni_sweep(sys);
  cc.agree =
      cc.battery_verdict.classification == cc.sweep_verdict.classification;
  cc.report.check = "ni-crosscheck";
  cc.report.verdict = cc.agree ? Verdict::pass : Verdict::fail;
  cc.report.margin =
      std::min(cc.battery_verdict.report.margin, cc.sweep_verdict.report.margin);
  cc.report.metrics["battery_min_ratio"] = cc.battery_verdict.min_ratio;
  cc.report.metrics["sweep_min_value"] = cc.sweep_verdict.min_band_value;
  cc.report.notes.push_back(
      std::string("battery: ") + to_string(cc.battery_verdict.classification) +
      ", sweep: " + to_string(cc.sweep_verdict.classification));
  return cc;
}

struct IdentityCheck {
  double lhs = 0;  // time-domain rotation integral
  double rhs = 0;  // the claimed nonnegative integrand, integrated
};

// Both sides of the saturating-plant energy identity, reported without a
// pass/fail decision; the comparison itself is a claim under test.
inline IdentityCheck example_identity_check(const Signal& u) {
  const SystemModel p = builtin("paper-P");
  const Signal y = simulate(p, u).output;
  IdentityCheck r;
  r.lhs = ccw_functional(u, y, u.horizon());
  Signal integrand = zeros(u.dt, u.horizon(), 1);
  for (std::size_t m = 0; m < u.frames(); ++m) {
    const double uv = u.at(m, 0), yv = y.at(m, 0);
    integrand.at(m, 0) =
        ((uv - yv) * (uv - yv) + uv * uv * yv * yv) / (1 + yv * yv);
  }
  r.rhs = integral(integrand)[0];
  return r;
}

}  // namespace niqc
