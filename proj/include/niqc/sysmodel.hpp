#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "niqc/errors.hpp"
#include "niqc/expr.hpp"
#include "niqc/linalg.hpp"
#include "niqc/signal.hpp"

// System descriptions and simulation. A model is a tree whose leaves are
// either linear state-space blocks or expression-defined nonlinear blocks,
// combined by output scaling and parallel summation. Everything is square
// (equal input and output dimension), matching the feedback algebra used by
// the stability checks.

namespace niqc {

// Proper rational transfer function with a stable denominator, coefficients
// in descending powers of s. Construction rejects improper or non-Hurwitz
// data so a RationalTF is always a valid stable LTI description.
struct RationalTF {
  std::vector<double> num, den;

  RationalTF(std::vector<double> num_, std::vector<double> den_)
      : num(strip(std::move(num_))), den(strip(std::move(den_))) {
    if (den.empty()) throw ModelError("transfer function: zero denominator");
    if (num.empty()) num = {0.0};
    if (num.size() > den.size())
      throw ModelError("transfer function: improper (numerator degree too high)");
    if (den[0] < 0)
      for (auto* v : {&num, &den})
        for (double& c : *v) c = -c;
    if (!is_hurwitz(den))
      throw ModelError("transfer function: denominator is not Hurwitz stable");
  }

  std::complex<double> eval(std::complex<double> s) const {
    auto horner = [&](const std::vector<double>& c) {
      std::complex<double> acc = 0;
      for (double v : c) acc = acc * s + v;
      return acc;
    };
    return horner(num) / horner(den);
  }

  // Routh array test: strictly stable only (marginal polynomials rejected).
  static bool is_hurwitz(const std::vector<double>& den) {
    const std::size_t n = den.size() - 1;  // degree
    if (n == 0) return true;
    std::vector<double> prev, curr;
    for (std::size_t i = 0; i < den.size(); i += 2) prev.push_back(den[i]);
    for (std::size_t i = 1; i < den.size(); i += 2) curr.push_back(den[i]);
    if (prev[0] <= 0) return false;
    while (!curr.empty()) {
      if (curr[0] <= 0) return false;
      std::vector<double> next;
      for (std::size_t j = 0; j + 1 < prev.size(); ++j) {
        const double a = j + 1 < prev.size() ? prev[j + 1] : 0.0;
        const double b = j + 1 < curr.size() ? curr[j + 1] : 0.0;
        next.push_back((curr[0] * a - prev[0] * b) / curr[0]);
      }
      prev = std::move(curr);
      curr = std::move(next);
    }
    return true;
  }

private:
  static std::vector<double> strip(std::vector<double> c) {
    std::size_t lead = 0;
    while (lead + 1 < c.size() && c[lead] == 0.0) ++lead;
    c.erase(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(lead));
    if (c.size() == 1 && c[0] == 0.0) c.clear();
    return c;
  }
};

struct StateSpace {
  RealMatrix A, B, C, D;

  StateSpace(RealMatrix a, RealMatrix b, RealMatrix c, RealMatrix d)
      : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
    const std::size_t nx = A.rows(), n = D.rows();
    if (A.cols() != nx || B.rows() != nx || C.cols() != nx)
      throw ModelError("state space: inconsistent state dimension");
    if (D.cols() != n || B.cols() != n || C.rows() != n || n < 1)
      throw ModelError("state space: inconsistent i/o dimension");
  }

  std::size_t state_dim() const { return A.rows(); }
  std::size_t io_dim() const { return D.rows(); }

  bool has_feedthrough() const {
    for (std::size_t i = 0; i < D.rows(); ++i)
      for (std::size_t j = 0; j < D.cols(); ++j)
        if (D(i, j) != 0.0) return true;
    return false;
  }
};

// Controllable canonical realization.
inline StateSpace tf_to_ss(const RationalTF& tf) {
  std::vector<double> den = tf.den, num = tf.num;
  const double lead = den[0];
  for (double& c : den) c /= lead;
  for (double& c : num) c /= lead;
  const std::size_t n = den.size() - 1;
  double d = 0;
  if (num.size() == den.size()) {
    d = num[0];
    for (std::size_t i = 0; i < num.size(); ++i) num[i] -= d * den[i];
    num.erase(num.begin());
  }
  // left-pad strictly proper numerator to length n
  std::vector<double> b(n, 0.0);
  for (std::size_t i = 0; i < num.size(); ++i)
    b[n - num.size() + i] = num[i];

  RealMatrix A(n, n), B(n, std::size_t{1}), C(std::size_t{1}, n), D(1, 1);
  for (std::size_t i = 0; i + 1 < n; ++i) A(i, i + 1) = 1.0;
  for (std::size_t j = 0; j < n; ++j) A(n - 1, j) = -den[n - j];
  if (n > 0) B(n - 1, 0) = 1.0;
  for (std::size_t j = 0; j < n; ++j) C(0, j) = b[n - 1 - j];
  D(0, 0) = d;
  return StateSpace(A, B, C, D);
}

// Nonlinear block  x' = f(x, u), y = h(x, u)  with expressions per component.
// The origin must be an equilibrium with zero output.
struct NonlinearStateSpace {
  std::size_t nx, n;
  std::vector<expr::Expression> f, h;
  bool feedthrough_free;

  NonlinearStateSpace(std::size_t nx_, std::size_t n_,
                      const std::vector<std::string>& f_texts,
                      const std::vector<std::string>& h_texts)
      : nx(nx_), n(n_) {
    if (n < 1) throw ModelError("nonlinear model: i/o dimension must be >= 1");
    if (f_texts.size() != nx || h_texts.size() != n)
      throw ModelError("nonlinear model: expression count mismatch");
    for (const auto& t : f_texts) f.push_back(expr::Expression::parse(t));
    for (const auto& t : h_texts) h.push_back(expr::Expression::parse(t));
    feedthrough_free = true;
    for (const auto& e : f) check_indices(e);
    for (const auto& e : h) {
      check_indices(e);
      if (e.references_input()) feedthrough_free = false;
    }
    const std::vector<double> zx(nx, 0.0), zu(n, 0.0);
    for (const auto& e : f)
      if (std::abs(e.eval(zx, zu)) > 1e-12)
        throw ModelError("nonlinear model: origin is not an equilibrium ('" +
                         e.text() + "')");
    for (const auto& e : h)
      if (std::abs(e.eval(zx, zu)) > 1e-12)
        throw ModelError("nonlinear model: output not zero at the origin ('" +
                         e.text() + "')");
  }

private:
  void check_indices(const expr::Expression& e) const {
    if (e.max_state_index() > static_cast<int>(nx))
      throw ModelError("nonlinear model: state index out of range in '" +
                       e.text() + "'");
    if (e.max_input_index() > static_cast<int>(n))
      throw ModelError("nonlinear model: input index out of range in '" +
                       e.text() + "'");
  }
};

class SystemModel {
public:
  static SystemModel from_ss(StateSpace ss) {
    return SystemModel(Node{std::move(ss)});
  }
  static SystemModel from_tf(const RationalTF& tf) {
    return from_ss(tf_to_ss(tf));
  }
  static SystemModel nonlinear(NonlinearStateSpace nl) {
    return SystemModel(Node{std::move(nl)});
  }

  // Output scaling y -> tau * y with tau in [0, 1], the homotopy used by the
  // complement-set checks.
  static SystemModel scaled(double tau, SystemModel inner) {
    if (!(tau >= 0.0 && tau <= 1.0))
      throw ModelError("scaled: tau must lie in [0, 1]");
    return SystemModel(Node{Scaled{tau, share(std::move(inner))}});
  }

  static SystemModel parallel(SystemModel left, SystemModel right) {
    if (left.io_dim() != right.io_dim())
      throw ModelError("parallel: i/o dimension mismatch");
    return SystemModel(
        Node{Parallel{share(std::move(left)), share(std::move(right))}});
  }

  std::size_t io_dim() const {
    if (const auto* ss = std::get_if<StateSpace>(&node_)) return ss->io_dim();
    if (const auto* nl = std::get_if<NonlinearStateSpace>(&node_)) return nl->n;
    if (const auto* sc = std::get_if<Scaled>(&node_)) return sc->inner->io_dim();
    const auto& pr = std::get<Parallel>(node_);
    return pr.left->io_dim();
  }

  std::size_t state_dim() const {
    if (const auto* ss = std::get_if<StateSpace>(&node_)) return ss->state_dim();
    if (const auto* nl = std::get_if<NonlinearStateSpace>(&node_)) return nl->nx;
    if (const auto* sc = std::get_if<Scaled>(&node_)) return sc->inner->state_dim();
    const auto& pr = std::get<Parallel>(node_);
    return pr.left->state_dim() + pr.right->state_dim();
  }

  bool is_lti() const {
    if (std::holds_alternative<StateSpace>(node_)) return true;
    if (std::holds_alternative<NonlinearStateSpace>(node_)) return false;
    if (const auto* sc = std::get_if<Scaled>(&node_)) return sc->inner->is_lti();
    const auto& pr = std::get<Parallel>(node_);
    return pr.left->is_lti() && pr.right->is_lti();
  }

  bool has_feedthrough() const {
    if (const auto* ss = std::get_if<StateSpace>(&node_))
      return ss->has_feedthrough();
    if (const auto* nl = std::get_if<NonlinearStateSpace>(&node_))
      return !nl->feedthrough_free;
    if (const auto* sc = std::get_if<Scaled>(&node_))
      return sc->tau != 0.0 && sc->inner->has_feedthrough();
    const auto& pr = std::get<Parallel>(node_);
    return pr.left->has_feedthrough() || pr.right->has_feedthrough();
  }

  struct Scaled {
    double tau;
    std::shared_ptr<const SystemModel> inner;
  };
  struct Parallel {
    std::shared_ptr<const SystemModel> left, right;
  };
  using Node = std::variant<StateSpace, NonlinearStateSpace, Scaled, Parallel>;

  const Node& node() const { return node_; }

private:
  explicit SystemModel(Node n) : node_(std::move(n)) {}
  static std::shared_ptr<const SystemModel> share(SystemModel m) {
    return std::make_shared<const SystemModel>(std::move(m));
  }

  Node node_;
};

namespace detail {

// Flattened view of a model tree for the integrator: every leaf keeps its
// slice of the stacked state vector and the product of scalings above it.
struct CompiledLeaf {
  const StateSpace* ss = nullptr;
  const NonlinearStateSpace* nl = nullptr;
  double scale = 1.0;
  std::size_t x_off = 0, nx = 0;
};

struct CompiledModel {
  std::vector<CompiledLeaf> leaves;
  std::size_t nx = 0;
  std::size_t n = 0;

  void deriv(const double* x, const double* u, double* dx) const {
    for (const auto& lf : leaves) {
      const double* xl = x + lf.x_off;
      double* dl = dx + lf.x_off;
      if (lf.ss) {
        const auto& ss = *lf.ss;
        for (std::size_t i = 0; i < lf.nx; ++i) {
          double s = 0;
          for (std::size_t j = 0; j < lf.nx; ++j) s += ss.A(i, j) * xl[j];
          for (std::size_t j = 0; j < n; ++j) s += ss.B(i, j) * u[j];
          dl[i] = s;
        }
      } else {
        const std::span<const double> xs(xl, lf.nx), us(u, n);
        for (std::size_t i = 0; i < lf.nx; ++i) dl[i] = lf.nl->f[i].eval(xs, us);
      }
    }
  }

  void output(const double* x, const double* u, double* y) const {
    for (std::size_t i = 0; i < n; ++i) y[i] = 0;
    for (const auto& lf : leaves) {
      const double* xl = x + lf.x_off;
      if (lf.ss) {
        const auto& ss = *lf.ss;
        for (std::size_t i = 0; i < n; ++i) {
          double s = 0;
          for (std::size_t j = 0; j < lf.nx; ++j) s += ss.C(i, j) * xl[j];
          for (std::size_t j = 0; j < n; ++j) s += ss.D(i, j) * u[j];
          y[i] += lf.scale * s;
        }
      } else {
        const std::span<const double> xs(xl, lf.nx), us(u, n);
        for (std::size_t i = 0; i < n; ++i)
          y[i] += lf.scale * lf.nl->h[i].eval(xs, us);
      }
    }
  }
};

inline void compile_into(const SystemModel& m, double scale, CompiledModel& out) {
  if (const auto* ss = std::get_if<StateSpace>(&m.node())) {
    out.leaves.push_back({ss, nullptr, scale, out.nx, ss->state_dim()});
    out.nx += ss->state_dim();
  } else if (const auto* nl = std::get_if<NonlinearStateSpace>(&m.node())) {
    out.leaves.push_back({nullptr, nl, scale, out.nx, nl->nx});
    out.nx += nl->nx;
  } else if (const auto* sc = std::get_if<SystemModel::Scaled>(&m.node())) {
    compile_into(*sc->inner, scale * sc->tau, out);
  } else {
    const auto& pr = std::get<SystemModel::Parallel>(m.node());
    compile_into(*pr.left, scale, out);
    compile_into(*pr.right, scale, out);
  }
}

inline CompiledModel compile(const SystemModel& m) {
  CompiledModel c;
  c.n = m.io_dim();
  compile_into(m, 1.0, c);
  return c;
}

// Input value halfway between samples m and m+1 by 4-point Lagrange
// interpolation (shifted stencils at the ends, linear fallback for very
// short records). Cubic reconstruction keeps the integrator at full order.
struct StageInterpolator {
  const Signal& u;
  explicit StageInterpolator(const Signal& u_) : u(u_) {}

  void mid(std::size_t m, double* out) const {
    const std::size_t nt = u.frames();
    if (nt < 4) {
      for (std::size_t i = 0; i < u.dim; ++i)
        out[i] = 0.5 * (u.at(m, i) + u.at(m + 1, i));
      return;
    }
    std::size_t i0 = (m == 0) ? 0 : m - 1;
    i0 = std::min(i0, nt - 4);
    const double s = (static_cast<double>(m) + 0.5) - static_cast<double>(i0);
    const double w0 = (s - 1) * (s - 2) * (s - 3) / -6.0;
    const double w1 = s * (s - 2) * (s - 3) / 2.0;
    const double w2 = s * (s - 1) * (s - 3) / -2.0;
    const double w3 = s * (s - 1) * (s - 2) / 6.0;
    for (std::size_t i = 0; i < u.dim; ++i)
      out[i] = w0 * u.at(i0, i) + w1 * u.at(i0 + 1, i) +
               w2 * u.at(i0 + 2, i) + w3 * u.at(i0 + 3, i);
  }
};

inline constexpr double kStateCap = 1e12;

}  // namespace detail

struct SimResult {
  Signal output;
  Signal state;  // stacked leaf states; a zero scalar signal for static models
};

// Classical fixed-step RK4 on the input grid, zero initial state. Throws
// SimulationError with the first failing time on NaN or state blow-up.
inline SimResult simulate(const SystemModel& sys, const Signal& input) {
  if (input.dim != sys.io_dim())
    throw ModelError("simulate: input dimension does not match the model");
  const auto cm = detail::compile(sys);
  const std::size_t nt = input.frames(), nx = cm.nx, n = cm.n;
  const double dt = input.dt;

  Signal out = zeros(dt, input.horizon(), n);
  Signal states = zeros(dt, input.horizon(), std::max<std::size_t>(nx, 1));

  std::vector<double> x(nx, 0.0), xs(nx), k1(nx), k2(nx), k3(nx), k4(nx);
  std::vector<double> uh(n), y(n);
  const detail::StageInterpolator interp(input);

  auto record = [&](std::size_t m) {
    cm.output(x.data(), &input.samples[m * n], y.data());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(y[i]))
        throw SimulationError("non-finite output", input.time(m));
      out.at(m, i) = y[i];
    }
    for (std::size_t i = 0; i < nx; ++i) states.at(m, i) = x[i];
  };

  record(0);
  for (std::size_t m = 0; m + 1 < nt; ++m) {
    const double t = input.time(m);
    try {
      const double* u0 = &input.samples[m * n];
      const double* u1 = &input.samples[(m + 1) * n];
      interp.mid(m, uh.data());

      cm.deriv(x.data(), u0, k1.data());
      for (std::size_t i = 0; i < nx; ++i) xs[i] = x[i] + 0.5 * dt * k1[i];
      cm.deriv(xs.data(), uh.data(), k2.data());
      for (std::size_t i = 0; i < nx; ++i) xs[i] = x[i] + 0.5 * dt * k2[i];
      cm.deriv(xs.data(), uh.data(), k3.data());
      for (std::size_t i = 0; i < nx; ++i) xs[i] = x[i] + dt * k3[i];
      cm.deriv(xs.data(), u1, k4.data());
      for (std::size_t i = 0; i < nx; ++i)
        x[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    } catch (const expr::EvaluationError& e) {
      throw SimulationError(e.what(), t);
    }
    for (double v : x)
      if (!std::isfinite(v) || std::abs(v) > detail::kStateCap)
        throw SimulationError("state overflow", t + dt);
    try {
      record(m + 1);
    } catch (const expr::EvaluationError& e) {
      throw SimulationError(e.what(), t + dt);
    }
  }
  return {std::move(out), std::move(states)};
}

// Frequency response of a linear (possibly composed) model at a single
// frequency: D + C (jwI - A)^{-1} B summed across the tree.
inline ComplexMatrix freq_response(const SystemModel& sys, double omega) {
  if (const auto* ss = std::get_if<StateSpace>(&sys.node())) {
    const std::size_t nx = ss->state_dim(), n = ss->io_dim();
    ComplexMatrix r = to_complex(ss->D);
    if (nx == 0) return r;
    ComplexMatrix a(nx, nx);
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < nx; ++j)
        a(i, j) = Complex(0, i == j ? omega : 0) - ss->A(i, j);
    const ComplexMatrix x = solve(a, to_complex(ss->B));  // (jwI - A)^{-1} B
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        Complex s = 0;
        for (std::size_t k = 0; k < nx; ++k) s += ss->C(i, k) * x(k, j);
        r(i, j) += s;
      }
    return r;
  }
  if (std::holds_alternative<NonlinearStateSpace>(sys.node()))
    throw ModelError("freq_response: model is not linear");
  if (const auto* sc = std::get_if<SystemModel::Scaled>(&sys.node()))
    return freq_response(*sc->inner, omega) * Complex(sc->tau);
  const auto& pr = std::get<SystemModel::Parallel>(sys.node());
  return freq_response(*pr.left, omega) + freq_response(*pr.right, omega);
}

// Instantaneous (direct-feedthrough) gain. Exact whenever every leaf has a
// linear or vanishing feedthrough path; otherwise estimated by probing with
// short pulses on shrinking windows and extrapolating the energy ratio.
struct Gain {
  double value = 0;
  bool exact = true;
};

namespace detail {

inline std::optional<RealMatrix> feedthrough_matrix(const SystemModel& m,
                                                    double scale) {
  if (const auto* ss = std::get_if<StateSpace>(&m.node())) {
    RealMatrix d = ss->D * scale;
    return d;
  }
  if (const auto* nl = std::get_if<NonlinearStateSpace>(&m.node())) {
    if (nl->feedthrough_free) return RealMatrix(nl->n, nl->n);
    return std::nullopt;
  }
  if (const auto* sc = std::get_if<SystemModel::Scaled>(&m.node()))
    return feedthrough_matrix(*sc->inner, scale * sc->tau);
  const auto& pr = std::get<SystemModel::Parallel>(m.node());
  const auto l = feedthrough_matrix(*pr.left, scale);
  const auto r = feedthrough_matrix(*pr.right, scale);
  if (!l || !r) return std::nullopt;
  return *l + *r;
}

}  // namespace detail

inline Gain instantaneous_gain(const SystemModel& sys) {
  if (const auto d = detail::feedthrough_matrix(sys, 1.0))
    return {max_singular_value(*d), true};

  // Probe: small-amplitude half-sine bursts on shrinking windows, linear
  // extrapolation of the output/input energy ratio toward window zero.
  const std::size_t n = sys.io_dim();
  const double amp = 1e-2;
  double ratios[3] = {0, 0, 0};
  const double windows[3] = {0.1, 0.05, 0.025};
  for (int w = 0; w < 3; ++w) {
    const double width = windows[w];
    const double dt = width / 400.0;
    double worst = 0;
    for (std::size_t j = 0; j < n; ++j) {
      Signal u = zeros(dt, width, n);
      for (std::size_t m = 0; m < u.frames(); ++m)
        u.at(m, j) = amp * std::sin(std::numbers::pi * u.time(m) / width);
      const SimResult sim = simulate(sys, u);
      worst = std::max(worst, l2_norm(sim.output) / l2_norm(u));
    }
    ratios[w] = worst;
  }
  const double extrapolated = std::max(0.0, 2 * ratios[2] - ratios[1]);
  return {extrapolated, false};
}

// Peak L2 amplification over a set of test inputs.
inline double gain_estimate(const SystemModel& sys,
                            const std::vector<Signal>& battery) {
  if (battery.empty()) throw AnalysisError("gain_estimate: empty battery");
  double worst = 0;
  for (const Signal& u : battery) {
    const double nu = l2_norm(u);
    if (nu <= 0) throw AnalysisError("gain_estimate: zero-energy input");
    worst = std::max(worst, l2_norm(simulate(sys, u).output) / nu);
  }
  return worst;
}

// Built-in demonstration systems used throughout the test suite and CLI.
// "paper-P" is a two-state plant with a saturating damping term; C1..C5 are
// the companion controllers and G a first-order all-pass-like section.
//
// The catalogued expectation for C1 disagrees with its frequency response:
// builtin_discrepancy records that fact so reports can flag it.
inline std::optional<std::string> builtin_discrepancy(std::string_view name) {
  if (name == "C1")
    return std::string(
        "C1 is catalogued as strictly negative imaginary alongside this "
        "example family, but j(G(jw) - G(jw)*) = -2w/(1+w^2) < 0 for all "
        "w > 0, so the toolkit classifies it not-NI");
  return std::nullopt;
}

inline SystemModel builtin(std::string_view name) {
  if (name == "paper-P")
    return SystemModel::nonlinear(NonlinearStateSpace(
        2, 1, {"x2 - u1", "-3*x1 - x2/(1 + x2^2) + u1"}, {"x2"}));
  if (name == "C1") return SystemModel::from_tf(RationalTF({-1, -2}, {1, 1}));
  if (name == "C2") return SystemModel::from_tf(RationalTF({0.1}, {1, 1}));
  if (name == "C3") return SystemModel::from_tf(RationalTF({1}, {1, 1}));
  if (name == "C4")
    return SystemModel::parallel(
        builtin("paper-P"), SystemModel::from_tf(RationalTF({-4, -4}, {1, 2})));
  if (name == "C5")
    return SystemModel::parallel(builtin("paper-P"), builtin("G"));
  if (name == "G") return SystemModel::from_tf(RationalTF({-1, -1}, {1, 2}));
  throw ConfigError("unknown builtin system '" + std::string(name) + "'");
}

}  // namespace niqc
