#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "niqc/errors.hpp"
#include "niqc/feedback.hpp"
#include "niqc/iqc.hpp"
#include "niqc/ni_analysis.hpp"
#include "niqc/sysmodel.hpp"
#include "niqc/verdict.hpp"

// Experiment configuration (JSON, schema version 1), report documents, and
// the CSV trace format. Serialization is round-trip exact: a config echoed
// into a report re-parses to an equal value.

namespace niqc {

using json = nlohmann::json;

struct SystemSpec {
  enum class Kind { builtin, rational, nonlinear };
  Kind kind = Kind::builtin;
  std::string builtin_name;
  std::vector<double> num, den;
  std::size_t nx = 0, n = 1;
  std::vector<std::string> f, h;

  bool operator==(const SystemSpec&) const = default;

  SystemModel build() const {
    switch (kind) {
      case Kind::builtin: return builtin(builtin_name);
      case Kind::rational: return SystemModel::from_tf(RationalTF(num, den));
      case Kind::nonlinear:
        return SystemModel::nonlinear(NonlinearStateSpace(nx, n, f, h));
    }
    throw ConfigError("system spec: unknown kind");
  }
};

struct XiSpec {
  std::vector<std::vector<double>> matrix;
  double epsilon = 0;

  bool operator==(const XiSpec&) const = default;

  XiConstraint build() const {
    const std::size_t d = matrix.size();
    ComplexMatrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) {
      if (matrix[i].size() != d)
        throw ConfigError("xi: matrix must be square");
      for (std::size_t j = 0; j < d; ++j) m(i, j) = matrix[i][j];
    }
    return XiConstraint(std::move(m), epsilon);
  }
};

struct BatterySpec {
  std::uint64_t seed = 1;
  std::size_t count = 50;
  bool operator==(const BatterySpec&) const = default;
};

struct NumericsSpec {
  double dt = 1e-3;
  double horizon = 40.0;
  std::size_t omega_count = 4096;
  double band_lo = 0.05, band_hi = 50.0;
  std::vector<std::pair<double, double>> probe_bands = {
      {0.05, 50.0}, {0.02, 50.0}, {0.05, 80.0}, {0.02, 80.0}};
  std::vector<double> tau_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  double pulse_width = 0.01;
  double loop_horizon = 50.0;
  double decaying_below = 0.1, growing_above = 0.5;

  bool operator==(const NumericsSpec&) const = default;
};

struct ExperimentConfig {
  int schema_version = 1;
  std::map<std::string, SystemSpec> systems;
  std::optional<XiSpec> xi, xi_inf;
  BatterySpec battery;
  NumericsSpec numerics;

  bool operator==(const ExperimentConfig&) const = default;

  SystemModel resolve(const std::string& name) const {
    const auto it = systems.find(name);
    if (it != systems.end()) return it->second.build();
    return builtin(name);  // throws ConfigError for unknown names
  }

  BatteryConfig battery_config() const {
    BatteryConfig b;
    b.seed = battery.seed;
    b.count = battery.count;
    b.dt = numerics.dt;
    b.horizon = numerics.horizon;
    b.pulse_width = numerics.pulse_width;
    return b;
  }

  BandConfig band_config() const {
    BandConfig b;
    b.omega_lo_star = numerics.band_lo;
    b.omega_hi_star = numerics.band_hi;
    b.probe_bands = numerics.probe_bands;
    return b;
  }

  ImpulseConfig impulse_config() const {
    ImpulseConfig i;
    i.dt = numerics.dt;
    i.horizon = numerics.loop_horizon;
    i.pulse_width = numerics.pulse_width;
    i.decaying_below = numerics.decaying_below;
    i.growing_above = numerics.growing_above;
    return i;
  }
};

namespace detail {

template <typename T>
T take(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline json to_json(const SystemSpec& s) {
  switch (s.kind) {
    case SystemSpec::Kind::builtin: return json{{"builtin", s.builtin_name}};
    case SystemSpec::Kind::rational:
      return json{{"num", s.num}, {"den", s.den}};
    case SystemSpec::Kind::nonlinear:
      return json{{"nx", s.nx}, {"n", s.n}, {"f", s.f}, {"h", s.h}};
  }
  throw ConfigError("system spec: unknown kind");
}

inline SystemSpec system_spec_from_json(const json& j) {
  SystemSpec s;
  if (j.contains("builtin")) {
    s.kind = SystemSpec::Kind::builtin;
    s.builtin_name = j.at("builtin").get<std::string>();
  } else if (j.contains("num") || j.contains("den")) {
    s.kind = SystemSpec::Kind::rational;
    s.num = detail::take<std::vector<double>>(j, "num", {});
    s.den = detail::take<std::vector<double>>(j, "den", {});
    if (s.den.empty()) throw ConfigError("system spec: missing denominator");
  } else if (j.contains("f") || j.contains("h")) {
    s.kind = SystemSpec::Kind::nonlinear;
    s.nx = detail::take<std::size_t>(j, "nx", 0);
    s.n = detail::take<std::size_t>(j, "n", 1);
    s.f = detail::take<std::vector<std::string>>(j, "f", {});
    s.h = detail::take<std::vector<std::string>>(j, "h", {});
  } else {
    throw ConfigError(
        "system spec: expected 'builtin', 'num'/'den', or 'f'/'h'");
  }
  return s;
}

inline json to_json(const XiSpec& x) {
  return json{{"matrix", x.matrix}, {"epsilon", x.epsilon}};
}

inline json to_json(const ExperimentConfig& c) {
  json systems = json::object();
  for (const auto& [name, spec] : c.systems) systems[name] = to_json(spec);
  json probe = json::array();
  for (const auto& [lo, hi] : c.numerics.probe_bands)
    probe.push_back(json::array({lo, hi}));
  json doc{
      {"schema_version", c.schema_version},
      {"systems", systems},
      {"battery", {{"seed", c.battery.seed}, {"count", c.battery.count}}},
      {"numerics",
       {{"dt", c.numerics.dt},
        {"horizon", c.numerics.horizon},
        {"omega_count", c.numerics.omega_count},
        {"band_lo", c.numerics.band_lo},
        {"band_hi", c.numerics.band_hi},
        {"probe_bands", probe},
        {"tau_grid", c.numerics.tau_grid},
        {"pulse_width", c.numerics.pulse_width},
        {"loop_horizon", c.numerics.loop_horizon},
        {"decaying_below", c.numerics.decaying_below},
        {"growing_above", c.numerics.growing_above}}}};
  if (c.xi) doc["xi"] = to_json(*c.xi);
  if (c.xi_inf) doc["xi_inf"] = to_json(*c.xi_inf);
  return doc;
}

inline ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: root must be a JSON object");
  ExperimentConfig c;
  c.schema_version = detail::take<int>(j, "schema_version", 1);
  if (c.schema_version != 1)
    throw ConfigError("config: unsupported schema_version " +
                      std::to_string(c.schema_version));
  if (j.contains("systems")) {
    if (!j.at("systems").is_object())
      throw ConfigError("config: 'systems' must be an object");
    for (const auto& [name, spec] : j.at("systems").items())
      c.systems[name] = system_spec_from_json(spec);
  }
  if (j.contains("xi")) {
    XiSpec x;
    x.matrix =
        detail::take<std::vector<std::vector<double>>>(j.at("xi"), "matrix", {});
    x.epsilon = detail::take<double>(j.at("xi"), "epsilon", 0.0);
    c.xi = x;
  }
  if (j.contains("xi_inf")) {
    XiSpec x;
    x.matrix = detail::take<std::vector<std::vector<double>>>(j.at("xi_inf"),
                                                              "matrix", {});
    x.epsilon = detail::take<double>(j.at("xi_inf"), "epsilon", 0.0);
    c.xi_inf = x;
  }
  if (j.contains("battery")) {
    c.battery.seed = detail::take<std::uint64_t>(j.at("battery"), "seed", 1);
    c.battery.count = detail::take<std::size_t>(j.at("battery"), "count", 50);
  }
  if (j.contains("numerics")) {
    const json& nj = j.at("numerics");
    NumericsSpec& n = c.numerics;
    n.dt = detail::take<double>(nj, "dt", n.dt);
    n.horizon = detail::take<double>(nj, "horizon", n.horizon);
    n.omega_count = detail::take<std::size_t>(nj, "omega_count", n.omega_count);
    n.band_lo = detail::take<double>(nj, "band_lo", n.band_lo);
    n.band_hi = detail::take<double>(nj, "band_hi", n.band_hi);
    if (nj.contains("probe_bands")) {
      n.probe_bands.clear();
      for (const auto& pb : nj.at("probe_bands")) {
        if (!pb.is_array() || pb.size() != 2)
          throw ConfigError("config: probe band must be a [lo, hi] pair");
        n.probe_bands.emplace_back(pb[0].get<double>(), pb[1].get<double>());
      }
    }
    n.tau_grid = detail::take<std::vector<double>>(nj, "tau_grid", n.tau_grid);
    n.pulse_width = detail::take<double>(nj, "pulse_width", n.pulse_width);
    n.loop_horizon = detail::take<double>(nj, "loop_horizon", n.loop_horizon);
    n.decaying_below =
        detail::take<double>(nj, "decaying_below", n.decaying_below);
    n.growing_above =
        detail::take<double>(nj, "growing_above", n.growing_above);
    if (!(n.dt > 0)) throw ConfigError("config: dt must be positive");
    if (!(n.horizon > n.dt)) throw ConfigError("config: horizon too short");
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

inline json to_json(const VerdictReport& r) {
  json j{{"check", r.check},
         {"verdict", to_string(r.verdict)},
         {"margin", r.margin},
         {"metrics", r.metrics}};
  if (!r.notes.empty()) j["notes"] = r.notes;
  if (r.witness_index >= 0) j["witness_index"] = r.witness_index;
  return j;
}

inline json to_json(const StabilityVerdict& sv) {
  json premises = json::object();
  for (const auto& [name, rep] : sv.premises) premises[name] = to_json(rep);
  json j{{"certified", sv.certified}, {"premises", premises}};
  if (!sv.diagnostics.empty()) j["diagnostics"] = sv.diagnostics;
  if (!sv.notes.empty()) j["notes"] = sv.notes;
  return j;
}

inline constexpr const char* kToolVersion = "niqc 1.0.0";

// Report envelope. The timestamp is the only nondeterministic field and
// serializes onto a single line of the pretty-printed document, so reports
// from identical runs differ in exactly one line.
struct ReportDocument {
  json config_echo;
  json results = json::object();
  std::string timestamp;

  json to_json() const {
    return json{{"tool", kToolVersion},
                {"timestamp", timestamp},
                {"config", config_echo},
                {"results", results}};
  }

  void write(std::ostream& os) const { os << to_json().dump(2) << "\n"; }
};

// Number formatting for CSV cells: shortest text that survives a
// text-to-double round trip at 12 significant digits.
inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// Loop trace as CSV, LF line endings, one row per sample. Columns carry the
// exogenous pulse, the plant input, and both outputs; vector channels are
// suffixed by component index. with_abs_y1 appends a |y1| magnitude column
// for log-amplitude plotting.
inline void write_loop_csv(std::ostream& os, const LoopTrace& t,
                           bool with_abs_y1 = false) {
  const std::size_t n = t.y1.dim;
  os << "t";
  auto head = [&](const char* base) {
    for (std::size_t i = 0; i < n; ++i) {
      os << ',' << base;
      if (n > 1) os << (i + 1);
    }
  };
  head("d1");
  head("u1");
  head("y1");
  head("y2");
  if (with_abs_y1) os << ",abs_y1";
  os << '\n';
  for (std::size_t m = 0; m < t.y1.frames(); ++m) {
    os << csv_number(t.y1.time(m));
    for (const Signal* s : {&t.d1, &t.u1, &t.y1, &t.y2})
      for (std::size_t i = 0; i < n; ++i) os << ',' << csv_number(s->at(m, i));
    if (with_abs_y1) {
      double q = 0;
      for (std::size_t i = 0; i < n; ++i) q += t.y1.at(m, i) * t.y1.at(m, i);
      os << ',' << csv_number(std::sqrt(q));
    }
    os << '\n';
  }
}

}  // namespace niqc
