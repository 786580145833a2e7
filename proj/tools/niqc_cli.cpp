// niqc: numeric verification of negative-imaginary and counterclockwise
// system properties, quadratic-constraint set memberships, and feedback
// stability certificates, with CSV/JSON reporting.
//
// Exit codes: 0 pass, 2 negative finding, 3 inconclusive, 64 config error,
// 70 runtime numeric failure.

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "niqc/config.hpp"
#include "niqc/errors.hpp"
#include "niqc/feedback.hpp"
#include "niqc/iqc.hpp"
#include "niqc/ni_analysis.hpp"
#include "niqc/sysmodel.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitNegative = 2;
constexpr int kExitInconclusive = 3;
constexpr int kExitConfig = 64;
constexpr int kExitNumeric = 70;

std::string now_iso() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Global {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  niqc::ExperimentConfig cfg;

  void load() {
    if (!config_path.empty()) cfg = niqc::load_config(config_path);
    if (seed) cfg.battery.seed = *seed;
    if (jobs < 1) throw niqc::ConfigError("--jobs must be at least 1");
  }

  std::filesystem::path out_path(const std::string& name) const {
    std::filesystem::create_directories(out_dir);
    return std::filesystem::path(out_dir) / name;
  }

  niqc::ReportDocument new_report() const {
    niqc::ReportDocument doc;
    doc.config_echo = niqc::to_json(cfg);
    doc.timestamp = now_iso();
    return doc;
  }

  void write_report(const niqc::ReportDocument& doc,
                    const std::string& name) const {
    std::ofstream os(out_path(name));
    if (!os) throw niqc::ConfigError("cannot write report: " + name);
    doc.write(os);
  }
};

int verdict_exit(niqc::Verdict v) {
  switch (v) {
    case niqc::Verdict::pass: return kExitPass;
    case niqc::Verdict::fail: return kExitNegative;
    default: return kExitInconclusive;
  }
}

int run_check_ni(Global& g, const std::string& system) {
  const niqc::SystemModel sys = g.cfg.resolve(system);
  const niqc::InputBattery battery(g.cfg.battery_config());
  const niqc::BandConfig bands = g.cfg.band_config();
  niqc::ReportDocument doc = g.new_report();
  niqc::NIClass cls;
  bool agree = true;
  if (sys.is_lti()) {
    const niqc::CrossCheck cc = niqc::crosscheck_lti(sys, battery, bands);
    doc.results["battery"] = niqc::to_json(cc.battery_verdict.report);
    doc.results["sweep"] = niqc::to_json(cc.sweep_verdict.report);
    doc.results["crosscheck"] = niqc::to_json(cc.report);
    cls = cc.sweep_verdict.classification;
    agree = cc.agree;
  } else {
    const niqc::NIVerdict nv = niqc::check_ni(sys, battery, bands);
    doc.results["battery"] = niqc::to_json(nv.report);
    cls = nv.classification;
  }
  if (const auto note = niqc::builtin_discrepancy(system))
    doc.results["discrepancy"] = *note;
  g.write_report(doc, "check-ni-" + system + ".json");
  std::cout << "check-ni " << system << ": " << niqc::to_string(cls)
            << (agree ? "" : " (test disagreement)") << "\n";
  if (!agree || cls == niqc::NIClass::inconclusive) return kExitInconclusive;
  return cls == niqc::NIClass::not_ni ? kExitNegative : kExitPass;
}

int run_check_ccw(Global& g, const std::string& system) {
  const niqc::SystemModel sys = g.cfg.resolve(system);
  const niqc::InputBattery battery(g.cfg.battery_config());
  const niqc::VerdictReport rep = niqc::check_ccw(sys, battery);
  niqc::ReportDocument doc = g.new_report();
  doc.results["ccw"] = niqc::to_json(rep);
  g.write_report(doc, "check-ccw-" + system + ".json");
  std::cout << "check-ccw " << system << ": " << niqc::to_string(rep.verdict)
            << "\n";
  return verdict_exit(rep.verdict);
}

int run_check_iqc(Global& g, const std::string& system,
                  const std::string& plant, const std::string& controller,
                  bool use_complement, bool scaled, bool multipliers,
                  double alpha, double eps_inf) {
  niqc::ReportDocument doc = g.new_report();
  const niqc::InputBattery battery(g.cfg.battery_config());
  if (multipliers) {
    if (plant.empty() || controller.empty())
      throw niqc::ConfigError(
          "check-iqc --multipliers needs --plant and --controller");
    if (!g.cfg.xi)
      throw niqc::ConfigError("check-iqc: config must provide 'xi'");
    const niqc::SystemModel p = g.cfg.resolve(plant);
    const niqc::SystemModel c = g.cfg.resolve(controller);
    const niqc::MultiplierSet m =
        niqc::construct_multipliers(g.cfg.xi->build(), alpha, eps_inf);
    const niqc::VerdictReport rep = niqc::verify_prop_iqc(
        p, c, m, g.cfg.band_config(), battery, g.cfg.numerics.tau_grid);
    doc.results["multiplier_inequalities"] = niqc::to_json(rep);
    g.write_report(doc, "check-iqc-" + plant + "-" + controller + ".json");
    std::cout << "check-iqc " << plant << "#" << controller << ": "
              << niqc::to_string(rep.verdict) << "\n";
    return verdict_exit(rep.verdict);
  }
  if (system.empty())
    throw niqc::ConfigError("check-iqc needs --system (or --multipliers)");
  if (!g.cfg.xi)
    throw niqc::ConfigError("check-iqc: config must provide 'xi'");
  const niqc::SystemModel sys = g.cfg.resolve(system);
  const niqc::XiConstraint xi = g.cfg.xi->build();
  niqc::VerdictReport rep;
  if (scaled)
    rep = niqc::bc_membership_scaled(sys, xi, battery).report;
  else if (use_complement)
    rep = niqc::bc_membership(sys, xi, battery);
  else
    rep = niqc::b_membership(sys, xi, battery);
  doc.results["membership"] = niqc::to_json(rep);
  g.write_report(doc, "check-iqc-" + system + ".json");
  std::cout << "check-iqc " << system << ": " << niqc::to_string(rep.verdict)
            << "\n";
  return verdict_exit(rep.verdict);
}

int stability_exit(const niqc::StabilityVerdict& sv) {
  if (sv.certified) return kExitPass;
  for (const auto& [name, rep] : sv.premises)
    if (rep.verdict == niqc::Verdict::inconclusive) return kExitInconclusive;
  return kExitNegative;
}

int run_check_stability(Global& g, const std::string& plant,
                        const std::string& controller,
                        const std::string& rule) {
  const niqc::SystemModel p = g.cfg.resolve(plant);
  const niqc::SystemModel c = g.cfg.resolve(controller);
  const niqc::InputBattery battery(g.cfg.battery_config());
  if (!g.cfg.xi)
    throw niqc::ConfigError("check-stability: config must provide 'xi'");
  const niqc::XiConstraint xi = g.cfg.xi->build();
  niqc::StabilityVerdict sv;
  if (rule == "theorem") {
    sv = niqc::check_theorem_sni2(p, c, xi, battery, g.cfg.band_config(),
                                  g.cfg.numerics.tau_grid);
  } else if (rule == "corollary-nl") {
    sv = niqc::check_corollary_nl(p, c, xi, battery);
  } else if (rule == "corollary-lti") {
    if (!g.cfg.xi_inf)
      throw niqc::ConfigError("corollary-lti: config must provide 'xi_inf'");
    sv = niqc::check_corollary_lti(p, c, xi, g.cfg.xi_inf->build(),
                                   g.cfg.numerics.tau_grid);
  } else {
    throw niqc::ConfigError("unknown rule: " + rule);
  }
  niqc::ReportDocument doc = g.new_report();
  doc.results["stability"] = niqc::to_json(sv);
  g.write_report(doc, "check-stability-" + plant + "-" + controller + ".json");
  std::cout << "check-stability " << plant << "#" << controller << " (" << rule
            << "): " << (sv.certified ? "certified" : "not-certified") << "\n";
  return stability_exit(sv);
}

int run_simulate(Global& g, const std::string& plant,
                 const std::string& controller) {
  const niqc::SystemModel p = g.cfg.resolve(plant);
  const niqc::SystemModel c = g.cfg.resolve(controller);
  const niqc::VerdictReport gate = niqc::wellposed_gate(p, c);
  if (gate.verdict != niqc::Verdict::pass)
    throw niqc::AnalysisError("loop is not well posed (gain product " +
                              niqc::csv_number(gate.metrics.at("product")) +
                              ")");
  const niqc::ImpulseReport rep =
      niqc::impulse_experiment(p, c, g.cfg.impulse_config());
  const std::string base = "simulate-" + plant + "-" + controller;
  {
    std::ofstream os(g.out_path(base + ".csv"), std::ios::binary);
    niqc::write_loop_csv(os, rep.trace);
  }
  const std::string label = rep.overflow_time
                                ? std::string("growing/overflow")
                                : niqc::to_string(rep.label);
  niqc::ReportDocument doc = g.new_report();
  doc.results["wellposed"] = niqc::to_json(gate);
  doc.results["diagnostics"] =
      niqc::json{{"label", label},
                 {"tail_ratio", rep.tail_ratio},
                 {"peak", rep.peak}};
  if (rep.overflow_time)
    doc.results["diagnostics"]["overflow_time"] = *rep.overflow_time;
  g.write_report(doc, base + ".json");
  std::cout << "simulate " << plant << "#" << controller << ": " << label
            << " (tail ratio " << rep.tail_ratio << ")\n";
  return rep.overflow_time ? kExitNumeric : kExitPass;
}

int run_reproduce(Global& g, const std::string& figure,
                  std::optional<double> horizon) {
  struct Pairing {
    const char* name;
    niqc::TailLabel expected;
  };
  std::vector<Pairing> pairs;
  if (figure == "fig2")
    pairs = {{"C1", niqc::TailLabel::decaying},
             {"C2", niqc::TailLabel::decaying},
             {"C3", niqc::TailLabel::growing}};
  else if (figure == "fig3")
    pairs = {{"C4", niqc::TailLabel::decaying},
             {"C5", niqc::TailLabel::growing}};
  else
    throw niqc::ConfigError("unknown figure: " + figure);

  niqc::ImpulseConfig icfg = g.cfg.impulse_config();
  if (horizon) icfg.horizon = *horizon;
  const niqc::SystemModel plant = g.cfg.resolve("paper-P");

  niqc::json summary = niqc::json::object();
  int matched = 0;
  bool any_indeterminate = false;
  for (const Pairing& pr : pairs) {
    const niqc::SystemModel side = g.cfg.resolve(pr.name);
    const niqc::ImpulseReport rep =
        niqc::impulse_experiment(side, plant, icfg);
    const bool overflow = rep.overflow_time.has_value();
    const std::string label =
        overflow ? "growing/overflow" : niqc::to_string(rep.label);
    const bool match =
        overflow ? pr.expected == niqc::TailLabel::growing
                 : rep.label == pr.expected;
    if (!overflow && rep.label == niqc::TailLabel::indeterminate)
      any_indeterminate = true;
    matched += match ? 1 : 0;
    {
      std::ofstream os(g.out_path(figure + "-" + pr.name + ".csv"),
                       std::ios::binary);
      niqc::write_loop_csv(os, rep.trace, /*with_abs_y1=*/figure == "fig3");
    }
    summary[pr.name] = {{"label", label},
                        {"expected", niqc::to_string(pr.expected)},
                        {"matched", match},
                        {"tail_ratio", rep.tail_ratio},
                        {"peak", rep.peak}};
    std::cout << "reproduce " << figure << " " << pr.name << ": " << label
              << " (expected " << niqc::to_string(pr.expected) << ")\n";
  }
  summary["matched"] = matched;
  summary["total"] = pairs.size();
  niqc::ReportDocument doc = g.new_report();
  doc.results[figure] = summary;
  g.write_report(doc, figure + "-summary.json");
  if (matched == static_cast<int>(pairs.size())) return kExitPass;
  return any_indeterminate ? kExitInconclusive : kExitNegative;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "niqc: negative-imaginary / counterclockwise property checks and "
      "feedback stability certificates"};
  app.require_subcommand(1);

  Global g;
  app.add_option("--config", g.config_path, "JSON experiment configuration");
  app.add_option("--seed", g.seed, "override the battery seed");
  app.add_option("--out", g.out_dir, "output directory for reports/CSV");
  app.add_option("--jobs", g.jobs,
                 "max parallel experiments (runs are sequential today)");

  std::string system, plant, controller, rule = "theorem", figure;
  bool use_complement = false, scaled = false, multipliers = false;
  double alpha = 1.0, eps_inf = 0.1;
  std::optional<double> horizon;

  CLI::App* ni = app.add_subcommand("check-ni", "NI/SNI classification");
  ni->add_option("--system", system, "system name")->required();

  CLI::App* ccw = app.add_subcommand("check-ccw", "counterclockwise test");
  ccw->add_option("--system", system, "system name")->required();

  CLI::App* iqc =
      app.add_subcommand("check-iqc", "set memberships and multipliers");
  iqc->add_option("--system", system, "system for membership checks");
  iqc->add_flag("--complement", use_complement, "use the complementary set");
  iqc->add_flag("--scaled", scaled,
                "verify every tau-scaling in the complementary set");
  iqc->add_flag("--multipliers", multipliers,
                "verify the four band inequalities for --plant/--controller");
  iqc->add_option("--plant", plant, "plant name (with --multipliers)");
  iqc->add_option("--controller", controller,
                  "controller name (with --multipliers)");
  iqc->add_option("--alpha", alpha, "gain bound for the high-band multiplier");
  iqc->add_option("--eps-inf", eps_inf, "high-band strictness margin");

  CLI::App* st = app.add_subcommand("check-stability", "certificate assembly");
  st->add_option("--plant", plant, "plant name")->required();
  st->add_option("--controller", controller, "controller name")->required();
  st->add_option("--rule", rule, "theorem | corollary-nl | corollary-lti");

  CLI::App* sim = app.add_subcommand("simulate", "impulse loop experiment");
  sim->add_option("--plant", plant, "plant name")->required();
  sim->add_option("--controller", controller, "controller name")->required();

  CLI::App* rep =
      app.add_subcommand("reproduce", "run a canned figure experiment");
  rep->add_option("figure", figure, "fig2 | fig3")->required();
  rep->add_option("--horizon", horizon, "override the loop horizon (s)");

  // global flags remain valid after the subcommand name
  for (CLI::App* sub : {ni, ccw, iqc, st, sim, rep}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    g.load();
    if (ni->parsed()) return run_check_ni(g, system);
    if (ccw->parsed()) return run_check_ccw(g, system);
    if (iqc->parsed())
      return run_check_iqc(g, system, plant, controller, use_complement,
                           scaled, multipliers, alpha, eps_inf);
    if (st->parsed()) return run_check_stability(g, plant, controller, rule);
    if (sim->parsed()) return run_simulate(g, plant, controller);
    if (rep->parsed()) return run_reproduce(g, figure, horizon);
    throw niqc::ConfigError("no subcommand");
  } catch (const niqc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const niqc::ModelError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const niqc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
