#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "niqc/config.hpp"

// End-to-end tests that shell out to the installed binary (path injected by
// the build). Each test works inside its own scratch directory.

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(NIQC_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  if (WIFEXITED(st)) r.code = WEXITSTATUS(st);
  return r;
}

std::string scratch_dir(const std::string& name) {
  const std::string d = "cli_scratch/" + name;
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

niqc::json read_json(const std::string& path) {
  return niqc::json::parse(read_file(path));
}

// battery of 4 smooth members, spectator TF "five", sign-split xi at 0.5
std::string fast_config(const std::string& dir) {
  const std::string p = dir + "/cfg.json";
  write_file(p, R"({
    "schema_version": 1,
    "battery": {"seed": 1, "count": 4},
    "systems": {"five": {"num": [5.0], "den": [1.0, 1.0]}},
    "xi": {"matrix": [[1, 0], [0, -1]], "epsilon": 0.5}
  })");
  return p;
}

std::string first_line(const std::string& text) {
  return text.substr(0, text.find('\n'));
}

}  // namespace

TEST(CliParse, help_and_errors) {
  EXPECT_EQ(run_cli("--help").code, 0);
  EXPECT_EQ(run_cli("check-ni --system C2 --help").code, 0);
  EXPECT_EQ(run_cli("frobnicate").code, 64);
  EXPECT_EQ(run_cli("check-ni").code, 64);  // missing --system
  EXPECT_EQ(run_cli("check-ni --system C2 --definitely-not-a-flag").code, 64);
  EXPECT_EQ(run_cli("").code, 64);  // a subcommand is required
}

TEST(CliParse, config_failures) {
  const std::string dir = scratch_dir("badcfg");
  EXPECT_EQ(run_cli("check-ccw --system C2 --config " + dir + "/missing.json")
                .code,
            64);

  write_file(dir + "/broken.json", "{ not json");
  EXPECT_EQ(
      run_cli("check-ccw --system C2 --config " + dir + "/broken.json").code,
      64);

  write_file(dir + "/future.json", R"({"schema_version": 99})");
  EXPECT_EQ(
      run_cli("check-ccw --system C2 --config " + dir + "/future.json").code,
      64);

  // unknown system name resolves to a config error, not a crash
  const std::string cfg = fast_config(dir);
  EXPECT_EQ(run_cli("check-ccw --system NOPE --config " + cfg).code, 64);
  EXPECT_EQ(run_cli("reproduce fig9 --config " + cfg + " --out " + dir).code,
            64);
}

TEST(CliCheckNi, classification_exit_codes_and_report) {
  const std::string dir = scratch_dir("checkni");
  const std::string cfg = fast_config(dir);

  const RunResult sni =
      run_cli("check-ni --system C2 --config " + cfg + " --out " + dir);
  EXPECT_EQ(sni.code, 0);
  EXPECT_NE(sni.out.find("check-ni C2: SNI"), std::string::npos) << sni.out;

  const RunResult neg =
      run_cli("check-ni --system C1 --config " + cfg + " --out " + dir);
  EXPECT_EQ(neg.code, 2);
  EXPECT_NE(neg.out.find("not-NI"), std::string::npos);

  const niqc::json rep = read_json(dir + "/check-ni-C1.json");
  EXPECT_TRUE(rep.contains("tool"));
  EXPECT_TRUE(rep.contains("timestamp"));
  EXPECT_TRUE(rep.contains("config"));
  ASSERT_TRUE(rep.contains("results"));
  EXPECT_TRUE(rep["results"].contains("battery"));
  EXPECT_TRUE(rep["results"].contains("sweep"));
  EXPECT_TRUE(rep["results"].contains("crosscheck"));
  // the catalog note about the known classification dispute rides along
  EXPECT_TRUE(rep["results"].contains("discrepancy"));

  const niqc::json ok = read_json(dir + "/check-ni-C2.json");
  EXPECT_FALSE(ok["results"].contains("discrepancy"));
}

TEST(CliCheckCcw, seed_override_is_echoed) {
  const std::string dir = scratch_dir("ccw");
  const std::string cfg = fast_config(dir);
  const RunResult r = run_cli("check-ccw --system C2 --seed 7 --config " + cfg +
                              " --out " + dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("check-ccw C2: pass"), std::string::npos);
  const niqc::json rep = read_json(dir + "/check-ccw-C2.json");
  EXPECT_EQ(rep["config"]["battery"]["seed"].get<std::uint64_t>(), 7u);
}

TEST(CliCheckCcw, reports_are_deterministic_modulo_timestamp) {
  const std::string dir = scratch_dir("det");
  const std::string cfg = fast_config(dir);
  ASSERT_EQ(run_cli("check-ccw --system C2 --config " + cfg + " --out " + dir +
                    "/a")
                .code,
            0);
  ASSERT_EQ(run_cli("check-ccw --system C2 --config " + cfg + " --out " + dir +
                    "/b")
                .code,
            0);
  std::istringstream a(read_file(dir + "/a/check-ccw-C2.json"));
  std::istringstream b(read_file(dir + "/b/check-ccw-C2.json"));
  std::string la, lb;
  int diffs = 0;
  while (std::getline(a, la) && std::getline(b, lb)) {
    if (la != lb) {
      ++diffs;
      EXPECT_NE(la.find("timestamp"), std::string::npos) << la;
    }
  }
  EXPECT_LE(diffs, 1);
}

TEST(CliCheckIqc, membership_modes) {
  const std::string dir = scratch_dir("iqc");
  const std::string cfg = fast_config(dir);

  EXPECT_EQ(
      run_cli("check-iqc --system C2 --config " + cfg + " --out " + dir).code,
      0);

  // cross form, every tau-scaling: the positive-DC parallel sum fails
  write_file(dir + "/cross.json", R"({
    "schema_version": 1,
    "battery": {"seed": 1, "count": 4},
    "xi": {"matrix": [[0, 1], [1, 0]], "epsilon": 0.0}
  })");
  const RunResult scaled = run_cli("check-iqc --system C4 --scaled --config " +
                                   dir + "/cross.json --out " + dir);
  EXPECT_EQ(scaled.code, 2);
  const niqc::json rep = read_json(dir + "/check-iqc-C4.json");
  EXPECT_EQ(rep["results"]["membership"]["check"], "bc-membership-scaled");

  // option misuse and a config without the constraint
  EXPECT_EQ(run_cli("check-iqc --config " + cfg + " --out " + dir).code, 64);
  EXPECT_EQ(run_cli("check-iqc --multipliers --config " + cfg + " --out " + dir)
                .code,
            64);
  write_file(dir + "/noxi.json", R"({"schema_version": 1})");
  EXPECT_EQ(run_cli("check-iqc --system C2 --config " + dir +
                    "/noxi.json --out " + dir)
                .code,
            64);
}

TEST(CliCheckIqc, multiplier_inequalities) {
  const std::string dir = scratch_dir("iqcmult");
  write_file(dir + "/band.json", R"({
    "schema_version": 1,
    "battery": {"seed": 1, "count": 2},
    "numerics": {"horizon": 20.0},
    "xi": {"matrix": [[1, 0], [0, -1]], "epsilon": 0.5}
  })");
  const RunResult r =
      run_cli("check-iqc --multipliers --plant C2 --controller paper-P "
              "--config " +
              dir + "/band.json --out " + dir);
  EXPECT_EQ(r.code, 0) << r.out;
  const niqc::json rep = read_json(dir + "/check-iqc-C2-paper-P.json");
  const niqc::json& m = rep["results"]["multiplier_inequalities"]["metrics"];
  EXPECT_GE(m["p_low_slack"].get<double>(), 0.0);
  EXPECT_GE(m["c_low_slack"].get<double>(), 0.0);
  EXPECT_GE(m["p_high_slack"].get<double>(), 0.0);
  EXPECT_GE(m["c_high_slack"].get<double>(), 0.0);
}

TEST(CliStability, rules_and_exit_codes) {
  const std::string dir = scratch_dir("stab");
  const std::string cfg = fast_config(dir);

  const RunResult cert =
      run_cli("check-stability --plant C2 --controller paper-P --rule theorem "
              "--config " +
              cfg + " --out " + dir);
  EXPECT_EQ(cert.code, 0) << cert.out;
  EXPECT_NE(cert.out.find("certified"), std::string::npos);

  const RunResult flat =
      run_cli("check-stability --plant C3 --controller paper-P "
              "--rule corollary-nl --config " +
              cfg + " --out " + dir);
  EXPECT_EQ(flat.code, 2);
  EXPECT_NE(flat.out.find("not-certified"), std::string::npos);

  write_file(dir + "/lti.json", R"({
    "schema_version": 1,
    "systems": {
      "P1": {"num": [1.0], "den": [1.0, 1.0]},
      "CC": {"num": [1.0], "den": [1.0, 2.0]}
    },
    "xi": {"matrix": [[1, -1], [-1, 0]], "epsilon": 0.0},
    "xi_inf": {"matrix": [[1, 0], [0, -1]], "epsilon": 0.0}
  })");
  EXPECT_EQ(run_cli("check-stability --plant P1 --controller CC "
                    "--rule corollary-lti --config " +
                    dir + "/lti.json --out " + dir)
                .code,
            0);

  EXPECT_EQ(run_cli("check-stability --plant C2 --controller paper-P "
                    "--rule nonsense --config " +
                    cfg + " --out " + dir)
                .code,
            64);
  // corollary-lti without the high-frequency constraint in the config
  EXPECT_EQ(run_cli("check-stability --plant P1 --controller CC "
                    "--rule corollary-lti --config " +
                    cfg + " --out " + dir)
                .code,
            64);
}

TEST(CliSimulate, loop_trace_and_overflow) {
  const std::string dir = scratch_dir("sim");
  const std::string cfg = fast_config(dir);

  const RunResult ok = run_cli("simulate --plant paper-P --controller C2 "
                               "--config " +
                               cfg + " --out " + dir);
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_EQ(first_line(read_file(dir + "/simulate-paper-P-C2.csv")),
            "t,d1,u1,y1,y2");
  const niqc::json rep = read_json(dir + "/simulate-paper-P-C2.json");
  EXPECT_EQ(rep["results"]["diagnostics"]["label"], "decaying");

  // the gain-5 pairing blows through the state cap: numeric exit, CSV kept
  const RunResult burst = run_cli("simulate --plant C3 --controller five "
                                  "--config " +
                                  cfg + " --out " + dir);
  EXPECT_EQ(burst.code, 70);
  EXPECT_NE(burst.out.find("growing/overflow"), std::string::npos);
  const niqc::json brep = read_json(dir + "/simulate-C3-five.json");
  EXPECT_TRUE(brep["results"]["diagnostics"].contains("overflow_time"));
  EXPECT_TRUE(std::filesystem::exists(dir + "/simulate-C3-five.csv"));

  // ill-posed loop is refused before any integration
  EXPECT_EQ(run_cli("simulate --plant C4 --controller C1 --config " + cfg +
                    " --out " + dir)
                .code,
            70);
}

TEST(CliReproduce, canned_experiments) {
  const std::string dir = scratch_dir("repro");
  const std::string cfg = fast_config(dir);

  // a 2 s horizon is too short to resolve every label: inconclusive exit
  const RunResult shortrun =
      run_cli("reproduce fig2 --horizon 2 --config " + cfg + " --out " + dir);
  EXPECT_EQ(shortrun.code, 3) << shortrun.out;
  for (const char* f : {"fig2-C1.csv", "fig2-C2.csv", "fig2-C3.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir + "/" + f)) << f;
  const niqc::json sum2 = read_json(dir + "/fig2-summary.json");
  EXPECT_LT(sum2["results"]["fig2"]["matched"].get<int>(), 3);

  // full horizon: both parallel-sum pairings match their expected labels
  const RunResult full =
      run_cli("reproduce fig3 --config " + cfg + " --out " + dir);
  EXPECT_EQ(full.code, 0) << full.out;
  EXPECT_EQ(first_line(read_file(dir + "/fig3-C4.csv")),
            "t,d1,u1,y1,y2,abs_y1");
  EXPECT_EQ(first_line(read_file(dir + "/fig3-C5.csv")),
            "t,d1,u1,y1,y2,abs_y1");
  const niqc::json sum3 = read_json(dir + "/fig3-summary.json");
  EXPECT_EQ(sum3["results"]["fig3"]["matched"].get<int>(), 2);
  EXPECT_EQ(sum3["results"]["fig3"]["C5"]["label"], "growing");
}

TEST(CliConfig, json_round_trip_is_stable) {
  niqc::ExperimentConfig cfg;
  cfg.battery.seed = 11;
  cfg.battery.count = 3;
  cfg.numerics.dt = 2e-3;
  cfg.numerics.tau_grid = {0.0, 0.5, 1.0};
  niqc::SystemSpec tf;
  tf.kind = niqc::SystemSpec::Kind::rational;
  tf.num = {1.0};
  tf.den = {1.0, 3.0};
  cfg.systems["lag3"] = tf;
  niqc::SystemSpec nl;
  nl.kind = niqc::SystemSpec::Kind::nonlinear;
  nl.nx = 1;
  nl.n = 1;
  nl.f = {"-x1 + u1"};
  nl.h = {"x1"};
  cfg.systems["relax"] = nl;
  niqc::SystemSpec alias;
  alias.kind = niqc::SystemSpec::Kind::builtin;
  alias.builtin_name = "C2";
  cfg.systems["small"] = alias;
  niqc::XiSpec xi;
  xi.matrix = {{0.0, 1.0}, {1.0, 0.0}};
  xi.epsilon = 0.25;
  cfg.xi = xi;

  const niqc::json once = niqc::to_json(cfg);
  const niqc::ExperimentConfig back = niqc::config_from_json(once);
  const niqc::json twice = niqc::to_json(back);
  EXPECT_EQ(once.dump(2), twice.dump(2));

  // the round-tripped systems still resolve and simulate
  EXPECT_TRUE(back.resolve("lag3").is_lti());
  EXPECT_FALSE(back.resolve("relax").is_lti());
  EXPECT_EQ(back.resolve("small").state_dim(), 1u);
}

TEST(CliConfig, loop_csv_abs_column) {
  niqc::LoopTrace tr;
  tr.d1 = niqc::zeros(0.5, 1.0, 1);
  tr.d2 = niqc::zeros(0.5, 1.0, 1);
  tr.u1 = niqc::zeros(0.5, 1.0, 1);
  tr.y1 = niqc::zeros(0.5, 1.0, 1);
  tr.u2 = niqc::zeros(0.5, 1.0, 1);
  tr.y2 = niqc::zeros(0.5, 1.0, 1);
  tr.y1.at(1, 0) = -3.0;
  std::ostringstream plain, extended;
  niqc::write_loop_csv(plain, tr);
  niqc::write_loop_csv(extended, tr, true);
  EXPECT_EQ(first_line(plain.str()), "t,d1,u1,y1,y2");
  EXPECT_EQ(first_line(extended.str()), "t,d1,u1,y1,y2,abs_y1");
  // second data row carries |y1| = 3
  std::istringstream rows(extended.str());
  std::string line;
  std::getline(rows, line);
  std::getline(rows, line);
  std::getline(rows, line);
  EXPECT_NE(line.find(",3"), std::string::npos) << line;
}
