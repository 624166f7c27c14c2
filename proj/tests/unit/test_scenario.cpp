#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <sys/wait.h>

#include "uvolmax/cli.hpp"
#include "uvolmax/scenario.hpp"

using namespace uvolmax;
namespace fs = std::filesystem;

namespace {

const std::string kMinimal = R"({
  "horizon": 1.0,
  "band": {"a_lo": 0.04, "a_hi": 0.09},
  "drift": {"type": "constant", "b": 0.2},
  "utility": {"type": "exponential", "beta": 1.0}
})";

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  if (pos == std::string::npos) throw std::logic_error("pattern not found: " + from);
  return text.replace(pos, from.size(), to);
}

std::string config_error(const std::string& text) {
  try {
    parse_scenario(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "uvolmax_test_scenario" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_quiet(const fs::path& config, const std::string& command, const fs::path& out_dir, std::ostream& err) {
  std::ostringstream out;
  RunOptions opt;
  opt.out_dir = out_dir.string();
  opt.quiet = true;
  opt.out = &out;
  opt.err = &err;
  return run_scenario(config.string(), command, opt);
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "scenario.json";
  std::ofstream(p) << text;
  return p;
}

nlohmann::json report(const fs::path& dir, const std::string& stem = "scenario") {
  return nlohmann::json::parse(slurp(dir / (stem + ".report.json")));
}

}  // namespace

TEST(ParseScenario, Minimal) {
  const Scenario s = parse_scenario(kMinimal);
  EXPECT_DOUBLE_EQ(s.market.band.a_hi, 0.09);
  EXPECT_TRUE(s.market.constraint.is_full());
  EXPECT_TRUE(std::holds_alternative<ZeroLiability>(s.market.liability));
  EXPECT_EQ(s.solver.n_time, 2000u);
  EXPECT_EQ(s.search.intervals, 32u);
}

TEST(ParseScenario, InvertedBandNamesItsLine) {
  const auto msg = config_error(replace(kMinimal, "\"a_lo\": 0.04", "\"a_lo\": 0.5"));
  EXPECT_NE(msg.find("cfg.json:3:"), std::string::npos) << msg;
}

TEST(ParseScenario, MissingKeyNamesItsLine) {
  const auto msg = config_error(replace(kMinimal, "\"b\": 0.2", "\"slope\": 0.2"));
  EXPECT_NE(msg.find("missing required key \"b\""), std::string::npos) << msg;
  const auto top = config_error(replace(kMinimal, "\"horizon\": 1.0,", ""));
  EXPECT_NE(top.find("cfg.json:1:"), std::string::npos) << top;
}

TEST(ParseScenario, SyntaxErrorNamesItsLine) {
  const auto msg = config_error(replace(kMinimal, "\"drift\": {", "\"drift\" {"));
  EXPECT_NE(msg.find("cfg.json:4:"), std::string::npos) << msg;
}

TEST(ParseScenario, BadValuesNameTheirLines) {
  EXPECT_NE(config_error(replace(kMinimal, "\"beta\": 1.0", "\"beta\": -1.0")).find("cfg.json:5:"), std::string::npos);
  EXPECT_NE(config_error(replace(kMinimal, "\"exponential\"", "\"quadratic\"")).find("cfg.json:5:"),
            std::string::npos);
  EXPECT_NE(config_error(replace(kMinimal, "\"horizon\": 1.0", "\"horizon\": \"one\"")).find("cfg.json:2:"),
            std::string::npos);
}

TEST(ParseScenario, LiabilitiesAndConstraints) {
  auto text = replace(kMinimal, "\"horizon\": 1.0,",
                      R"("horizon": 1.0,
  "constraint": {"type": "union", "intervals": [["-inf", -1], [0, 2]]},
  "liability": {"type": "call_spread", "lower": -0.1, "upper": 0.2, "notional": 2},
  "claim": {"type": "quadratic", "coef": -1, "half_width": 4, "knots": 101},)");
  const Scenario s = parse_scenario(text);
  const auto pieces = s.market.constraint.pieces();
  ASSERT_EQ(pieces.size(), 2u);
  EXPECT_EQ(pieces[0].lo, -kInf);
  const auto& g = std::get<MarkovPayoff>(s.market.liability);
  EXPECT_DOUBLE_EQ(g(1.0), 0.6);
  EXPECT_DOUBLE_EQ(g(-1.0), 0.0);
  const auto& q = std::get<MarkovPayoff>(*s.claim);
  EXPECT_EQ(q.knots.size(), 101u);
  EXPECT_DOUBLE_EQ(q(2.0), -4.0);
}

TEST(ParseScenario, PowerUtilityNeedsPositiveWealthAndNoLiability) {
  const auto power = replace(kMinimal, "\"type\": \"exponential\", \"beta\": 1.0", "\"type\": \"power\", \"gamma\": 1.0");
  EXPECT_NO_THROW(parse_scenario(power));
  EXPECT_FALSE(config_error(replace(power, "\"horizon\": 1.0,", "\"horizon\": 1.0, \"initial_wealth\": -1,")).empty());
  EXPECT_FALSE(config_error(replace(power, "\"horizon\": 1.0,",
                                    "\"horizon\": 1.0, \"liability\": {\"type\": \"deterministic\", \"xi\": 1},"))
                   .empty());
}

TEST(ParseScenario, PathOutsideBandRejected) {
  const auto text = replace(kMinimal, "\"horizon\": 1.0,", "\"horizon\": 1.0,\n  \"path\": {\"values\": [0.04, 0.2]},");
  EXPECT_NE(config_error(text).find("cfg.json:3:"), std::string::npos);
}

TEST(RunScenario, ExitCodeThreeOnBadConfig) {
  const auto dir = scratch("bad");
  const auto cfg = write_config(dir, replace(kMinimal, "\"a_lo\": 0.04", "\"a_lo\": 0.5"));
  std::ostringstream err;
  EXPECT_EQ(run_quiet(cfg, "value", dir, err), 3);
  EXPECT_NE(err.str().find(":3:"), std::string::npos) << err.str();
  EXPECT_EQ(run_quiet(cfg.string() + ".missing", "value", dir, err), 3);
  const auto good = write_config(dir, kMinimal);
  EXPECT_EQ(run_quiet(good, "no-such-command", dir, err), 3);
}

TEST(RunScenario, ExitCodeThreeOnUnsupportedCommand) {
  const auto dir = scratch("unsupported");
  const auto cfg = write_config(dir, kMinimal);
  std::ostringstream err;
  // per-measure needs a "path"
  EXPECT_EQ(run_quiet(cfg, "per-measure", dir, err), 3);
}

TEST(RunScenario, ExitCodeTwoOnSolverFailure) {
  // An explicit theta step far beyond its stability limit overflows.
  const auto dir = scratch("failure");
  const auto cfg = write_config(dir, replace(kMinimal, "\"horizon\": 1.0,", R"("horizon": 1.0,
  "liability": {"type": "quadratic", "coef": -1, "half_width": 4, "knots": 201},
  "path": {"constant": 0.09},
  "solver": {"n_time": 200, "n_space": 2000, "scheme": "theta", "theta": 0.0},)"));
  std::ostringstream err;
  EXPECT_EQ(run_quiet(cfg, "per-measure", dir, err), 2);
  const auto j = report(dir);
  EXPECT_EQ(j["status"], "solver_failure");
  EXPECT_TRUE(j.contains("error"));
}

TEST(RunScenario, ValueReportAndCsv) {
  const auto dir = scratch("value");
  std::ostringstream err;
  ASSERT_EQ(run_quiet(fs::path(UVOLMAX_SCENARIO_DIR) / "ex1_exponential.json", "worst-vol", dir, err), 0) << err.str();
  const auto j = report(dir, "ex1_exponential");
  EXPECT_EQ(j["status"], "ok");
  EXPECT_NEAR(j["Y0"].get<double>(), -0.04 / 0.18, 1e-15);
  EXPECT_TRUE(j.contains("formula"));
  const auto csv = slurp(dir / "ex1_exponential.worst_vol.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,a_star");
}

TEST(RunScenario, ByteIdenticalReruns) {
  const auto d1 = scratch("rerun1"), d2 = scratch("rerun2");
  std::ostringstream err;
  const auto cfg = fs::path(UVOLMAX_SCENARIO_DIR) / "ex3_power_merton.json";
  ASSERT_EQ(run_quiet(cfg, "strategy", d1, err), 0);
  ASSERT_EQ(run_quiet(cfg, "strategy", d2, err), 0);
  EXPECT_EQ(slurp(d1 / "ex3_power_merton.report.json"), slurp(d2 / "ex3_power_merton.report.json"));
  EXPECT_EQ(slurp(d1 / "ex3_power_merton.strategy.csv"), slurp(d2 / "ex3_power_merton.strategy.csv"));
}

TEST(RunScenario, GridScaleMustBePositive) {
  const auto dir = scratch("scale");
  const auto cfg = write_config(dir, kMinimal);
  std::ostringstream out, err;
  RunOptions opt;
  opt.out_dir = dir.string();
  opt.grid_scale = 0.0;
  opt.out = &out;
  opt.err = &err;
  EXPECT_EQ(run_scenario(cfg.string(), "value", opt), 3);
}

// Every expectation of every bundled scenario, except the path searches, which
// take tens of seconds each and run in the acceptance suite.
TEST(BundledScenarios, ExpectationsHold) {
  const auto dir = scratch("bundled");
  int checked = 0;
  for (const auto& entry : fs::directory_iterator(UVOLMAX_SCENARIO_DIR)) {
    if (entry.path().extension() != ".json") continue;
    const Scenario s = load_scenario(entry.path().string());
    EXPECT_FALSE(s.example.empty()) << entry.path();
    EXPECT_FALSE(s.expect.empty()) << entry.path();
    std::set<std::string> cmds;
    for (const auto& e : s.expect) cmds.insert(e.command);
    for (const auto& cmd : cmds) {
      const bool markov = is_markov(s.market.liability) || (s.claim && is_markov(*s.claim));
      if (markov && (cmd == "value" || cmd == "indiff")) continue;
      std::ostringstream err;
      ASSERT_EQ(run_quiet(entry.path(), cmd, dir, err), 0) << entry.path() << " " << cmd << ": " << err.str();
      const auto j = report(dir, entry.path().stem().string());
      ASSERT_TRUE(j.contains("checks"));
      for (const auto& c : j["checks"]) {
        EXPECT_TRUE(c["pass"].get<bool>()) << entry.path() << " " << cmd << " " << c.dump();
        ++checked;
      }
    }
  }
  EXPECT_GE(checked, 10);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  const auto bad = write_config(dir, replace(kMinimal, "\"a_lo\": 0.04", "\"a_lo\": 0.5"));
  const std::string cli = UVOLMAX_CLI;
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  EXPECT_EQ(run("--quiet --out-dir " + dir.string() + " value " + bad.string()), 3);
  EXPECT_EQ(run("value"), 3);
  EXPECT_EQ(run("--grid-scale -1 value " + bad.string()), 3);
  const auto ex1 = fs::path(UVOLMAX_SCENARIO_DIR) / "ex1_exponential.json";
  EXPECT_EQ(run("--quiet --out-dir " + dir.string() + " minmax-check " + ex1.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "ex1_exponential.report.json"));
}
