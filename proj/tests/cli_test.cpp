// Drives the hvacctl binary through its subcommands and exit codes.

#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#ifndef HVACCTL_PATH
#error "HVACCTL_PATH must name the hvacctl executable"
#endif

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path d = [] {
    fs::path p = fs::temp_directory_path() / ("hvacctl_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

int hvacctl(const std::string& args) {
  const std::string cmd = std::string("\"") + HVACCTL_PATH + "\" " + args + " >>\"" +
                          (workdir() / "log.txt").string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

long lines(const fs::path& p) {
  const std::string s = slurp(p);
  return std::count(s.begin(), s.end(), '\n');
}

std::string out(const std::string& name) { return "--out \"" + (workdir() / name).string() + "\""; }

}  // namespace

TEST_CASE("help and argument errors") {
  CHECK(hvacctl("--help") == 0);
  CHECK(hvacctl("run --help") == 0);
  CHECK(hvacctl("") == 1);
  CHECK(hvacctl("bogus") == 1);
  CHECK(hvacctl("run " + out("x")) == 1);  // --controller is required
  CHECK(hvacctl("run --controller pid " + out("x")) == 1);
  CHECK(hvacctl("run --controller bl --archetype arctic " + out("x")) == 1);
  CHECK(hvacctl("run --controller bl --density huge " + out("x")) == 1);
  CHECK(hvacctl("run --controller bl --steps 0 " + out("x")) == 1);
  CHECK(hvacctl("run --controller bl --config /nonexistent.json " + out("x")) == 1);
}

TEST_CASE("configuration errors exit with an input error") {
  CHECK(hvacctl("run --controller bl --density tiny --set no_such_key=1 " + out("x")) == 1);
  CHECK(hvacctl("run --controller bl --density tiny --set dt=-5 " + out("x")) == 1);
  CHECK(hvacctl("run --controller bl --density tiny --set dt " + out("x")) == 1);
  const fs::path bad = workdir() / "bad.json";
  std::ofstream(bad) << "{ not json";
  CHECK(hvacctl("run --controller bl --density tiny --config \"" + bad.string() + "\" " + out("x")) == 1);
}

TEST_CASE("baseline run writes reproducible outputs") {
  REQUIRE(hvacctl("run --controller bl --density tiny --steps 36 " + out("bl1")) == 0);
  REQUIRE(hvacctl("run --controller bl --density tiny --steps 36 " + out("bl2")) == 0);
  for (const char* f : {"scenario.json", "trajectory.csv", "metrics.json", "timing.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(workdir() / "bl1" / f));
  }
  CHECK(lines(workdir() / "bl1" / "trajectory.csv") == 37);
  CHECK(slurp(workdir() / "bl1" / "trajectory.csv") == slurp(workdir() / "bl2" / "trajectory.csv"));
  CHECK(slurp(workdir() / "bl1" / "metrics.json") == slurp(workdir() / "bl2" / "metrics.json"));
  const auto m = nlohmann::json::parse(slurp(workdir() / "bl1" / "metrics.json"));
  CHECK(m.at("controller") == "bl");
  CHECK(m.at("steps") == 36);
  CHECK(m.at("E_total_kWh").get<double>() > 0.0);
  // The echoed scenario reproduces the run when fed back as a configuration.
  REQUIRE(hvacctl("run --controller bl --steps 36 --config \"" + (workdir() / "bl1" / "scenario.json").string() +
                  "\" " + out("bl3")) == 0);
  CHECK(slurp(workdir() / "bl1" / "trajectory.csv") == slurp(workdir() / "bl3" / "trajectory.csv"));
}

TEST_CASE("MPC run writes one diagnostics line per step") {
  REQUIRE(hvacctl("run --controller s-mpc --density tiny --steps 3 --archetype mild --set mpc.N=24 " +
                  out("smpc")) == 0);
  CHECK(lines(workdir() / "smpc" / "diagnostics.jsonl") == 3);
  CHECK(lines(workdir() / "smpc" / "trajectory.csv") == 4);
  const auto sc = nlohmann::json::parse(slurp(workdir() / "smpc" / "scenario.json"));
  CHECK(sc.at("archetype") == "mild");
  CHECK(sc.at("mpc").at("N") == 24);
}

TEST_CASE("fitted coil files can be reused by later runs") {
  // The strict fidelity check on the max-error ratio does not pass on this testbed.
  CHECK(hvacctl("fit-coil --density tiny " + out("coil")) == 2);
  const fs::path d = workdir() / "coil";
  REQUIRE(fs::exists(d / "coil_binned.json"));
  REQUIRE(fs::exists(d / "coil_compact.json"));
  const auto report = nlohmann::json::parse(slurp(d / "fit_report.json"));
  CHECK(report.at("checks").size() == 5);
  CHECK(hvacctl("run --controller bl --steps 6 --set coil.binned=\"" + (d / "coil_binned.json").string() +
                "\" --set coil.compact=\"" + (d / "coil_compact.json").string() + "\" " + out("reuse")) == 0);
  CHECK(hvacctl("run --controller bl --steps 6 --set coil.binned=/nonexistent.json " + out("x")) == 1);
}

TEST_CASE("a plant abort exits with the partial-result code") {
  const fs::path csv = workdir() / "extreme.csv";
  std::ofstream(csv) << "timestamp_iso8601,T_oa_C,RH_oa_pct,eta_sol_Wm2\n"
                        "2016-08-06T00:00:00,25,50,1e305\n2016-08-09T00:00:00,25,50,1e305\n";
  CHECK(hvacctl("run --controller bl --density tiny --set weather_csv=\"" + csv.string() + "\" " + out("abort")) ==
        3);
  const auto m = nlohmann::json::parse(slurp(workdir() / "abort" / "metrics.json"));
  CHECK(m.at("aborted") == true);
  CHECK_FALSE(m.at("error").get<std::string>().empty());
}

TEST_CASE("compare runs all three controllers") {
  REQUIRE(hvacctl("compare --density tiny --steps 3 --set mpc.N=24 " + out("cmp")) == 0);
  const fs::path d = workdir() / "cmp";
  for (const char* c : {"sl-mpc", "s-mpc", "bl"}) {
    CAPTURE(c);
    CHECK(fs::exists(d / c / "trajectory.csv"));
    CHECK(fs::exists(d / c / "metrics.json"));
  }
  CHECK(fs::exists(d / "comparison.txt"));
  const auto j = nlohmann::json::parse(slurp(d / "comparison.json"));
  CHECK(j.dump().find("sl-mpc") != std::string::npos);
  CHECK(j.dump().find("s-mpc") != std::string::npos);
}
