// hvacctl: fit coil surrogates, run one controller, or compare all three.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hvac/coil.hpp"
#include "hvac/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit : int { kOk = 0, kInput = 1, kValidation = 2, kPartial = 3 };

struct Common {
  std::string config;
  std::string out = "out";
  std::vector<std::string> sets;
  std::string archetype;
  std::string density;
  long steps = -1;
  bool verbose = false;
};

void add_common(CLI::App* sub, Common& c, bool scenario_flags) {
  sub->add_option("--config", c.config, "Scenario configuration (JSON)")->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--set", c.sets, "Override a configuration key, key=value (repeatable)");
  sub->add_option("--density", c.density, "Coil training density")
      ->check(CLI::IsMember({"tiny", "default", "paper"}));
  sub->add_flag("-v,--verbose", c.verbose, "Progress messages on stderr");
  if (scenario_flags) {
    sub->add_option("--archetype", c.archetype, "Synthetic weather archetype")
        ->check(CLI::IsMember({"hot-humid", "mild", "cold"}));
    sub->add_option("--steps", c.steps, "Number of closed-loop steps (default: full duration)")
        ->check(CLI::PositiveNumber);
  }
}

hvac::Scenario resolve_scenario(const Common& c) {
  std::vector<std::string> sets;
  if (!c.archetype.empty()) {
    sets.push_back("archetype=" + c.archetype);
    sets.push_back("name=" + c.archetype);
  }
  if (!c.density.empty()) sets.push_back("coil.density=" + c.density);
  sets.insert(sets.end(), c.sets.begin(), c.sets.end());
  return hvac::load_scenario(c.config, sets);
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw hvac::InputError("cannot create output directory '" + dir + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw hvac::InputError("cannot write '" + path.string() + "'");
  f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void log(const Common& c, const std::string& msg) {
  if (c.verbose) std::cerr << "[hvacctl] " << msg << std::endl;
}

json report_json(const hvac::FitReport& r) {
  return {{"rmse_T_ca", r.rmse_T}, {"max_T_ca", r.max_T}, {"rmse_W_ca", r.rmse_W},
          {"max_W_ca", r.max_W},   {"samples", r.n_samples}};
}

// Pass/fail gates applied to the held-out fit errors.
constexpr double kRangeFraction = 0.01;
constexpr double kCompactMaxRatio = 2.5;

int cmd_fit_coil(const Common& c) {
  make_dir(c.out);
  const std::string density_name = c.density.empty() ? "default" : c.density;
  const hvac::Density density = hvac::parse_density(density_name);
  const hvac::SweepRanges ranges = hvac::sweep_for_density(density);

  log(c, "generating training grid (" + density_name + ")");
  const hvac::CoilDataset train = hvac::generate_training_grid(ranges);
  const hvac::CoilDataset held_out = hvac::generate_validation_grid(ranges);
  log(c, "fitting on " + std::to_string(train.size()) + " samples");
  hvac::BinnedFitSummary summary;
  const hvac::BinnedCoilModel binned = hvac::fit_binned_model(train, ranges, &summary);
  const hvac::CompactCoilModel compact = hvac::fit_compact_model(train);

  const hvac::FitReport rb = hvac::validate_model(binned, held_out);
  const hvac::FitReport rc = hvac::validate_model(compact, held_out);

  double T_lo = 1e300, T_hi = -1e300, W_lo = 1e300, W_hi = -1e300;
  for (const hvac::CoilSample& s : held_out) {
    T_lo = std::min(T_lo, s.out.T_ca);
    T_hi = std::max(T_hi, s.out.T_ca);
    W_lo = std::min(W_lo, s.out.W_ca);
    W_hi = std::max(W_hi, s.out.W_ca);
  }
  const double T_range = T_hi - T_lo;
  const double W_range = W_hi - W_lo;

  json checks = json::array();
  bool ok = true;
  auto check = [&](const std::string& name, double value, double limit, bool pass) {
    checks.push_back({{"name", name}, {"value", value}, {"limit", limit}, {"pass", pass}});
    ok = ok && pass;
  };
  check("binned rmse_T_ca <= 1% of T_ca range", rb.rmse_T, kRangeFraction * T_range,
        rb.rmse_T <= kRangeFraction * T_range);
  check("binned rmse_W_ca <= 1% of W_ca range", rb.rmse_W, kRangeFraction * W_range,
        rb.rmse_W <= kRangeFraction * W_range);
  check("binned rmse_T_ca < compact rmse_T_ca", rb.rmse_T, rc.rmse_T, rb.rmse_T < rc.rmse_T);
  check("binned rmse_W_ca < compact rmse_W_ca", rb.rmse_W, rc.rmse_W, rb.rmse_W < rc.rmse_W);
  check("compact max_T_ca <= 2.5 x binned max_T_ca", rc.max_T, kCompactMaxRatio * rb.max_T,
        rc.max_T <= kCompactMaxRatio * rb.max_T);

  const fs::path out(c.out);
  hvac::save_model((out / "coil_binned.json").string(), binned);
  hvac::save_model((out / "coil_compact.json").string(), compact);

  json report = {{"density", density_name},
                 {"training_samples", train.size()},
                 {"validation_samples", held_out.size()},
                 {"bins", binned.bin_count()},
                 {"empty_bins", summary.n_empty},
                 {"reduced_degree_bins", summary.reduced_bins},
                 {"binned", report_json(rb)},
                 {"compact", report_json(rc)},
                 {"T_ca_range", T_range},
                 {"W_ca_range", W_range},
                 {"checks", checks},
                 {"pass", ok}};
  write_text(out / "fit_report.json", dump(report));

  std::printf("binned  rmse T_ca %.4f degC  max %.4f  rmse W_ca %.3e  max %.3e\n", rb.rmse_T, rb.max_T, rb.rmse_W,
              rb.max_W);
  std::printf("compact rmse T_ca %.4f degC  max %.4f  rmse W_ca %.3e  max %.3e\n", rc.rmse_T, rc.max_T, rc.rmse_W,
              rc.max_W);
  for (const json& ch : checks) {
    std::printf("  [%s] %s\n", ch["pass"].get<bool>() ? "pass" : "FAIL", ch["name"].get<std::string>().c_str());
  }
  return ok ? kOk : kValidation;
}

struct RunOutcome {
  hvac::ControllerKind kind{};
  std::optional<hvac::Metrics> metrics;
  bool aborted = false;
  std::string error;
};

// Runs one controller and writes its four artifacts into `dir`.
RunOutcome run_one(const hvac::Scenario& s, hvac::ControllerKind kind, const hvac::CoilModels& coil, long steps,
                   const fs::path& dir) {
  RunOutcome o;
  o.kind = kind;
  std::ostringstream diag;
  const bool mpc = kind != hvac::ControllerKind::Bl;
  const hvac::Trajectory tr = hvac::run_closed_loop(s, kind, coil, static_cast<int>(steps), mpc ? &diag : nullptr);
  const hvac::Metrics m = hvac::compute_metrics(tr, s.envelope);

  std::ostringstream csv;
  hvac::write_trajectory_csv(csv, tr);
  write_text(dir / "trajectory.csv", csv.str());
  write_text(dir / "metrics.json", dump(hvac::metrics_to_json(m, tr)));
  write_text(dir / "timing.json", dump(hvac::timing_to_json(m, tr)));
  if (mpc) write_text(dir / "diagnostics.jsonl", diag.str());

  o.metrics = m;
  o.aborted = tr.aborted;
  o.error = tr.error;
  return o;
}

int cmd_run(const Common& c, const std::string& controller) {
  const hvac::ControllerKind kind = hvac::parse_controller(controller);
  const hvac::Scenario s = resolve_scenario(c);
  make_dir(c.out);
  write_text(fs::path(c.out) / "scenario.json", dump(hvac::scenario_to_json(s)));
  log(c, "preparing coil models");
  const hvac::CoilModels coil = hvac::scenario_coil_models(s);
  log(c, "running " + controller + " on " + s.name);
  const RunOutcome o = run_one(s, kind, coil, c.steps, c.out);
  const hvac::Metrics& m = *o.metrics;
  std::printf("%s  E_total %.3f kWh  V_T %.4f degC h  V_W %.3e kg/kg h\n", controller.c_str(), m.E_total_kWh, m.V_T,
              m.V_W);
  if (o.aborted) {
    std::fprintf(stderr, "run aborted: %s\n", o.error.c_str());
    return kPartial;
  }
  return kOk;
}

std::string fixed(double v, int prec) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

int cmd_compare(const Common& c) {
  const hvac::Scenario s = resolve_scenario(c);
  make_dir(c.out);
  const fs::path out(c.out);
  write_text(out / "scenario.json", dump(hvac::scenario_to_json(s)));
  log(c, "preparing coil models");
  const hvac::CoilModels coil = hvac::scenario_coil_models(s);

  const std::vector<hvac::ControllerKind> kinds = {hvac::ControllerKind::SlMpc, hvac::ControllerKind::SMpc,
                                                   hvac::ControllerKind::Bl};
  std::vector<RunOutcome> outcomes(kinds.size());
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const fs::path dir = out / hvac::to_string(kinds[i]);
    make_dir(dir.string());
    workers.emplace_back([&, i, dir] {
      try {
        outcomes[i] = run_one(s, kinds[i], coil, c.steps, dir);
      } catch (const std::exception& e) {
        outcomes[i].kind = kinds[i];
        outcomes[i].error = e.what();
      }
    });
  }
  for (std::thread& t : workers) t.join();

  bool partial = false;
  json rows = json::array();
  std::ostringstream table;
  table << std::left << std::setw(8) << "ctrl" << std::right << std::setw(10) << "E_total" << std::setw(9) << "E_fan"
        << std::setw(10) << "E_cool" << std::setw(10) << "E_reheat" << std::setw(9) << "V_T" << std::setw(11) << "V_W"
        << std::setw(9) << "solver" << "  status\n";
  for (const RunOutcome& o : outcomes) {
    const std::string name = hvac::to_string(o.kind);
    const bool failed = !o.metrics || o.aborted;
    partial = partial || failed;
    const std::string status = !o.metrics ? "failed" : (o.aborted ? "aborted" : "ok");
    json row = {{"controller", name}, {"status", status}, {"error", o.error}};
    table << std::left << std::setw(8) << name << std::right;
    if (o.metrics) {
      const hvac::Metrics& m = *o.metrics;
      row["E_total_kWh"] = m.E_total_kWh;
      row["E_fan_kWh"] = m.E_fan_kWh;
      row["E_cooling_kWh"] = m.E_cooling_kWh;
      row["E_reheat_kWh"] = m.E_reheat_kWh;
      row["V_T_Ch"] = m.V_T;
      row["V_W_kgkg_h"] = m.V_W;
      row["V_W_unoccupied_kgkg_h"] = m.V_W_unoccupied;
      row["solver_success_rate"] = m.solver_steps > 0 ? json(m.solver_success_rate) : json(nullptr);
      table << std::setw(10) << fixed(m.E_total_kWh, 2) << std::setw(9) << fixed(m.E_fan_kWh, 2) << std::setw(10)
            << fixed(m.E_cooling_kWh, 2) << std::setw(10) << fixed(m.E_reheat_kWh, 2) << std::setw(9)
            << fixed(m.V_T, 4) << std::setw(11) << sci(m.V_W) << std::setw(9)
            << (m.solver_steps > 0 ? fixed(100.0 * m.solver_success_rate, 1) + "%" : std::string("-"));
    } else {
      table << std::setw(10) << "-" << std::setw(9) << "-" << std::setw(10) << "-" << std::setw(10) << "-"
            << std::setw(9) << "-" << std::setw(11) << "-" << std::setw(9) << "-";
    }
    table << "  " << status;
    if (!o.error.empty()) table << " (" << o.error << ")";
    table << '\n';
    rows.push_back(row);
  }
  json doc = {{"scenario", s.name}, {"archetype", s.archetype}, {"controllers", rows}, {"complete", !partial}};
  write_text(out / "comparison.json", dump(doc));
  write_text(out / "comparison.txt", table.str());
  std::cout << table.str();
  return partial ? kPartial : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Economic MPC for a single-zone VAV system with humidity"};
  app.require_subcommand(1);

  Common fit_opts, run_opts, cmp_opts;
  std::string controller;

  CLI::App* fit = app.add_subcommand("fit-coil", "Fit both coil surrogates on the synthetic testbed");
  add_common(fit, fit_opts, false);

  CLI::App* run = app.add_subcommand("run", "Run one controller in closed loop");
  add_common(run, run_opts, true);
  run->add_option("--controller", controller, "Controller")
      ->required()
      ->check(CLI::IsMember({"sl-mpc", "s-mpc", "bl"}));

  CLI::App* cmp = app.add_subcommand("compare", "Run all three controllers on the same scenario");
  add_common(cmp, cmp_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInput;
  }

  try {
    if (fit->parsed()) return cmd_fit_coil(fit_opts);
    if (run->parsed()) return cmd_run(run_opts, controller);
    if (cmp->parsed()) return cmd_compare(cmp_opts);
  } catch (const hvac::InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInput;
  }
  return kInput;
}
