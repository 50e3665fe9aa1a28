// Command-line front end: NI certification, gain synthesis, hybrid
// simulation, describing-function sweeps and the bundled nanopositioner
// demonstration.
//
// Exit codes: 0 success (for check-ni: property holds), 1 check-ni property
// fails, 2 check-ni inconclusive, 10 unreadable or malformed input, 11 wrong
// plant shape for the requested topology, 12 invalid parameters, 13 output
// write failure, 14 simulation guard tripped (Zeno, sector breach,
// non-finite state).
#include "mems_data.hpp"
#include "nihigs/analysis.hpp"
#include "nihigs/closedloop.hpp"
#include "nihigs/io.hpp"
#include "nihigs/plant.hpp"
#include "nihigs/synthesis.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace nihigs;

constexpr int kExitMalformed = 10;
constexpr int kExitShape = 11;
constexpr int kExitInvalid = 12;
constexpr int kExitWrite = 13;
constexpr int kExitGuard = 14;

int verdict_exit_code(const NiVerdict& v) {
  if (!v.conclusive) return 2;
  return v.is_ni ? 0 : 1;
}

void print_json(const Json& j) { std::cout << canonical_text(j); }

Json error_json(const std::string& stage, const std::string& message) {
  Json j;
  j["error"] = message;
  j["stage"] = stage;
  return j;
}

std::vector<double> log_grid(double lo, double hi, int points) {
  std::vector<double> grid;
  if (points < 2 || !(lo > 0.0) || !(hi > lo)) {
    throw std::invalid_argument("frequency grid needs 0 < min < max and at least 2 points");
  }
  const double step = (std::log10(hi) - std::log10(lo)) / (points - 1);
  for (int i = 0; i < points; ++i) grid.push_back(std::pow(10.0, std::log10(lo) + i * step));
  return grid;
}

int run_check_ni(const std::string& model_path, const std::string& method, double grid_min,
                 double grid_max, int grid_points) {
  PlantModel plant = [&] {
    try {
      return load_plant(model_path);
    } catch (const std::exception& err) {
      print_json(error_json("load", err.what()));
      std::exit(kExitMalformed);
    }
  }();
  try {
    NiVerdict verdict = [&] {
      if (method == "sweep") {
        const std::vector<double> grid = grid_min > 0.0 && grid_max > grid_min
                                             ? log_grid(grid_min, grid_max, grid_points)
                                             : default_frequency_grid(plant, grid_points);
        return ni_frequency_test(plant, grid);
      }
      if (method == "hamiltonian") return ni_hamiltonian_test(plant);
      if (method == "certificate") return ni_certificate_test(plant);
      throw std::invalid_argument("method must be sweep, hamiltonian or certificate");
    }();
    print_json(verdict_to_json(verdict));
    return verdict_exit_code(verdict);
  } catch (const PreconditionQ0& err) {
    // The Hamiltonian construction needs C B + B^T C^T positive definite;
    // without it the method cannot decide either way.
    Json j = error_json("hamiltonian", err.what());
    j["is_ni"] = false;
    j["conclusive"] = false;
    print_json(j);
    return 2;
  } catch (const SingularAtFrequency& err) {
    Json j = error_json("sweep", err.what());
    j["is_ni"] = false;
    j["conclusive"] = false;
    print_json(j);
    return 2;
  } catch (const std::invalid_argument& err) {
    print_json(error_json("check-ni", err.what()));
    return kExitInvalid;
  }
}

int run_synthesize(const std::string& model_path, const std::string& topology, double margin,
                   double cap, const std::vector<double>& omega_hint) {
  PlantModel plant = [&] {
    try {
      return load_plant(model_path);
    } catch (const std::exception& err) {
      print_json(error_json("load", err.what()));
      std::exit(kExitMalformed);
    }
  }();
  try {
    SynthesisRequest req{std::move(plant)};
    if (topology == "single") {
      req.topology = ControllerKind::Single;
    } else if (topology == "multi") {
      req.topology = ControllerKind::Multi;
    } else if (topology == "cascade") {
      req.topology = ControllerKind::Cascade;
    } else {
      throw std::invalid_argument("topology must be single, multi or cascade");
    }
    req.margin = margin;
    req.gain_cap = cap;
    if (!omega_hint.empty()) req.omega_h_hint = omega_hint;
    const SynthesizedController result = synthesize(req);
    print_json(synthesized_to_json(result));
    return 0;
  } catch (const NotSiso& err) {
    print_json(error_json("synthesize", err.what()));
    return kExitShape;
  } catch (const NotSquare& err) {
    print_json(error_json("synthesize", err.what()));
    return kExitShape;
  } catch (const Infeasible& err) {
    print_json(error_json("synthesize", err.what()));
    return kExitInvalid;
  } catch (const std::invalid_argument& err) {
    print_json(error_json("synthesize", err.what()));
    return kExitInvalid;
  }
}

int run_simulate(const std::string& scenario_path) {
  Scenario scenario = [&] {
    try {
      return load_scenario(scenario_path);
    } catch (const FileError& err) {
      print_json(error_json("load", err.what()));
      std::exit(kExitMalformed);
    } catch (const MalformedJson& err) {
      print_json(error_json("load", err.what()));
      std::exit(kExitMalformed);
    } catch (const std::exception& err) {
      // Well-formed file whose values fail validation, e.g. dt >= t_end.
      print_json(error_json("load", err.what()));
      std::exit(kExitInvalid);
    }
  }();
  try {
    const ClosedLoop loop = scenario.plant
                                ? assemble(*scenario.plant, scenario.controller, scenario.wiring)
                                : assemble_open_loop(scenario.controller);
    std::vector<InputSignal> input = scenario.input;
    if (input.size() == 1 && loop.channels() > 1) {
      input.assign(static_cast<std::size_t>(loop.channels()), input.front());
    }
    auto [traj, report] = simulate(loop, input, scenario.sim);
    const std::filesystem::path base = std::filesystem::path(scenario_path).parent_path();
    try {
      if (!scenario.trajectory_csv.empty()) {
        save_trajectory_csv(traj, (base / scenario.trajectory_csv).string());
      }
      if (!scenario.report_json.empty()) {
        save_json(report_to_json(report), (base / scenario.report_json).string());
      }
    } catch (const FileError& err) {
      print_json(error_json("write", err.what()));
      return kExitWrite;
    }
    print_json(report_to_json(report));
    return 0;
  } catch (const ZenoGuard& err) {
    print_json(error_json("simulate", err.what()));
    return kExitGuard;
  } catch (const OutsideSector& err) {
    print_json(error_json("simulate", err.what()));
    return kExitGuard;
  } catch (const NonFinite& err) {
    print_json(error_json("simulate", err.what()));
    return kExitGuard;
  } catch (const DimensionMismatch& err) {
    print_json(error_json("simulate", err.what()));
    return kExitInvalid;
  } catch (const std::invalid_argument& err) {
    print_json(error_json("simulate", err.what()));
    return kExitInvalid;
  } catch (const ParameterViolation& err) {
    print_json(error_json("simulate", err.what()));
    return kExitInvalid;
  }
}

int run_describe_fn(double k_h, double omega_h, double amplitude,
                    const std::vector<double>& omegas, int settle, int measure, int steps,
                    const std::string& out_path) {
  try {
    const HigsParams params(k_h, omega_h);
    const std::vector<DescribingPoint> points =
        describing_sweep(params, amplitude, omegas, settle, measure, steps);
    if (out_path.empty()) {
      write_describing_csv(std::cout, points);
    } else {
      try {
        save_describing_csv(points, out_path);
      } catch (const FileError& err) {
        print_json(error_json("write", err.what()));
        return kExitWrite;
      }
    }
    return 0;
  } catch (const ParameterViolation& err) {
    print_json(error_json("describe-fn", err.what()));
    return kExitInvalid;
  } catch (const std::invalid_argument& err) {
    print_json(error_json("describe-fn", err.what()));
    return kExitInvalid;
  } catch (const ZenoGuard& err) {
    print_json(error_json("describe-fn", err.what()));
    return kExitGuard;
  } catch (const NonFinite& err) {
    print_json(error_json("describe-fn", err.what()));
    return kExitGuard;
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write " + path.string());
  out << text;
  if (!out) throw FileError("write failed for " + path.string());
}

int run_demo_mems(const std::string& out_dir) {
  namespace fs = std::filesystem;
  try {
    const fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);

    // The published model and controller, re-emitted byte-for-byte.
    write_text(dir / "mems_model.json", embedded::mems_model_json);
    write_text(dir / "mems_controller.json", embedded::mems_controller_json);

    const PlantModel plant = plant_from_json(parse_json_text(embedded::mems_model_json));
    const ControllerConfig ctrl =
        controller_from_json(parse_json_text(embedded::mems_controller_json));

    // Pulse-disturbance scenario at the plant input, one pulse period.
    Scenario pulse;
    pulse.plant = plant;
    pulse.plant_ref = "mems_model.json";
    pulse.controller = ctrl;
    pulse.wiring = Wiring::PlantInput;
    pulse.input.assign(2, InputSignal::pulse_train(0.1, 10.0, 0.5));
    pulse.sim.t_end = 0.1;
    pulse.sim.dt = 1e-6;
    pulse.sim.eps_switch = 1e-9;
    pulse.sim.max_switch_rate = 1e6;
    pulse.trajectory_csv = "mems_pulse_closed.csv";
    pulse.report_json = "mems_pulse_report.json";
    save_json(scenario_to_json(pulse), (dir / "mems_pulse.json").string());

    // Regulation from a nonzero initial plant state, zero input.
    Scenario regulation;
    regulation.plant = plant;
    regulation.plant_ref = "mems_model.json";
    regulation.controller = ctrl;
    regulation.wiring = Wiring::PlantInput;
    regulation.input.assign(2, InputSignal::zero());
    regulation.sim.t_end = 0.02;
    regulation.sim.dt = 1e-6;
    regulation.sim.eps_switch = 1e-9;
    regulation.sim.x0 = (Vec(4) << 0.01, -0.01, 0.01, -0.01).finished();
    regulation.trajectory_csv = "mems_regulation.csv";
    regulation.report_json = "mems_regulation_report.json";
    save_json(scenario_to_json(regulation), (dir / "mems_regulation.json").string());

    Json summary;

    // NI certification of the bundled model, reported as data.
    try {
      summary["check_ni"]["hamiltonian"] = verdict_to_json(ni_hamiltonian_test(plant));
    } catch (const PreconditionQ0& err) {
      summary["check_ni"]["hamiltonian"] = error_json("hamiltonian", err.what());
    }
    summary["check_ni"]["sweep"] =
        verdict_to_json(ni_frequency_test(plant, default_frequency_grid(plant)));

    // Closed loop under the pulse versus the plant alone.
    const ClosedLoop loop = assemble(plant, ctrl, pulse.wiring);
    auto [closed_traj, closed_report] = simulate(loop, pulse.input, pulse.sim);
    save_trajectory_csv(closed_traj, (dir / pulse.trajectory_csv).string());
    save_json(report_to_json(closed_report), (dir / pulse.report_json).string());

    const Trajectory open_traj = simulate_linear(plant, pulse.input, pulse.sim);
    save_trajectory_csv(open_traj, (dir / "mems_pulse_open.csv").string());

    Json pulse_summary;
    pulse_summary["closed_report"] = report_to_json(closed_report);
    Json closed_settle = Json::array(), open_settle = Json::array(), improved = Json::array();
    for (Eigen::Index c = 0; c < 2; ++c) {
      const StepMetrics mc = step_metrics(closed_traj, c, 0.0);
      const StepMetrics mo = step_metrics(open_traj, c, 0.0);
      closed_settle.push_back(mc.settling_time_s);
      open_settle.push_back(mo.settling_time_s);
      improved.push_back(mc.settled && mo.settled && mc.settling_time_s < mo.settling_time_s);
    }
    pulse_summary["closed_settling_s"] = std::move(closed_settle);
    pulse_summary["open_settling_s"] = std::move(open_settle);
    pulse_summary["settling_improved"] = std::move(improved);
    summary["pulse"] = std::move(pulse_summary);

    auto [reg_traj, reg_report] = simulate(loop, regulation.input, regulation.sim);
    save_trajectory_csv(reg_traj, (dir / regulation.trajectory_csv).string());
    save_json(report_to_json(reg_report), (dir / regulation.report_json).string());
    summary["regulation"] = report_to_json(reg_report);

    save_json(summary, (dir / "mems_summary.json").string());
    print_json(summary);
    return 0;
  } catch (const FileError& err) {
    print_json(error_json("demo-mems", err.what()));
    return kExitWrite;
  } catch (const ZenoGuard& err) {
    print_json(error_json("demo-mems", err.what()));
    return kExitGuard;
  } catch (const OutsideSector& err) {
    print_json(error_json("demo-mems", err.what()));
    return kExitGuard;
  } catch (const NonFinite& err) {
    print_json(error_json("demo-mems", err.what()));
    return kExitGuard;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and verification toolkit for NI plants under HIGS control"};
  app.require_subcommand(1);
  int rc = 0;

  auto* check = app.add_subcommand("check-ni", "Decide the negative-imaginary property");
  std::string check_model, check_method = "hamiltonian";
  double grid_min = 0.0, grid_max = 0.0;
  int grid_points = 400;
  check->add_option("model", check_model, "Plant model JSON")->required();
  check->add_option("--method", check_method, "sweep, hamiltonian or certificate")
      ->check(CLI::IsMember({"sweep", "hamiltonian", "certificate"}));
  check->add_option("--grid-min", grid_min, "Sweep grid lower bound, rad/s");
  check->add_option("--grid-max", grid_max, "Sweep grid upper bound, rad/s");
  check->add_option("--grid-points", grid_points, "Sweep grid size");
  check->callback(
      [&] { rc = run_check_ni(check_model, check_method, grid_min, grid_max, grid_points); });

  auto* synth = app.add_subcommand("synthesize", "Compute stabilizing HIGS gains");
  std::string synth_model, synth_topology = "single";
  double synth_margin = 0.5, synth_cap = 100.0;
  std::vector<double> synth_hint;
  synth->add_option("model", synth_model, "Plant model JSON")->required();
  synth->add_option("--topology", synth_topology, "single, multi or cascade")
      ->check(CLI::IsMember({"single", "multi", "cascade"}));
  synth->add_option("--margin", synth_margin, "Stability margin in (0,1)");
  synth->add_option("--cap", synth_cap, "Gain cap");
  synth->add_option("--omega-hint", synth_hint, "Per-channel omega_h, rad/s")->delimiter(',');
  synth->callback([&] {
    rc = run_synthesize(synth_model, synth_topology, synth_margin, synth_cap, synth_hint);
  });

  auto* sim = app.add_subcommand("simulate", "Run a scenario file");
  std::string scenario_path;
  sim->add_option("scenario", scenario_path, "Scenario JSON")->required();
  sim->callback([&] { rc = run_simulate(scenario_path); });

  auto* dfn = app.add_subcommand("describe-fn", "Describing-function sweep of one element");
  double dfn_k = 1.0, dfn_w = 1.0, dfn_amp = 1.0;
  std::vector<double> dfn_omegas;
  int dfn_settle = 10, dfn_measure = 10, dfn_steps = 2000;
  std::string dfn_out;
  dfn->add_option("--k-h", dfn_k, "Gain-mode slope");
  dfn->add_option("--omega-h", dfn_w, "Integrator frequency, rad/s");
  dfn->add_option("--amplitude", dfn_amp, "Input sine amplitude");
  dfn->add_option("--omega", dfn_omegas, "Input frequencies, rad/s")->required()->delimiter(',');
  dfn->add_option("--settle", dfn_settle, "Settle cycles discarded");
  dfn->add_option("--measure", dfn_measure, "Cycles measured");
  dfn->add_option("--steps-per-cycle", dfn_steps, "Integration steps per cycle");
  dfn->add_option("--out", dfn_out, "Output CSV path (stdout when absent)");
  dfn->callback([&] {
    rc = run_describe_fn(dfn_k, dfn_w, dfn_amp, dfn_omegas, dfn_settle, dfn_measure, dfn_steps,
                         dfn_out);
  });

  auto* demo = app.add_subcommand("demo-mems", "Bundled nanopositioner demonstration");
  std::string demo_dir;
  demo->add_option("out_dir", demo_dir, "Output directory")->required();
  demo->callback([&] { rc = run_demo_mems(demo_dir); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& err) {
    print_json(error_json("cli", err.what()));
    return kExitInvalid;
  }
  return rc;
}
