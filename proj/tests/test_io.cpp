#include "nihigs/io.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace nihigs;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string data_path(const std::string& name) {
  return std::string(NIHIGS_DATA_DIR) + "/" + name;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("nihigs_io_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_SUITE("io") {

TEST_CASE("matrix json round trip") {
  Mat m(2, 3);
  m << 1, 2.5, -3, 0.1, 0, 7;
  Mat back = mat_from_json(mat_to_json(m));
  CHECK((back - m).norm() == 0.0);

  CHECK_THROWS_AS(mat_from_json(parse_json_text("[[1,2],[3]]")), MalformedJson);
  CHECK_THROWS_AS(mat_from_json(parse_json_text("[[1,\"x\"]]")), MalformedJson);
  CHECK_THROWS_AS(mat_from_json(parse_json_text("42")), MalformedJson);
}

TEST_CASE("vector json round trip") {
  Vec v(3);
  v << -1, 0.25, 9;
  Vec back = vec_from_json(vec_to_json(v));
  CHECK((back - v).norm() == 0.0);
  CHECK_THROWS_AS(vec_from_json(parse_json_text("{\"a\":1}")), MalformedJson);
}

TEST_CASE("bundled plant file carries the printed matrices") {
  PlantModel plant = load_plant(data_path("mems_model.json"));
  CHECK(plant.states() == 4);
  CHECK(plant.channels() == 2);
  CHECK(plant.A()(0, 0) == 6989.99);
  CHECK(plant.A()(1, 2) == -1058.081);
  CHECK(plant.B()(0, 0) == 157.81);
  CHECK(plant.C()(1, 3) == 161.47);
}

TEST_CASE("plant re-serialization reproduces the bundled bytes") {
  PlantModel plant = load_plant(data_path("mems_model.json"));
  CHECK(canonical_text(plant_to_json(plant)) == slurp(data_path("mems_model.json")));
}

TEST_CASE("controller re-serialization reproduces the bundled bytes") {
  ControllerConfig ctrl = load_controller(data_path("mems_controller.json"));
  CHECK(ctrl.kind == ControllerKind::Multi);
  REQUIRE(ctrl.k_h.size() == 2);
  CHECK(ctrl.k_h[0] == 0.5617);
  CHECK(ctrl.omega_h[1] == 11560.0);
  CHECK(canonical_text(controller_to_json(ctrl)) == slurp(data_path("mems_controller.json")));
}

TEST_CASE("controller json validates on load") {
  CHECK_THROWS_AS(controller_from_json(parse_json_text("{\"type\":\"multi\"}")), MalformedJson);
  CHECK_THROWS_AS(
      controller_from_json(parse_json_text(
          "{\"type\":\"ratio\",\"k_h\":[1.0],\"omega_h\":[1.0]}")),
      MalformedJson);
  // Schema-valid but parameter-invalid content surfaces the domain error.
  CHECK_THROWS(controller_from_json(
      parse_json_text("{\"type\":\"single\",\"k_h\":[-1.0],\"omega_h\":[1.0]}")));
}

TEST_CASE("signal json round trips every kind") {
  for (const InputSignal& s :
       {InputSignal::zero(), InputSignal::step(0.5), InputSignal::pulse_train(0.1, 10.0, 0.5),
        InputSignal::sine(2.0, 3.5)}) {
    InputSignal back = signal_from_json(signal_to_json(s));
    CHECK(back.kind == s.kind);
    CHECK(back.amplitude == s.amplitude);
    if (s.kind == SignalKind::PulseTrain || s.kind == SignalKind::Sine) {
      CHECK(back.frequency_hz == s.frequency_hz);
    }
    if (s.kind == SignalKind::PulseTrain) CHECK(back.duty == s.duty);
  }
  CHECK_THROWS_AS(signal_from_json(parse_json_text("{\"kind\":\"sawtooth\"}")), MalformedJson);
}

TEST_CASE("sim config json keeps the optional certificate") {
  SimConfig cfg;
  cfg.t_end = 0.25;
  cfg.dt = 1e-5;
  cfg.eps_switch = 1e-8;
  cfg.monitor_Y = Mat::Identity(2, 2);
  SimConfig back = simconfig_from_json(simconfig_to_json(cfg));
  CHECK(back.t_end == cfg.t_end);
  CHECK(back.dt == cfg.dt);
  CHECK(back.eps_switch == cfg.eps_switch);
  REQUIRE(back.monitor_Y.has_value());
  CHECK((*back.monitor_Y - Mat::Identity(2, 2)).norm() == 0.0);

  SimConfig plain;
  CHECK_FALSE(simconfig_from_json(simconfig_to_json(plain)).monitor_Y.has_value());
}

TEST_CASE("scenario files resolve relative plant references") {
  TempDir dir;
  PlantModel plant = load_plant(data_path("mems_model.json"));
  save_plant(plant, dir.file("model.json"));

  Json j;
  j["plant"] = "model.json";
  j["controller"] = parse_json_text(slurp(data_path("mems_controller.json")));
  j["wiring"] = "plant_input";
  j["input"] = signal_to_json(InputSignal::pulse_train(0.1, 10.0, 0.5));
  j["sim"]["t_end"] = 0.1;
  j["sim"]["dt"] = 1e-6;
  j["outputs"]["trajectory_csv"] = "run.csv";
  save_json(j, dir.file("scenario.json"));

  Scenario s = load_scenario(dir.file("scenario.json"));
  REQUIRE(s.plant.has_value());
  CHECK(s.plant->states() == 4);
  CHECK(s.plant_ref == std::string("model.json"));
  CHECK(s.controller.kind == ControllerKind::Multi);
  CHECK(s.wiring == Wiring::PlantInput);
  REQUIRE(s.input.size() == 1);
  CHECK(s.input[0].kind == SignalKind::PulseTrain);
  CHECK(s.sim.t_end == 0.1);
  CHECK(s.trajectory_csv == "run.csv");
  CHECK(s.report_json.empty());

  // Round trip through the writer keeps the reference form.
  Json round = scenario_to_json(s);
  CHECK(round["plant"] == "model.json");
}

TEST_CASE("scenario with a null plant runs the controller open loop") {
  Json j;
  j["plant"] = nullptr;
  j["controller"] = parse_json_text("{\"type\":\"single\",\"k_h\":[1.0],\"omega_h\":[2.0]}");
  j["input"] = signal_to_json(InputSignal::step(1.0));
  Scenario s = scenario_from_json(j, "");
  CHECK_FALSE(s.plant.has_value());
  CHECK(s.controller.kind == ControllerKind::Single);
}

TEST_CASE("canonical text is sorted, indented and newline terminated") {
  Json j;
  j["zeta"] = 1;
  j["alpha"] = 2;
  std::string text = canonical_text(j);
  CHECK(text == "{\n  \"alpha\": 2,\n  \"zeta\": 1\n}\n");
  CHECK(canonical_text(j) == text);
}

TEST_CASE("file errors and parse errors are distinct") {
  CHECK_THROWS_AS(load_json("/nonexistent/nihigs/file.json"), FileError);
  CHECK_THROWS_AS(parse_json_text("{ not json"), MalformedJson);
  TempDir dir;
  std::ofstream(dir.file("bad.json")) << "{ \"A\": [1,";
  CHECK_THROWS_AS(load_json(dir.file("bad.json")), MalformedJson);
}

TEST_CASE("trajectory csv layout and float fidelity") {
  Trajectory traj;
  traj.times = Vec(2);
  traj.times << 0.0, 0.1;
  traj.x = Mat(2, 1);
  traj.x << 0.0, 0.1;
  traj.x_h = Mat(2, 1);
  traj.x_h << 0.0, 1.0 / 3.0;
  traj.e = Mat(2, 1);
  traj.e << 0.0, -2.0;
  traj.u = Mat(2, 1);
  traj.u << 0.0, 5.0;
  traj.modes = Eigen::MatrixXi(2, 1);
  traj.modes << 0, 1;
  traj.V = Vec(2);
  traj.V << 0.0, 0.25;

  std::ostringstream os;
  write_trajectory_csv(os, traj);
  std::istringstream in(os.str());
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  CHECK(header == "t,x1,xh1,e1,u1,mode1,V");
  CHECK(row0 == "0,0,0,0,0,0,0");
  CHECK(row1 == "0.10000000000000001,0.10000000000000001,0.33333333333333331,-2,5,1,0.25");

  traj.W = Vec(2);
  traj.W << 0.5, 0.125;
  std::ostringstream os2;
  write_trajectory_csv(os2, traj);
  std::string text = os2.str();
  CHECK(text.find(",W\n") != std::string::npos);
  CHECK(text.find(",0.125\n") != std::string::npos);
}

TEST_CASE("describing csv layout") {
  DescribingPoint p;
  p.omega = 10.0;
  p.amplitude = 1.0;
  p.complex_gain = {0.5, -0.25};
  p.magnitude_db = -5.0;
  p.phase_deg = -26.5;
  std::ostringstream os;
  write_describing_csv(os, {p});
  std::istringstream in(os.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "omega_rad_s,amplitude,re,im,mag_db,phase_deg");
  CHECK(row == "10,1,0.5,-0.25,-5,-26.5");
}

TEST_CASE("verdict json names the method and the detail") {
  PlantModel plant = load_plant(data_path("mems_model.json"));
  NiVerdict v = ni_frequency_test(plant, default_frequency_grid(plant));
  Json j = verdict_to_json(v);
  CHECK(j["method"] == "sweep");
  CHECK(j["is_ni"] == false);
  CHECK(j["detail"].contains("worst_omega"));
  CHECK(j["detail"].contains("worst_min_eig"));

  NiVerdict h = ni_hamiltonian_test(PlantModel(-Mat::Identity(1, 1), 2.0 * Mat::Identity(1, 1),
                                               Mat::Identity(1, 1)));
  Json jh = verdict_to_json(h);
  CHECK(jh["method"] == "hamiltonian");
  CHECK(jh["is_ni"] == true);
  CHECK(jh["detail"]["clusters"].size() == 1);

  NiVerdict c = ni_certificate_test(plant);
  Json jc = verdict_to_json(c);
  CHECK(jc["method"] == "certificate");
  CHECK(jc["detail"]["status"] == "equality_infeasible");
}

TEST_CASE("report json carries the monitor fields") {
  SimReport rep;
  rep.converged = true;
  rep.final_state_norm = 1e-5;
  rep.switch_count = 42;
  rep.monitor = "supplied";
  StepMetrics m;
  m.overshoot = 0.25;
  rep.step_metrics = std::vector<StepMetrics>{m};
  Json j = report_to_json(rep);
  CHECK(j["converged"] == true);
  CHECK(j["switch_count"] == 42);
  CHECK(j["monitor"] == "supplied");
  REQUIRE(j["step_metrics"].size() == 1);
  CHECK(j["step_metrics"][0]["overshoot"] == 0.25);
}

}  // TEST_SUITE
