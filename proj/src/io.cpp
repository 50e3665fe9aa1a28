#include "nihigs/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace nihigs {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const Json& require(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw MalformedJson(std::string("missing key \"") + key + "\"");
  }
  return *it;
}

}  // namespace

Mat mat_from_json(const Json& j) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw MalformedJson("matrix must be a non-empty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw MalformedJson("matrix rows have inconsistent lengths");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& cell = row[static_cast<std::size_t>(c)];
      if (!cell.is_number()) throw MalformedJson("matrix entries must be numbers");
      m(r, c) = cell.get<double>();
    }
  }
  return m;
}

Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Vec vec_from_json(const Json& j) {
  if (!j.is_array()) throw MalformedJson("vector must be an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto& cell = j[static_cast<std::size_t>(i)];
    if (!cell.is_number()) throw MalformedJson("vector entries must be numbers");
    v[i] = cell.get<double>();
  }
  return v;
}

Json vec_to_json(const Vec& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

PlantModel plant_from_json(const Json& j) {
  return PlantModel(mat_from_json(require(j, "A")), mat_from_json(require(j, "B")),
                    mat_from_json(require(j, "C")));
}

Json plant_to_json(const PlantModel& plant) {
  Json j;
  j["A"] = mat_to_json(plant.A());
  j["B"] = mat_to_json(plant.B());
  j["C"] = mat_to_json(plant.C());
  return j;
}

PlantModel load_plant(const std::string& path) { return plant_from_json(load_json(path)); }

void save_plant(const PlantModel& plant, const std::string& path) {
  save_json(plant_to_json(plant), path);
}

ControllerConfig controller_from_json(const Json& j) {
  ControllerConfig ctrl;
  const std::string type = require(j, "type").get<std::string>();
  if (type == "single") {
    ctrl.kind = ControllerKind::Single;
  } else if (type == "multi") {
    ctrl.kind = ControllerKind::Multi;
  } else if (type == "cascade") {
    ctrl.kind = ControllerKind::Cascade;
  } else {
    throw MalformedJson("controller type must be single, multi or cascade");
  }
  const Vec k = vec_from_json(require(j, "k_h"));
  const Vec w = vec_from_json(require(j, "omega_h"));
  ctrl.k_h.assign(k.data(), k.data() + k.size());
  ctrl.omega_h.assign(w.data(), w.data() + w.size());
  if (j.contains("a")) ctrl.a = j["a"].get<double>();
  ctrl.validate();
  return ctrl;
}

Json controller_to_json(const ControllerConfig& ctrl) {
  Json j;
  switch (ctrl.kind) {
    case ControllerKind::Single: j["type"] = "single"; break;
    case ControllerKind::Multi: j["type"] = "multi"; break;
    case ControllerKind::Cascade: j["type"] = "cascade"; break;
  }
  j["k_h"] = ctrl.k_h;
  j["omega_h"] = ctrl.omega_h;
  if (ctrl.kind == ControllerKind::Cascade && ctrl.a > 0.0) j["a"] = ctrl.a;
  return j;
}

ControllerConfig load_controller(const std::string& path) {
  return controller_from_json(load_json(path));
}

void save_controller(const ControllerConfig& ctrl, const std::string& path) {
  save_json(controller_to_json(ctrl), path);
}

InputSignal signal_from_json(const Json& j) {
  InputSignal s;
  const std::string kind = require(j, "kind").get<std::string>();
  if (kind == "zero") {
    s.kind = SignalKind::Zero;
  } else if (kind == "step") {
    s.kind = SignalKind::Step;
  } else if (kind == "pulse_train") {
    s.kind = SignalKind::PulseTrain;
  } else if (kind == "sine") {
    s.kind = SignalKind::Sine;
  } else {
    throw MalformedJson("signal kind must be zero, step, pulse_train or sine");
  }
  if (j.contains("amplitude")) s.amplitude = j["amplitude"].get<double>();
  if (j.contains("frequency_hz")) s.frequency_hz = j["frequency_hz"].get<double>();
  if (j.contains("duty")) s.duty = j["duty"].get<double>();
  s.validate();
  return s;
}

Json signal_to_json(const InputSignal& s) {
  Json j;
  switch (s.kind) {
    case SignalKind::Zero: j["kind"] = "zero"; break;
    case SignalKind::Step: j["kind"] = "step"; break;
    case SignalKind::PulseTrain: j["kind"] = "pulse_train"; break;
    case SignalKind::Sine: j["kind"] = "sine"; break;
  }
  j["amplitude"] = s.amplitude;
  if (s.kind == SignalKind::PulseTrain || s.kind == SignalKind::Sine) {
    j["frequency_hz"] = s.frequency_hz;
  }
  if (s.kind == SignalKind::PulseTrain) j["duty"] = s.duty;
  return j;
}

SimConfig simconfig_from_json(const Json& j) {
  SimConfig cfg;
  if (j.contains("t_end")) cfg.t_end = j["t_end"].get<double>();
  if (j.contains("dt")) cfg.dt = j["dt"].get<double>();
  if (j.contains("eps_switch")) cfg.eps_switch = j["eps_switch"].get<double>();
  if (j.contains("max_switch_rate")) cfg.max_switch_rate = j["max_switch_rate"].get<double>();
  if (j.contains("convergence_rel")) cfg.convergence_rel = j["convergence_rel"].get<double>();
  if (j.contains("monitor_lyapunov")) cfg.monitor_lyapunov = j["monitor_lyapunov"].get<bool>();
  if (j.contains("monitor_Y")) cfg.monitor_Y = mat_from_json(j["monitor_Y"]);
  cfg.validate();
  return cfg;
}

Json simconfig_to_json(const SimConfig& cfg) {
  Json j;
  j["t_end"] = cfg.t_end;
  j["dt"] = cfg.dt;
  j["eps_switch"] = cfg.eps_switch;
  j["max_switch_rate"] = cfg.max_switch_rate;
  j["convergence_rel"] = cfg.convergence_rel;
  j["monitor_lyapunov"] = cfg.monitor_lyapunov;
  if (cfg.monitor_Y) j["monitor_Y"] = mat_to_json(*cfg.monitor_Y);
  return j;
}

Scenario scenario_from_json(const Json& j, const std::string& base_dir) {
  Scenario s;
  const Json& plant = require(j, "plant");
  if (plant.is_string()) {
    std::filesystem::path p = plant.get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    s.plant_ref = plant.get<std::string>();
    s.plant = load_plant(p.string());
  } else if (plant.is_object()) {
    s.plant = plant_from_json(plant);
  } else if (!plant.is_null()) {
    throw MalformedJson("plant must be a path, an inline object or null");
  }
  const Json& ctrl = require(j, "controller");
  if (ctrl.is_string()) {
    std::filesystem::path p = ctrl.get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    s.controller = load_controller(p.string());
  } else {
    s.controller = controller_from_json(ctrl);
  }
  if (j.contains("wiring")) {
    const std::string w = j["wiring"].get<std::string>();
    if (w == "plant_input") {
      s.wiring = Wiring::PlantInput;
    } else if (w == "controller_input") {
      s.wiring = Wiring::ControllerInput;
    } else {
      throw MalformedJson("wiring must be plant_input or controller_input");
    }
  }
  const Json& input = require(j, "input");
  if (input.is_array()) {
    for (const auto& item : input) s.input.push_back(signal_from_json(item));
  } else {
    s.input.push_back(signal_from_json(input));
  }
  s.sim = j.contains("sim") ? simconfig_from_json(j["sim"]) : SimConfig{};
  if (j.contains("initial_state")) {
    const Json& init = j["initial_state"];
    if (init.contains("x")) s.sim.x0 = vec_from_json(init["x"]);
    if (init.contains("x_h")) s.sim.xh0 = vec_from_json(init["x_h"]);
  }
  if (j.contains("outputs")) {
    const Json& out = j["outputs"];
    if (out.contains("trajectory_csv")) s.trajectory_csv = out["trajectory_csv"].get<std::string>();
    if (out.contains("report_json")) s.report_json = out["report_json"].get<std::string>();
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  const std::string dir = std::filesystem::path(path).parent_path().string();
  return scenario_from_json(load_json(path), dir);
}

Json scenario_to_json(const Scenario& s) {
  Json j;
  if (s.plant_ref) {
    j["plant"] = *s.plant_ref;
  } else if (s.plant) {
    j["plant"] = plant_to_json(*s.plant);
  } else {
    j["plant"] = nullptr;
  }
  j["controller"] = controller_to_json(s.controller);
  j["wiring"] = s.wiring == Wiring::PlantInput ? "plant_input" : "controller_input";
  Json input = Json::array();
  for (const auto& sig : s.input) input.push_back(signal_to_json(sig));
  j["input"] = std::move(input);
  j["sim"] = simconfig_to_json(s.sim);
  if (s.sim.x0.size() || s.sim.xh0.size()) {
    Json init;
    if (s.sim.x0.size()) init["x"] = vec_to_json(s.sim.x0);
    if (s.sim.xh0.size()) init["x_h"] = vec_to_json(s.sim.xh0);
    j["initial_state"] = std::move(init);
  }
  if (!s.trajectory_csv.empty() || !s.report_json.empty()) {
    Json out;
    if (!s.trajectory_csv.empty()) out["trajectory_csv"] = s.trajectory_csv;
    if (!s.report_json.empty()) out["report_json"] = s.report_json;
    j["outputs"] = std::move(out);
  }
  return j;
}

Json report_to_json(const SimReport& report) {
  Json j;
  j["converged"] = report.converged;
  j["final_state_norm"] = report.final_state_norm;
  j["max_W_increase"] = report.max_W_increase;
  j["switch_count"] = report.switch_count;
  j["dissipation_max_residual"] = report.dissipation_max_residual;
  j["max_V"] = report.max_V;
  j["max_W"] = report.max_W;
  j["monitor"] = report.monitor;
  if (report.step_metrics) {
    Json arr = Json::array();
    for (const auto& m : *report.step_metrics) {
      Json mj;
      mj["overshoot"] = m.overshoot;
      mj["settling_time_s"] = m.settling_time_s;
      mj["steady_state_error"] = m.steady_state_error;
      mj["settled"] = m.settled;
      arr.push_back(std::move(mj));
    }
    j["step_metrics"] = std::move(arr);
  } else {
    j["step_metrics"] = nullptr;
  }
  return j;
}

Json verdict_to_json(const NiVerdict& verdict) {
  Json j;
  switch (verdict.method) {
    case NiMethod::Sweep: j["method"] = "sweep"; break;
    case NiMethod::Hamiltonian: j["method"] = "hamiltonian"; break;
    case NiMethod::Certificate: j["method"] = "certificate"; break;
  }
  j["is_ni"] = verdict.is_ni;
  j["conclusive"] = verdict.conclusive;
  if (const auto* sweep = std::get_if<SweepDetail>(&verdict.detail)) {
    Json d;
    d["worst_omega"] = sweep->worst_omega;
    d["worst_min_eig"] = sweep->worst_min_eig;
    d["tol_at_worst"] = sweep->tol_at_worst;
    d["grid_size"] = sweep->grid_size;
    j["detail"] = std::move(d);
  } else if (const auto* ham = std::get_if<HamiltonianDetail>(&verdict.detail)) {
    Json d;
    Json eigs = Json::array();
    for (const auto& lam : ham->eigenvalues) {
      eigs.push_back(Json::array({lam.real(), lam.imag()}));
    }
    d["eigenvalues"] = std::move(eigs);
    Json clusters = Json::array();
    for (const auto& c : ham->clusters) {
      Json cj;
      cj["imag"] = c.imag;
      cj["multiplicity"] = c.multiplicity;
      clusters.push_back(std::move(cj));
    }
    d["clusters"] = std::move(clusters);
    d["axis_tol"] = ham->axis_tol;
    j["detail"] = std::move(d);
  } else if (const auto* cert = std::get_if<CertificateSearch>(&verdict.detail)) {
    Json d;
    switch (cert->status) {
      case CertificateStatus::Found: d["status"] = "found"; break;
      case CertificateStatus::EqualityInfeasible: d["status"] = "equality_infeasible"; break;
      case CertificateStatus::SearchInconclusive: d["status"] = "search_inconclusive"; break;
    }
    d["equality_residual_rel"] = cert->equality_residual_rel;
    d["best_phi"] = cert->best_phi;
    d["message"] = cert->message;
    if (cert->certificate) {
      d["Y"] = mat_to_json(cert->certificate->Y);
      d["residual_eq"] = cert->certificate->residual_eq;
      d["residual_lyap"] = cert->certificate->residual_lyap;
    }
    j["detail"] = std::move(d);
  }
  return j;
}

Json synthesized_to_json(const SynthesizedController& result) {
  Json j = controller_to_json(result.config);
  j["omega_h_heuristic"] = result.omega_h_heuristic;
  j["margin_achieved"] = result.margin_achieved;
  if (result.asymmetry_rel > 0.0) j["dc_gain_asymmetry_rel"] = result.asymmetry_rel;
  return j;
}

std::string canonical_text(const Json& j) { return j.dump(2) + "\n"; }

Json parse_json_text(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& err) {
    throw MalformedJson(err.what());
  }
}

Json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_json_text(buf.str());
}

void save_json(const Json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write " + path);
  out << canonical_text(j);
  if (!out) throw FileError("write failed for " + path);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << 't';
  for (Eigen::Index i = 0; i < traj.x.cols(); ++i) os << ",x" << i + 1;
  for (Eigen::Index i = 0; i < traj.x_h.cols(); ++i) os << ",xh" << i + 1;
  for (Eigen::Index i = 0; i < traj.e.cols(); ++i) os << ",e" << i + 1;
  for (Eigen::Index i = 0; i < traj.u.cols(); ++i) os << ",u" << i + 1;
  for (Eigen::Index i = 0; i < traj.modes.cols(); ++i) os << ",mode" << i + 1;
  os << ",V";
  const bool with_w = traj.W.size() == traj.times.size() && traj.W.size() > 0;
  if (with_w) os << ",W";
  os << '\n';
  for (Eigen::Index r = 0; r < traj.times.size(); ++r) {
    os << fmt17(traj.times[r]);
    for (Eigen::Index i = 0; i < traj.x.cols(); ++i) os << ',' << fmt17(traj.x(r, i));
    for (Eigen::Index i = 0; i < traj.x_h.cols(); ++i) os << ',' << fmt17(traj.x_h(r, i));
    for (Eigen::Index i = 0; i < traj.e.cols(); ++i) os << ',' << fmt17(traj.e(r, i));
    for (Eigen::Index i = 0; i < traj.u.cols(); ++i) os << ',' << fmt17(traj.u(r, i));
    for (Eigen::Index i = 0; i < traj.modes.cols(); ++i) os << ',' << traj.modes(r, i);
    os << ',' << fmt17(traj.V.size() ? traj.V[r] : 0.0);
    if (with_w) os << ',' << fmt17(traj.W[r]);
    os << '\n';
  }
}

void save_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write " + path);
  write_trajectory_csv(out, traj);
  if (!out) throw FileError("write failed for " + path);
}

void write_describing_csv(std::ostream& os, const std::vector<DescribingPoint>& points) {
  os << "omega_rad_s,amplitude,re,im,mag_db,phase_deg\n";
  for (const auto& p : points) {
    os << fmt17(p.omega) << ',' << fmt17(p.amplitude) << ',' << fmt17(p.complex_gain.real())
       << ',' << fmt17(p.complex_gain.imag()) << ',' << fmt17(p.magnitude_db) << ','
       << fmt17(p.phase_deg) << '\n';
  }
}

void save_describing_csv(const std::vector<DescribingPoint>& points, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write " + path);
  write_describing_csv(out, points);
  if (!out) throw FileError("write failed for " + path);
}

}  // namespace nihigs
