// JSON formats for plants, controllers, scenarios and reports, plus the CSV
// trace writers.  All floating-point output is deterministic: JSON numbers
// use shortest round-trip form, CSV uses 17 significant digits.
#pragma once

#include "nihigs/analysis.hpp"
#include "nihigs/closedloop.hpp"
#include "nihigs/plant.hpp"
#include "nihigs/synthesis.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <string>

namespace nihigs {

struct MalformedJson : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

Mat mat_from_json(const Json& j);
Json mat_to_json(const Mat& m);
Vec vec_from_json(const Json& j);
Json vec_to_json(const Vec& v);

// Plant: {"A": [[..]], "B": [[..]], "C": [[..]]} with row-major matrices.
PlantModel plant_from_json(const Json& j);
Json plant_to_json(const PlantModel& plant);
PlantModel load_plant(const std::string& path);
void save_plant(const PlantModel& plant, const std::string& path);

// Controller: {"type": "single"|"multi"|"cascade", "k_h": [..],
// "omega_h": [..], "a": number (cascade, optional)}.
ControllerConfig controller_from_json(const Json& j);
Json controller_to_json(const ControllerConfig& ctrl);
ControllerConfig load_controller(const std::string& path);
void save_controller(const ControllerConfig& ctrl, const std::string& path);

InputSignal signal_from_json(const Json& j);
Json signal_to_json(const InputSignal& s);

// SimConfig fragment; absent keys keep their defaults.
SimConfig simconfig_from_json(const Json& j);
Json simconfig_to_json(const SimConfig& cfg);

struct Scenario {
  std::optional<PlantModel> plant;      // resolved (inline or loaded); empty = open loop
  std::optional<std::string> plant_ref; // path as written in the file, if any
  ControllerConfig controller;
  Wiring wiring = Wiring::PlantInput;
  std::vector<InputSignal> input;
  SimConfig sim;
  std::string trajectory_csv;  // empty = do not write
  std::string report_json;     // empty = do not write
};

// base_dir resolves a relative plant reference.
Scenario scenario_from_json(const Json& j, const std::string& base_dir);
Scenario load_scenario(const std::string& path);
Json scenario_to_json(const Scenario& s);

Json report_to_json(const SimReport& report);
Json verdict_to_json(const NiVerdict& verdict);
Json synthesized_to_json(const SynthesizedController& result);

// Canonical text form: two-space indent, sorted keys, trailing newline.
std::string canonical_text(const Json& j);
Json parse_json_text(const std::string& text);  // throws MalformedJson
Json load_json(const std::string& path);        // throws FileError / MalformedJson
void save_json(const Json& j, const std::string& path);

// Header t,x1..,xh1..,e1..,u1..,mode1..,V[,W]; W only when monitored.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
void save_trajectory_csv(const Trajectory& traj, const std::string& path);

// Header omega_rad_s,amplitude,re,im,mag_db,phase_deg.
void write_describing_csv(std::ostream& os, const std::vector<DescribingPoint>& points);
void save_describing_csv(const std::vector<DescribingPoint>& points, const std::string& path);

}  // namespace nihigs
