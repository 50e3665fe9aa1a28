// Positive-feedback interconnection of a linear plant with a HIGS controller,
// fixed-step hybrid simulation with event-localized mode switches, and the
// composite Lyapunov monitors for the three controller topologies.
#pragma once

#include "nihigs/higs.hpp"
#include "nihigs/plant.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nihigs {

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZenoGuard : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonFinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PreconditionDefiniteness : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Where the external signal r enters the loop.  Feedback is positive in both
// cases.  PlantInput: u = r + u_ctrl and e = y (regulation / input
// disturbance).  ControllerInput: u = u_ctrl and e = r + y.
enum class Wiring { PlantInput, ControllerInput };

enum class SignalKind { Zero, Step, PulseTrain, Sine };

// One channel of the external signal r.  Step switches on at t = 0 and is
// treated as right-continuous; PulseTrain is high on [k/f, (k+duty)/f).
struct InputSignal {
  SignalKind kind = SignalKind::Zero;
  double amplitude = 0.0;
  double frequency_hz = 1.0;  // pulse and sine only
  double duty = 0.5;          // pulse only, in (0,1)

  static InputSignal zero() { return {}; }
  static InputSignal step(double amplitude);
  static InputSignal pulse_train(double amplitude, double frequency_hz, double duty);
  static InputSignal sine(double amplitude, double frequency_hz);

  void validate() const;  // throws std::invalid_argument
  double value(double t) const;
  double value_left(double t) const;  // left limit, differs only at jumps
  double derivative(double t) const;  // between jumps; analytic for Sine
  // Jump instants in (t0, t1].
  std::vector<double> jumps_between(double t0, double t1) const;
};

struct SimConfig {
  double t_end = 1.0;
  double dt = 1e-6;
  double eps_switch = 1e-9;      // event bisection resolution in seconds
  double max_switch_rate = 1e6;  // switches per second over a sliding 1 s window
  std::optional<Mat> monitor_Y;  // certificate for the Lyapunov monitor
  bool monitor_lyapunov = true;  // when no Y is given, search for one
  double convergence_rel = 1e-3;
  Vec x0;   // initial plant state; empty means zero
  Vec xh0;  // initial controller state; empty means zero

  void validate() const;  // throws std::invalid_argument
};

struct SwitchEvent {
  double time = 0.0;
  int channel = 0;  // element index: 0 for single, 0..N-1 for multi, 0/1 for cascade stages
  HigsMode from = HigsMode::Integrator;
  HigsMode to = HigsMode::Integrator;
  std::string cause;  // "sector", "f2" or "input_jump"
};

// Row-per-sample record of a run.  x has one column per plant state (none
// when the plant is bypassed), x_h one per controller state, e and u one per
// loop channel, modes one per controller element.  W is empty when the
// Lyapunov monitor is off or no certificate was available.
struct Trajectory {
  Vec times;
  Mat x;
  Mat x_h;
  Mat e;
  Mat u;
  Eigen::MatrixXi modes;
  Vec V;
  Vec W;
  std::vector<SwitchEvent> switches;
  Vec dissipation;  // per-interval residuals, size times.size() - 1
};

// Overshoot and settling of one output channel against the reference's final
// value.  The settling band is 2% of |r_final|, or 2% of the peak deviation
// when r_final = 0.  Overshoot is the peak excursion past r_final on the far
// side of the initial deviation, relative to |r_final| (absolute when
// r_final = 0), so a monotone decay to zero scores 0.
struct StepMetrics {
  double overshoot = 0.0;
  double settling_time_s = 0.0;
  double steady_state_error = 0.0;
  bool settled = false;
};

struct SimReport {
  bool converged = false;
  double final_state_norm = 0.0;
  double max_W_increase = 0.0;
  std::size_t switch_count = 0;
  double dissipation_max_residual = 0.0;
  std::optional<std::vector<StepMetrics>> step_metrics;
  double max_V = 0.0;
  double max_W = 0.0;
  std::string monitor;  // "supplied", "found" or "storage_only"
};

class ClosedLoop {
 public:
  ClosedLoop(std::optional<PlantModel> plant, ControllerConfig ctrl, Wiring wiring);

  const std::optional<PlantModel>& plant() const { return plant_; }
  const ControllerConfig& controller() const { return ctrl_; }
  Wiring wiring() const { return wiring_; }

  Eigen::Index plant_states() const { return plant_ ? plant_->states() : 0; }
  Eigen::Index controller_states() const { return ctrl_.states(); }
  Eigen::Index channels() const { return ctrl_.channels(); }
  Eigen::Index elements() const { return ctrl_.kind == ControllerKind::Cascade ? 2 : channels(); }

 private:
  std::optional<PlantModel> plant_;
  ControllerConfig ctrl_;
  Wiring wiring_;
};

// Couple a plant and a controller; single and cascade require a SISO plant,
// multi requires one channel per plant output.  Throws DimensionMismatch.
ClosedLoop assemble(const PlantModel& plant, const ControllerConfig& ctrl, Wiring wiring);

// Controller alone: the loop input r becomes the controller input e directly.
ClosedLoop assemble_open_loop(const ControllerConfig& ctrl);

// Fixed-step 4th-order integration with modes frozen within a step.  After
// each step, sector-boundary crossings (Integrator channels) and loss of the
// F2 condition (Gain channels) are localized by bisection to eps_switch;
// Gain-mode channels are projected onto x_h = k_h e at every accepted sample;
// input jumps chop the step and trigger re-classification with the one-sided
// derivative.  Throws ZenoGuard, OutsideSector, NonFinite.
std::pair<Trajectory, SimReport> simulate(const ClosedLoop& loop,
                                          const std::vector<InputSignal>& input,
                                          const SimConfig& cfg);
// Broadcasts one signal description to every channel.
std::pair<Trajectory, SimReport> simulate(const ClosedLoop& loop, const InputSignal& input,
                                          const SimConfig& cfg);

// Plant alone under the same signal machinery (no controller, u = r).
Trajectory simulate_linear(const PlantModel& plant, const std::vector<InputSignal>& input,
                           const SimConfig& cfg);

// Composite Lyapunov value at one joint state.  Requires Y positive definite
// and the topology's coupling condition: k_h G(0) < 1 for single,
// K_h^{-1} - C Y C^T positive definite for multi, and the scalar bound
// (k2 - 2 a k1)/(k1 k2^2) > C Y C^T for the cascade.  Throws
// PreconditionDefiniteness when violated.
double lyapunov_value(const ClosedLoop& loop, const Mat& Y, const Vec& x, const Vec& x_h);

// Aggregate monitors over a finished trajectory: convergence of the final
// joint state, the largest sample-to-sample W increase, the largest per-step
// dissipation residual, and per-channel step metrics against reference_final.
SimReport monitor_report(const Trajectory& traj, const Vec& reference_final,
                         double convergence_rel = 1e-3);

std::vector<StepMetrics> step_metrics_from(const Trajectory& traj, const Vec& reference_final);

}  // namespace nihigs
