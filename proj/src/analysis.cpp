#include "nihigs/analysis.hpp"

#include <cmath>
#include <sstream>

namespace nihigs {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

DescribingRun describing_function_run(const HigsParams& p, double amplitude, double omega,
                                      int settle_cycles, int measure_cycles,
                                      int steps_per_cycle) {
  if (!(amplitude > 0.0) || !(omega > 0.0)) {
    throw std::invalid_argument("describing_function: amplitude and omega must be > 0");
  }
  if (settle_cycles < 1 || measure_cycles < 1 || steps_per_cycle < 8) {
    throw std::invalid_argument("describing_function: cycle counts out of range");
  }
  const double period = 2.0 * kPi / omega;
  const double freq_hz = 1.0 / period;
  const int total_cycles = settle_cycles + measure_cycles;

  ControllerConfig ctrl;
  ctrl.kind = ControllerKind::Single;
  ctrl.k_h = {p.k_h};
  ctrl.omega_h = {p.omega_h};
  const ClosedLoop loop = assemble_open_loop(ctrl);

  SimConfig cfg;
  cfg.dt = period / static_cast<double>(steps_per_cycle);
  cfg.t_end = static_cast<double>(total_cycles) * period;
  cfg.eps_switch = 1e-3 * cfg.dt;
  cfg.monitor_lyapunov = false;
  auto [traj, report] = simulate(loop, InputSignal::sine(amplitude, freq_hz), cfg);

  const Eigen::Index rows = traj.times.size();
  const Eigen::Index start = static_cast<Eigen::Index>(settle_cycles) * steps_per_cycle;
  const Eigen::Index stop = rows - 1;
  if (start >= stop) throw std::invalid_argument("describing_function: empty measure window");

  // First-harmonic coefficients of u over the measure window by trapezoidal
  // quadrature: u(t) ~ A_s sin(w t) + A_c cos(w t).
  double as = 0.0, ac = 0.0;
  for (Eigen::Index i = start; i < stop; ++i) {
    const double t0 = traj.times[i], t1 = traj.times[i + 1];
    const double u0 = traj.u(i, 0), u1 = traj.u(i + 1, 0);
    const double h = t1 - t0;
    as += 0.5 * h * (u0 * std::sin(omega * t0) + u1 * std::sin(omega * t1));
    ac += 0.5 * h * (u0 * std::cos(omega * t0) + u1 * std::cos(omega * t1));
  }
  const double window = static_cast<double>(measure_cycles) * period;
  as *= 2.0 / window;
  ac *= 2.0 / window;

  DescribingRun run;
  run.point.omega = omega;
  run.point.amplitude = amplitude;
  run.point.complex_gain = std::complex<double>(as, ac) / amplitude;
  run.point.magnitude_db = 20.0 * std::log10(std::abs(run.point.complex_gain));
  run.point.phase_deg = std::arg(run.point.complex_gain) * 180.0 / kPi;
  if (run.point.phase_deg <= -180.0) run.point.phase_deg += 360.0;

  run.switch_count = traj.switches.size();
  const double t_start = traj.times[start];
  for (const auto& sw : traj.switches) {
    if (sw.time >= t_start) ++run.measure_switches;
  }
  run.gain_mode_throughout = true;
  for (Eigen::Index i = start; i <= stop; ++i) {
    if (traj.modes(i, 0) != 1) {
      run.gain_mode_throughout = false;
      break;
    }
  }
  return run;
}

DescribingPoint describing_function(const HigsParams& p, double amplitude, double omega,
                                    int settle_cycles, int measure_cycles, int steps_per_cycle) {
  return describing_function_run(p, amplitude, omega, settle_cycles, measure_cycles,
                                 steps_per_cycle)
      .point;
}

std::vector<DescribingPoint> describing_sweep(const HigsParams& p, double amplitude,
                                              const std::vector<double>& omegas,
                                              int settle_cycles, int measure_cycles,
                                              int steps_per_cycle) {
  std::vector<DescribingPoint> out;
  out.reserve(omegas.size());
  for (double w : omegas) {
    out.push_back(
        describing_function(p, amplitude, w, settle_cycles, measure_cycles, steps_per_cycle));
  }
  return out;
}

StepMetrics step_metrics(const Trajectory& traj, Eigen::Index channel, double reference_final) {
  if (channel < 0 || channel >= traj.e.cols()) {
    throw std::invalid_argument("step_metrics: channel out of range");
  }
  const Vec ref = Vec::Constant(traj.e.cols(), reference_final);
  return step_metrics_from(traj, ref)[static_cast<std::size_t>(channel)];
}

}  // namespace nihigs
