// Describing-function estimation of a single HIGS element by time-domain
// simulation and first-harmonic quadrature, plus step-response metrics.
#pragma once

#include "nihigs/closedloop.hpp"

#include <complex>
#include <vector>

namespace nihigs {

struct DescribingPoint {
  double omega = 0.0;      // rad/s
  double amplitude = 0.0;  // input sine amplitude
  std::complex<double> complex_gain;
  double magnitude_db = 0.0;
  double phase_deg = 0.0;  // in (-180, 180]
};

struct DescribingRun {
  DescribingPoint point;
  std::size_t switch_count = 0;        // whole run
  std::size_t measure_switches = 0;    // within the measured window
  bool gain_mode_throughout = false;   // measured window entirely in Gain mode
};

// Drive the element with e(t) = amplitude sin(omega t), discard settle
// cycles, and project the output onto sin/cos over the measure cycles.
DescribingRun describing_function_run(const HigsParams& p, double amplitude, double omega,
                                      int settle_cycles = 10, int measure_cycles = 10,
                                      int steps_per_cycle = 2000);
DescribingPoint describing_function(const HigsParams& p, double amplitude, double omega,
                                    int settle_cycles = 10, int measure_cycles = 10,
                                    int steps_per_cycle = 2000);

std::vector<DescribingPoint> describing_sweep(const HigsParams& p, double amplitude,
                                              const std::vector<double>& omegas,
                                              int settle_cycles = 10, int measure_cycles = 10,
                                              int steps_per_cycle = 2000);

// Metrics for one trajectory channel against a scalar reference value; see
// StepMetrics for the band and overshoot conventions.
StepMetrics step_metrics(const Trajectory& traj, Eigen::Index channel, double reference_final);

}  // namespace nihigs
