#include "nihigs/analysis.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace nihigs;

namespace {

Trajectory curve(double t_end, double dt, const std::function<double(double)>& f) {
  Trajectory traj;
  const Eigen::Index rows = static_cast<Eigen::Index>(std::llround(t_end / dt)) + 1;
  traj.times = Vec::LinSpaced(rows, 0.0, t_end);
  traj.e = Mat(rows, 1);
  for (Eigen::Index i = 0; i < rows; ++i) traj.e(i, 0) = f(traj.times(i));
  return traj;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("well below the integrator corner the element acts as a pure gain") {
  HigsParams p(1.0, 1.0);
  DescribingRun run = describing_function_run(p, 1.0, 0.02);
  CHECK(std::abs(run.point.complex_gain) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::abs(run.point.phase_deg) < 0.5);
  // Short integrator arcs near each zero crossing are part of the element:
  // the stay-in-gain condition fails where |e| < (omega / omega_h) |de/dt|,
  // so the window sees at most four brief switch pairs per cycle.
  CHECK(run.measure_switches <= 40);

  // The pin scales with k_h.
  HigsParams p2(0.7, 1.0);
  DescribingPoint pt = describing_function(p2, 1.0, 0.02 * 1.0 / 0.7);
  CHECK(std::abs(pt.complex_gain) == doctest::Approx(0.7).epsilon(0.01));
}

TEST_CASE("the phase lag saturates near 38 degrees well above the corner") {
  HigsParams p(1.0, 1.0);
  DescribingPoint pt = describing_function(p, 1.0, 100.0);
  CHECK(pt.phase_deg > -40.1);
  CHECK(pt.phase_deg < -36.1);
}

TEST_CASE("the lag never exceeds the saturation value across four decades") {
  HigsParams p(1.0, 1.0);
  std::vector<double> omegas{0.01, 0.1, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0};
  auto points = describing_sweep(p, 1.0, omegas);
  REQUIRE(points.size() == omegas.size());
  double prev_mag = 1e300;
  for (const auto& pt : points) {
    CHECK(pt.phase_deg <= 0.1);
    CHECK(pt.phase_deg >= -40.1);
    CHECK(std::abs(pt.complex_gain) <= prev_mag * (1.0 + 1e-6));
    prev_mag = std::abs(pt.complex_gain);
  }
}

TEST_CASE("the integrator-dominant magnitude rolls off at 20 dB per decade") {
  HigsParams p(1.0, 1.0);
  DescribingPoint lo = describing_function(p, 1.0, 100.0);
  DescribingPoint hi = describing_function(p, 1.0, 1000.0);
  CHECK(lo.magnitude_db - hi.magnitude_db == doctest::Approx(20.0).epsilon(0.05));
}

TEST_CASE("estimates are stable under step refinement") {
  HigsParams p(1.0, 1.0);
  DescribingPoint coarse = describing_function(p, 1.0, 10.0, 10, 10, 2000);
  DescribingPoint fine = describing_function(p, 1.0, 10.0, 10, 10, 4000);
  CHECK(std::abs(coarse.magnitude_db - fine.magnitude_db) < 0.1);
  CHECK(std::abs(coarse.phase_deg - fine.phase_deg) < 0.1);
}

TEST_CASE("the describing function is amplitude invariant") {
  // The element is positively homogeneous, so the first-harmonic gain
  // cannot depend on the drive level.
  HigsParams p(1.3, 2.0);
  DescribingPoint small = describing_function(p, 0.5, 5.0);
  DescribingPoint large = describing_function(p, 2.0, 5.0);
  CHECK(std::abs(small.complex_gain - large.complex_gain) < 1e-6);
}

TEST_CASE("switching shows up only above the corner") {
  HigsParams p(1.0, 1.0);
  DescribingRun fast = describing_function_run(p, 1.0, 100.0);
  CHECK_FALSE(fast.gain_mode_throughout);
  CHECK(fast.measure_switches > 0);
}

TEST_CASE("step metrics of a flat trace are all zero") {
  Trajectory traj = curve(1.0, 0.01, [](double) { return 0.5; });
  StepMetrics m = step_metrics(traj, 0, 0.5);
  CHECK(m.overshoot == doctest::Approx(0.0));
  CHECK(m.settling_time_s == doctest::Approx(0.0));
  CHECK(m.steady_state_error == doctest::Approx(0.0));
  CHECK(m.settled);
}

TEST_CASE("monotone decay to a zero reference has no overshoot") {
  Trajectory traj = curve(10.0, 0.01, [](double t) { return std::exp(-t); });
  StepMetrics m = step_metrics(traj, 0, 0.0);
  CHECK(m.overshoot == doctest::Approx(0.0));
  // 2% of the peak deviation is crossed at t = ln(50).
  CHECK(m.settling_time_s == doctest::Approx(std::log(50.0)).epsilon(0.01));
  CHECK(m.settled);
  CHECK(m.steady_state_error == doctest::Approx(std::exp(-10.0)).epsilon(1e-6));
}

TEST_CASE("a damped oscillation reports its first overshoot") {
  Trajectory traj =
      curve(12.0, 0.001, [](double t) { return 1.0 - std::exp(-0.5 * t) * std::cos(2.0 * t); });
  StepMetrics m = step_metrics(traj, 0, 1.0);
  // Peak of exp(-t/2) cos(2t) past the reference, at tan(2t) = -1/4.
  CHECK(m.overshoot == doctest::Approx(0.47035).epsilon(5e-3));
  CHECK(m.settled);
  CHECK(m.settling_time_s > 0.0);
}

TEST_CASE("an unsettled trace is flagged") {
  Trajectory traj = curve(1.0, 0.01, [](double t) { return std::sin(20.0 * t); });
  StepMetrics m = step_metrics(traj, 0, 0.0);
  CHECK_FALSE(m.settled);
  CHECK(m.settling_time_s == doctest::Approx(1.0));
}

}  // TEST_SUITE
