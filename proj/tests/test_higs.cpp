#include "nihigs/higs.hpp"

#include <doctest.h>

#include <random>

#include "nihigs/closedloop.hpp"

using namespace nihigs;

TEST_SUITE("higs") {

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(HigsParams(0.0, 1.0), ParameterViolation);
  CHECK_THROWS_AS(HigsParams(-2.0, 1.0), ParameterViolation);
  CHECK_THROWS_AS(HigsParams(1.0, -0.5), ParameterViolation);
  CHECK_NOTHROW(HigsParams(1.0, 0.0));  // omega_h may be zero
}

TEST_CASE("sector_residual signs") {
  HigsParams p(1.0, 1.0);
  CHECK(sector_residual(p, 1.0, 1.0) == doctest::Approx(0.0));
  CHECK(sector_residual(p, 1.0, 0.5) == doctest::Approx(0.25));
  CHECK(sector_residual(p, 1.0, -0.1) == doctest::Approx(-0.11));
}

TEST_CASE("classify_mode follows the set definitions") {
  HigsParams p(1.0, 1.0);
  CHECK(classify_mode(p, 1.0, 0.5, 0.0) == HigsMode::Integrator);  // interior
  CHECK(classify_mode(p, 1.0, 1.0, -1.0) == HigsMode::Gain);       // boundary, leaving
  CHECK(classify_mode(p, 1.0, 1.0, 2.0) == HigsMode::Integrator);  // boundary, re-entering
  CHECK(classify_mode(p, 0.0, 0.0, 5.0) == HigsMode::Integrator);  // origin tie-break
  CHECK_THROWS_AS(classify_mode(p, 1.0, -0.1, 0.0), OutsideSector);
}

TEST_CASE("higs_rate in both modes") {
  HigsParams p(0.5, 2.0);
  CHECK(higs_rate(p, HigsMode::Integrator, 3.0, 99.0) == doctest::Approx(6.0));
  CHECK(higs_rate(p, HigsMode::Gain, 99.0, 4.0) == doctest::Approx(2.0));
  CHECK(higs_rate(p, HigsMode::Integrator, 0.0, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("storage_single values") {
  CHECK(storage_single(HigsParams(1.0, 1.0), 2.0) == doctest::Approx(2.0));
  CHECK(storage_single(HigsParams(3.0, 1.0), 0.0) == doctest::Approx(0.0));
  CHECK(storage_single(HigsParams(4.0, 1.0), 2.0) == doctest::Approx(0.5));
}

TEST_CASE("storage_multi sums the channel storages") {
  MultiHigs m;
  m.elements.push_back({HigsParams(1.0, 1.0), 2.0, HigsMode::Integrator});
  m.elements.push_back({HigsParams(2.0, 1.0), 2.0, HigsMode::Integrator});
  CHECK(storage_multi(m) == doctest::Approx(3.0));
  CHECK(storage_multi(m) ==
        storage_single(m.elements[0].params, 2.0) + storage_single(m.elements[1].params, 2.0));
  m.elements[0].x_h = 0.0;
  m.elements[1].x_h = 0.0;
  CHECK(storage_multi(m) == doctest::Approx(0.0));
}

TEST_CASE("cascade construction enforces the parameter ranges") {
  HigsParams first(1.0, 1.0), second(2.0, 2.0);
  CHECK_NOTHROW(CascadeHigs(first, second, 0.5));
  // a = k2/(2 k1) sits on the open boundary.
  CHECK_THROWS_AS(CascadeHigs(first, second, 1.0), ParameterViolation);
  CHECK_THROWS_AS(CascadeHigs(first, second, 0.0), ParameterViolation);
  // k2 w1 > k1 w2 breaks the rate ordering.
  CHECK_THROWS_AS(CascadeHigs(HigsParams(1.0, 3.0), second, 0.5), ParameterViolation);
}

TEST_CASE("storage_cascade value and positivity") {
  CascadeHigs c(HigsParams(1.0, 1.0), HigsParams(2.0, 2.0), 0.5);
  c.first.x_h = 1.0;
  c.second.x_h = 2.0;
  CHECK(storage_cascade(c) == doctest::Approx(1.0));
  c.first.x_h = 0.0;
  c.second.x_h = 0.0;
  CHECK(storage_cascade(c) == doctest::Approx(0.0));
  CHECK(storage_cascade(HigsParams(1.0, 1.0), HigsParams(2.0, 2.0), 0.5, -1.0, 0.5) > 0.0);
}

TEST_CASE("sector inequality and its equality branch") {
  // e x_h <= k_h e^2 throughout the sector, tight only on the boundary.
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> span(-5.0, 5.0);
  HigsParams p(1.7, 1.0);
  for (int i = 0; i < 10000; ++i) {
    double e = span(rng);
    double s = unit(rng);
    double xh = s * p.k_h * e;
    REQUIRE(sector_residual(p, e, xh) >= -1e-12 * (1.0 + xh * xh));
    double gap = e * xh - p.k_h * e * e;
    double scale = 1.0 + p.k_h * e * e;
    CHECK(gap <= 1e-12 * scale);
    if (gap > -1e-9 * scale) {
      // Near equality forces the boundary branch (or a vanishing input).
      CHECK((std::abs(xh - p.k_h * e) <= 2e-9 * (1.0 + std::abs(p.k_h * e)) ||
             std::abs(e) <= 2e-5));
    }
  }
}

TEST_CASE("dissipation_residual is zero for a quiescent step") {
  HigsParams p(1.0, 1.0);
  std::vector<double> zeros{0.0, 0.0, 0.0};
  CHECK(dissipation_residual(p, 0.0, 0.0, zeros, zeros) == doctest::Approx(0.0));
}

TEST_CASE("dissipation_residual vanishes along a gain-mode arc") {
  HigsParams p(2.5, 3.0);
  std::vector<double> e, u;
  for (int i = 0; i <= 8; ++i) {
    double ei = 0.5 + 0.01 * i;
    e.push_back(ei);
    u.push_back(p.k_h * ei);
  }
  double res = dissipation_residual(p, u.front(), u.back(), e, u);
  CHECK(std::abs(res) <= 1e-14);
}

TEST_CASE("dissipation_residual matches the integrator-phase closed form") {
  // Constant e = 1 from x_h = 0: Delta V = t^2/2 while the supplied work is t.
  HigsParams p(1.0, 1.0);
  const double t = 0.5;
  std::vector<double> e, u;
  for (int i = 0; i <= 50; ++i) {
    e.push_back(1.0);
    u.push_back(t * i / 50.0);
  }
  double res = dissipation_residual(p, 0.0, t, e, u);
  CHECK(res == doctest::Approx(t * t / 2.0 - t).epsilon(1e-9));
  CHECK(res < 0.0);
}

TEST_CASE("multi dissipation sums the channels") {
  std::vector<HigsParams> params{HigsParams(1.0, 1.0), HigsParams(2.0, 5.0)};
  const int samples = 6;
  Mat e(samples, 2), u(samples, 2);
  for (int i = 0; i < samples; ++i) {
    double s = i / double(samples - 1);
    e(i, 0) = 1.0;
    u(i, 0) = 0.3 * s;  // integrating channel
    e(i, 1) = 0.2 + 0.1 * s;
    u(i, 1) = params[1].k_h * e(i, 1);  // gain channel
  }
  Vec before(2), after(2);
  before << u(0, 0), u(0, 1);
  after << u(samples - 1, 0), u(samples - 1, 1);
  double joint = dissipation_residual(params, before, after, e, u);
  std::vector<double> e0, u0, e1, u1;
  for (int i = 0; i < samples; ++i) {
    e0.push_back(e(i, 0));
    u0.push_back(u(i, 0));
    e1.push_back(e(i, 1));
    u1.push_back(u(i, 1));
  }
  double sum = dissipation_residual(params[0], before(0), after(0), e0, u0) +
               dissipation_residual(params[1], before(1), after(1), e1, u1);
  CHECK(joint == doctest::Approx(sum).epsilon(1e-13));
}

TEST_CASE("cascade dissipation uses the first input against the second state") {
  HigsParams first(1.0, 1.0), second(2.0, 2.0);
  const double a = 0.5;
  Eigen::Vector2d before(0.0, 0.0), after(0.1, 0.05);
  std::vector<double> e1{1.0, 1.0, 1.0}, x2{0.0, 0.025, 0.05};
  double res = dissipation_residual(first, second, a, before, after, e1, x2);
  double dV = storage_cascade(first, second, a, after(0), after(1)) -
              storage_cascade(first, second, a, before(0), before(1));
  CHECK(res == doctest::Approx(dV - 0.05).epsilon(1e-12));
}

TEST_CASE("gain-pinned run keeps the tie at every boundary sample") {
  // Slow sine through one element: the sector residual collapses to zero and
  // the pointwise tie x_h = k_h e must hold at each such sample.
  ControllerConfig ctrl;
  ctrl.kind = ControllerKind::Single;
  ctrl.k_h = {1.3};
  ctrl.omega_h = {40.0};
  ClosedLoop loop = assemble_open_loop(ctrl);
  SimConfig cfg;
  cfg.t_end = 4.0;
  cfg.dt = 1e-4;
  cfg.eps_switch = 1e-7;
  cfg.monitor_lyapunov = false;
  auto [traj, report] = simulate(loop, InputSignal::sine(1.0, 0.25), cfg);
  HigsParams p(ctrl.k_h[0], ctrl.omega_h[0]);
  int boundary_samples = 0;
  for (Eigen::Index i = 0; i < traj.times.size(); ++i) {
    double e = traj.e(i, 0);
    double xh = traj.x_h(i, 0);
    double tol = sector_tolerance(p, e);
    REQUIRE(sector_residual(p, e, xh) >= -tol);
    if (std::abs(sector_residual(p, e, xh)) <= tol) {
      ++boundary_samples;
      // The residual factors as -(x_h / k)(x_h - k e), so a small residual
      // pins one of the two factors.  Away from crossings of e the tie is
      // tight; near e = 0 only the product bound carries over.
      double gap = std::min(std::abs(xh - p.k_h * e), std::abs(xh));
      if (std::abs(e) > 0.1) {
        CHECK(gap <= 20.0 * tol);
      } else {
        CHECK(gap <= std::sqrt(10.0 * p.k_h * tol));
      }
    }
  }
  CHECK(boundary_samples > 100);
}

TEST_CASE("multi run with vanishing residual pins every channel") {
  // Two slow channels pinned to the boundary: whenever a step dissipates
  // nothing, each channel must sit on its own tie.
  ControllerConfig ctrl;
  ctrl.kind = ControllerKind::Multi;
  ctrl.k_h = {1.0, 0.7};
  ctrl.omega_h = {50.0, 60.0};
  ClosedLoop loop = assemble_open_loop(ctrl);
  SimConfig cfg;
  cfg.t_end = 4.0;
  cfg.dt = 1e-4;
  cfg.eps_switch = 1e-7;
  cfg.monitor_lyapunov = false;
  std::vector<InputSignal> input{InputSignal::sine(1.0, 0.25), InputSignal::sine(0.8, 0.25)};
  auto [traj, report] = simulate(loop, input, cfg);
  int tied_steps = 0;
  for (Eigen::Index i = 1; i < traj.times.size(); ++i) {
    if (std::abs(traj.dissipation(i - 1)) > 1e-12) continue;
    bool informative = std::abs(traj.e(i, 0)) > 0.1 && std::abs(traj.e(i, 1)) > 0.1;
    if (!informative) continue;
    ++tied_steps;
    for (int ch = 0; ch < 2; ++ch) {
      HigsParams p(ctrl.k_h[ch], ctrl.omega_h[ch]);
      CHECK(std::abs(traj.x_h(i, ch) - p.k_h * traj.e(i, ch)) <=
            1e-6 * (1.0 + std::abs(p.k_h * traj.e(i, ch))));
    }
  }
  CHECK(tied_steps > 50);
}

TEST_CASE("controller config validation") {
  ControllerConfig c;
  c.kind = ControllerKind::Single;
  c.k_h = {1.0};
  c.omega_h = {1.0};
  CHECK_NOTHROW(c.validate());
  CHECK(c.channels() == 1);
  CHECK(c.states() == 1);

  c.k_h = {1.0, 2.0};
  CHECK_THROWS_AS(c.validate(), ParameterViolation);

  ControllerConfig m;
  m.kind = ControllerKind::Multi;
  m.k_h = {0.5, 0.6};
  m.omega_h = {1.0};
  CHECK_THROWS_AS(m.validate(), ParameterViolation);
  m.omega_h = {1.0, 2.0};
  CHECK_NOTHROW(m.validate());
  CHECK(m.channels() == 2);

  ControllerConfig cas;
  cas.kind = ControllerKind::Cascade;
  cas.k_h = {1.0, 2.0};
  cas.omega_h = {1.0, 2.0};
  cas.a = 0.5;
  CHECK_NOTHROW(cas.validate());
  CHECK(cas.channels() == 1);
  CHECK(cas.states() == 2);
  cas.a = 1.0;
  CHECK_THROWS_AS(cas.validate(), ParameterViolation);
  cas.a = 0.5;
  cas.omega_h = {3.0, 2.0};  // k2 w1 > k1 w2
  CHECK_THROWS_AS(cas.validate(), ParameterViolation);
}

}  // TEST_SUITE
