#include "nihigs/closedloop.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace nihigs {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Pulse edges: rise at k*T, fall at (k+duty)*T.  All comparisons against
// edge instants reuse these exact expressions so that value(), value_left()
// and jumps_between() agree bit-for-bit about which side of an edge t is on.
double rise_time(long long k, double period) { return static_cast<double>(k) * period; }
double fall_time(long long k, double period, double duty) {
  return (static_cast<double>(k) + duty) * period;
}

// Number of pulse edges at or before t (strictly before when !inclusive).
long long edges_up_to(double t, double period, double duty, bool inclusive) {
  if (t < 0.0) return 0;
  const long long k = static_cast<long long>(std::floor(t / period));
  long long count = 0;
  for (long long i = std::max<long long>(0, k - 1); i <= k + 1; ++i) {
    const double r = rise_time(i, period);
    const double f = fall_time(i, period, duty);
    if (inclusive ? r <= t : r < t) ++count;
    if (inclusive ? f <= t : f < t) ++count;
  }
  if (k >= 2) count += 2 * (k - 1);  // pairs 0 .. k-2 lie entirely before t
  return count;
}

}  // namespace

InputSignal InputSignal::step(double amplitude) {
  InputSignal s;
  s.kind = SignalKind::Step;
  s.amplitude = amplitude;
  s.validate();
  return s;
}

InputSignal InputSignal::pulse_train(double amplitude, double frequency_hz, double duty) {
  InputSignal s;
  s.kind = SignalKind::PulseTrain;
  s.amplitude = amplitude;
  s.frequency_hz = frequency_hz;
  s.duty = duty;
  s.validate();
  return s;
}

InputSignal InputSignal::sine(double amplitude, double frequency_hz) {
  InputSignal s;
  s.kind = SignalKind::Sine;
  s.amplitude = amplitude;
  s.frequency_hz = frequency_hz;
  s.validate();
  return s;
}

void InputSignal::validate() const {
  if (!std::isfinite(amplitude)) throw std::invalid_argument("InputSignal: amplitude not finite");
  if (kind == SignalKind::PulseTrain || kind == SignalKind::Sine) {
    if (!(frequency_hz > 0.0) || !std::isfinite(frequency_hz)) {
      throw std::invalid_argument("InputSignal: periodic kinds need frequency > 0");
    }
  }
  if (kind == SignalKind::PulseTrain && !(duty > 0.0 && duty < 1.0)) {
    throw std::invalid_argument("InputSignal: duty must lie in (0,1)");
  }
}

double InputSignal::value(double t) const {
  switch (kind) {
    case SignalKind::Zero:
      return 0.0;
    case SignalKind::Step:
      return t >= 0.0 ? amplitude : 0.0;
    case SignalKind::PulseTrain: {
      const double period = 1.0 / frequency_hz;
      return edges_up_to(t, period, duty, true) % 2 != 0 ? amplitude : 0.0;
    }
    case SignalKind::Sine:
      return amplitude * std::sin(2.0 * kPi * frequency_hz * t);
  }
  return 0.0;
}

double InputSignal::value_left(double t) const {
  switch (kind) {
    case SignalKind::Zero:
      return 0.0;
    case SignalKind::Step:
      return t > 0.0 ? amplitude : 0.0;
    case SignalKind::PulseTrain: {
      const double period = 1.0 / frequency_hz;
      return edges_up_to(t, period, duty, false) % 2 != 0 ? amplitude : 0.0;
    }
    case SignalKind::Sine:
      return amplitude * std::sin(2.0 * kPi * frequency_hz * t);
  }
  return 0.0;
}

double InputSignal::derivative(double t) const {
  if (kind == SignalKind::Sine) {
    const double w = 2.0 * kPi * frequency_hz;
    return amplitude * w * std::cos(w * t);
  }
  return 0.0;
}

std::vector<double> InputSignal::jumps_between(double t0, double t1) const {
  std::vector<double> out;
  if (kind == SignalKind::PulseTrain) {
    const double period = 1.0 / frequency_hz;
    const long long k0 = static_cast<long long>(std::floor(t0 / period)) - 1;
    const long long k1 = static_cast<long long>(std::floor(t1 / period)) + 1;
    for (long long k = std::max<long long>(0, k0); k <= k1; ++k) {
      for (double tj : {rise_time(k, period), fall_time(k, period, duty)}) {
        if (tj > t0 && tj <= t1) out.push_back(tj);
      }
    }
  }
  // Step jumps only at t = 0, which the simulator handles as the initial
  // classification instant, never as an interior jump.
  return out;
}

void SimConfig::validate() const {
  if (!(dt > 0.0) || !(t_end > dt)) throw std::invalid_argument("SimConfig: need 0 < dt < t_end");
  if (!(eps_switch > 0.0) || !(eps_switch < dt)) {
    throw std::invalid_argument("SimConfig: need 0 < eps_switch < dt");
  }
  if (!(max_switch_rate > 0.0)) throw std::invalid_argument("SimConfig: max_switch_rate must be > 0");
  if (!(convergence_rel > 0.0)) throw std::invalid_argument("SimConfig: convergence_rel must be > 0");
}

ClosedLoop::ClosedLoop(std::optional<PlantModel> plant, ControllerConfig ctrl, Wiring wiring)
    : plant_(std::move(plant)), ctrl_(std::move(ctrl)), wiring_(wiring) {
  if (ctrl_.kind == ControllerKind::Cascade && ctrl_.a <= 0.0 && ctrl_.k_h.size() == 2) {
    ctrl_.a = ctrl_.k_h[1] / (4.0 * ctrl_.k_h[0]);
  }
  ctrl_.validate();
  if (plant_) {
    const Eigen::Index p = plant_->channels();
    if (ctrl_.kind == ControllerKind::Multi) {
      if (ctrl_.channels() != p) {
        std::ostringstream msg;
        msg << "assemble: multi controller has " << ctrl_.channels() << " channels, plant has "
            << p;
        throw DimensionMismatch(msg.str());
      }
    } else if (p != 1) {
      throw DimensionMismatch("assemble: single and cascade controllers require a SISO plant");
    }
  }
}

ClosedLoop assemble(const PlantModel& plant, const ControllerConfig& ctrl, Wiring wiring) {
  return ClosedLoop(plant, ctrl, wiring);
}

ClosedLoop assemble_open_loop(const ControllerConfig& ctrl) {
  return ClosedLoop(std::nullopt, ctrl, Wiring::ControllerInput);
}

namespace {

struct EventFlags {
  bool any = false;
  std::vector<char> sector_hit;
  std::vector<char> f2_exit;
};

struct Engine {
  const ClosedLoop& loop;
  const std::vector<InputSignal>& sig;
  const SimConfig& cfg;

  const PlantModel* plant = nullptr;
  Eigen::Index np = 0, nh = 0, nc = 0, ne = 0;
  std::vector<HigsParams> params;
  bool cascade = false;

  // When integrating toward a jump instant, signal values at exactly that
  // instant are taken from the left so the whole step sees pre-jump data.
  double cap_time = std::numeric_limits<double>::infinity();
  bool cap_left = false;

  Engine(const ClosedLoop& l, const std::vector<InputSignal>& s, const SimConfig& c)
      : loop(l), sig(s), cfg(c) {
    plant = loop.plant() ? &*loop.plant() : nullptr;
    np = loop.plant_states();
    nh = loop.controller_states();
    nc = loop.channels();
    ne = loop.elements();
    cascade = loop.controller().kind == ControllerKind::Cascade;
    const auto& cc = loop.controller();
    for (std::size_t i = 0; i < cc.k_h.size(); ++i) {
      params.emplace_back(cc.k_h[i], cc.omega_h[i]);
    }
  }

  Vec r_at(double t) const {
    Vec r(nc);
    for (Eigen::Index i = 0; i < nc; ++i) {
      const auto& s = sig[static_cast<std::size_t>(i)];
      r[i] = (cap_left && t >= cap_time) ? s.value_left(cap_time) : s.value(t);
    }
    return r;
  }

  Vec rdot_at(double t) const {
    Vec rd(nc);
    for (Eigen::Index i = 0; i < nc; ++i) rd[i] = sig[static_cast<std::size_t>(i)].derivative(t);
    return rd;
  }

  // Everything the hybrid right-hand side produces at one instant, with the
  // Gain-mode algebraic tie substituted for the affected states.
  struct Eval {
    Vec dxp, dxh;
    Vec e, u;            // channel inputs e and plant inputs u (controller output when no plant)
    Vec elem_e, elem_ed; // per-element input and its derivative
    Vec xh_eff;          // states with Gain channels replaced by k_h * e
  };

  Eval eval(double t, const Vec& xp, const Vec& xh, const std::vector<HigsMode>& modes) const {
    Eval ev;
    const Vec r = r_at(t);
    const Vec rd = rdot_at(t);
    Vec y = Vec::Zero(nc);
    if (plant) y = plant->C() * xp;
    if (plant) {
      ev.e = loop.wiring() == Wiring::PlantInput ? y : Vec(r + y);
    } else {
      ev.e = r;
    }
    ev.xh_eff = xh;
    if (!cascade) {
      for (Eigen::Index i = 0; i < ne; ++i) {
        if (modes[static_cast<std::size_t>(i)] == HigsMode::Gain) {
          ev.xh_eff[i] = params[static_cast<std::size_t>(i)].k_h * ev.e[i];
        }
      }
    } else {
      if (modes[0] == HigsMode::Gain) ev.xh_eff[0] = params[0].k_h * ev.e[0];
      if (modes[1] == HigsMode::Gain) ev.xh_eff[1] = params[1].k_h * ev.xh_eff[0];
    }
    const Vec u_ctrl = cascade ? Vec::Constant(1, ev.xh_eff[1]) : Vec(ev.xh_eff);
    Vec u_plant = u_ctrl;
    if (plant && loop.wiring() == Wiring::PlantInput) u_plant = r + u_ctrl;
    ev.u = plant ? u_plant : u_ctrl;
    Vec edot;
    if (plant) {
      ev.dxp = plant->A() * xp + plant->B() * u_plant;
      const Vec ydot = plant->C() * ev.dxp;
      edot = loop.wiring() == Wiring::PlantInput ? ydot : Vec(rd + ydot);
    } else {
      ev.dxp = Vec(0);
      edot = rd;
    }
    ev.dxh = Vec(nh);
    if (!cascade) {
      ev.elem_e = ev.e;
      ev.elem_ed = edot;
      for (Eigen::Index i = 0; i < ne; ++i) {
        const auto& p = params[static_cast<std::size_t>(i)];
        ev.dxh[i] = higs_rate(p, modes[static_cast<std::size_t>(i)], ev.e[i], edot[i]);
      }
    } else {
      const double dx1 = higs_rate(params[0], modes[0], ev.e[0], edot[0]);
      const double dx2 = higs_rate(params[1], modes[1], ev.xh_eff[0], dx1);
      ev.dxh[0] = dx1;
      ev.dxh[1] = dx2;
      ev.elem_e = Vec(2);
      ev.elem_ed = Vec(2);
      ev.elem_e << ev.e[0], ev.xh_eff[0];
      ev.elem_ed << edot[0], dx1;
    }
    return ev;
  }

  void rk4(double t, double h, const Vec& xp, const Vec& xh, const std::vector<HigsMode>& modes,
           Vec& xp1, Vec& xh1) const {
    const Eval k1 = eval(t, xp, xh, modes);
    const Eval k2 = eval(t + 0.5 * h, xp + 0.5 * h * k1.dxp, xh + 0.5 * h * k1.dxh, modes);
    const Eval k3 = eval(t + 0.5 * h, xp + 0.5 * h * k2.dxp, xh + 0.5 * h * k2.dxh, modes);
    const Eval k4 = eval(t + h, xp + h * k3.dxp, xh + h * k3.dxh, modes);
    xp1 = xp + (h / 6.0) * (k1.dxp + 2.0 * k2.dxp + 2.0 * k3.dxp + k4.dxp);
    xh1 = xh + (h / 6.0) * (k1.dxh + 2.0 * k2.dxh + 2.0 * k3.dxh + k4.dxh);
  }

  EventFlags scan(double t, const Vec& xp, const Vec& xh,
                  const std::vector<HigsMode>& modes) const {
    const Eval ev = eval(t, xp, xh, modes);
    EventFlags f;
    f.sector_hit.assign(static_cast<std::size_t>(ne), 0);
    f.f2_exit.assign(static_cast<std::size_t>(ne), 0);
    for (Eigen::Index i = 0; i < ne; ++i) {
      const auto& p = params[static_cast<std::size_t>(i)];
      const double e = ev.elem_e[i];
      if (modes[static_cast<std::size_t>(i)] == HigsMode::Integrator) {
        if (sector_residual(p, e, xh[i]) < -sector_tolerance(p, e)) {
          f.sector_hit[static_cast<std::size_t>(i)] = 1;
          f.any = true;
        }
      } else {
        const double g = p.omega_h * e * e - p.k_h * e * ev.elem_ed[i];
        if (g <= 0.0) {
          f.f2_exit[static_cast<std::size_t>(i)] = 1;
          f.any = true;
        }
      }
    }
    return f;
  }

  // Snap Gain-mode states onto x_h = k_h e at an accepted sample.
  void project(double t, const Vec& xp, Vec& xh, const std::vector<HigsMode>& modes) const {
    const Eval ev = eval(t, xp, xh, modes);
    for (Eigen::Index i = 0; i < nh; ++i) {
      if (modes[static_cast<std::size_t>(i)] == HigsMode::Gain) xh[i] = ev.xh_eff[i];
    }
  }
};

void check_finite(double t, const Vec& xp, const Vec& xh) {
  if (!xp.allFinite() || !xh.allFinite()) {
    std::ostringstream msg;
    msg << "simulate: non-finite state at t = " << t;
    throw NonFinite(msg.str());
  }
}

double controller_storage(const ClosedLoop& loop, const std::vector<HigsParams>& params,
                          const Vec& xh) {
  if (loop.controller().kind == ControllerKind::Cascade) {
    return storage_cascade(params[0], params[1], loop.controller().a, xh[0], xh[1]);
  }
  double v = 0.0;
  for (Eigen::Index i = 0; i < xh.size(); ++i) {
    v += storage_single(params[static_cast<std::size_t>(i)], xh[i]);
  }
  return v;
}

// Cached evaluator for the composite Lyapunov function; preconditions are
// checked once at construction.
struct LyapEval {
  Mat Yinv;
  Mat C;
  std::vector<double> k;
  ControllerKind kind;
  double a = 0.0;

  LyapEval(const ClosedLoop& loop, const Mat& Y) {
    if (!loop.plant()) {
      throw std::invalid_argument("lyapunov_value: loop has no plant");
    }
    const PlantModel& plant = *loop.plant();
    if (Y.rows() != plant.states() || Y.cols() != plant.states()) {
      throw PreconditionDefiniteness("lyapunov_value: Y has wrong dimensions");
    }
    if (!is_pos_def(Y)) {
      throw PreconditionDefiniteness("lyapunov_value: Y is not positive definite");
    }
    C = plant.C();
    k = loop.controller().k_h;
    kind = loop.controller().kind;
    a = loop.controller().a;
    const Mat cyc = C * Y * C.transpose();
    if (kind == ControllerKind::Single) {
      const double g0 = dc_gain(plant)(0, 0);
      if (!(k[0] * g0 < 1.0)) {
        std::ostringstream msg;
        msg << "lyapunov_value: k_h G(0) = " << k[0] * g0 << " >= 1";
        throw PreconditionDefiniteness(msg.str());
      }
    } else if (kind == ControllerKind::Multi) {
      Mat gap = -cyc;
      for (std::size_t i = 0; i < k.size(); ++i) {
        gap(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += 1.0 / k[i];
      }
      if (!is_pos_def(0.5 * (gap + gap.transpose()))) {
        throw PreconditionDefiniteness("lyapunov_value: K_h^{-1} - C Y C^T not positive definite");
      }
    } else {
      const double bound = (k[1] - 2.0 * a * k[0]) / (k[0] * k[1] * k[1]);
      if (!(bound > cyc(0, 0))) {
        std::ostringstream msg;
        msg << "lyapunov_value: (k2-2ak1)/(k1 k2^2) = " << bound << " <= C Y C^T = " << cyc(0, 0);
        throw PreconditionDefiniteness(msg.str());
      }
    }
    Yinv = solve_linear(Y, Mat::Identity(Y.rows(), Y.cols()));
    Yinv = 0.5 * (Yinv + Yinv.transpose());
  }

  double value(const Vec& x, const Vec& xh) const {
    double w = 0.5 * x.dot(Yinv * x);
    const Vec cx = C * x;
    if (kind == ControllerKind::Cascade) {
      HigsParams p1(k[0], 0.0), p2(k[1], 0.0);
      w += storage_cascade(p1, p2, a, xh[0], xh[1]) - cx[0] * xh[1];
    } else {
      for (Eigen::Index i = 0; i < xh.size(); ++i) {
        w += xh[i] * xh[i] / (2.0 * k[static_cast<std::size_t>(i)]);
      }
      w -= xh.dot(cx);
    }
    return w;
  }
};

struct Target {
  double t;
  bool jump = false;
  bool row = false;
};

std::vector<Target> build_targets(const std::vector<InputSignal>& sig, const SimConfig& cfg) {
  std::vector<Target> targets;
  const auto rows = static_cast<long long>(std::floor(cfg.t_end / cfg.dt + 1e-9));
  for (long long kk = 1; kk <= rows; ++kk) {
    targets.push_back({static_cast<double>(kk) * cfg.dt, false, true});
  }
  if (targets.empty() || cfg.t_end - targets.back().t > 1e-9 * cfg.dt) {
    targets.push_back({cfg.t_end, false, true});
  }
  for (const auto& s : sig) {
    for (double tj : s.jumps_between(0.0, cfg.t_end)) targets.push_back({tj, true, false});
  }
  std::sort(targets.begin(), targets.end(),
            [](const Target& a, const Target& b) { return a.t < b.t; });
  std::vector<Target> merged;
  for (const auto& tgt : targets) {
    if (!merged.empty() && tgt.t - merged.back().t <= 1e-12 * std::max(1.0, tgt.t)) {
      merged.back().jump = merged.back().jump || tgt.jump;
      merged.back().row = merged.back().row || tgt.row;
    } else {
      merged.push_back(tgt);
    }
  }
  return merged;
}

}  // namespace

std::pair<Trajectory, SimReport> simulate(const ClosedLoop& loop, const InputSignal& input,
                                          const SimConfig& cfg) {
  return simulate(loop, std::vector<InputSignal>(static_cast<std::size_t>(loop.channels()), input),
                  cfg);
}

std::pair<Trajectory, SimReport> simulate(const ClosedLoop& loop,
                                          const std::vector<InputSignal>& input,
                                          const SimConfig& cfg) {
  cfg.validate();
  for (const auto& s : input) s.validate();
  if (static_cast<Eigen::Index>(input.size()) != loop.channels()) {
    std::ostringstream msg;
    msg << "simulate: " << input.size() << " input channels for a " << loop.channels()
        << "-channel loop";
    throw DimensionMismatch(msg.str());
  }

  Engine eng(loop, input, cfg);
  const Eigen::Index np = eng.np, nh = eng.nh, nc = eng.nc, ne = eng.ne;

  Vec xp = cfg.x0.size() ? cfg.x0 : Vec::Zero(np);
  Vec xh = cfg.xh0.size() ? cfg.xh0 : Vec::Zero(nh);
  if (xp.size() != np || xh.size() != nh) {
    throw DimensionMismatch("simulate: initial state dimensions do not match the loop");
  }

  // Lyapunov monitor setup: use the supplied certificate, else search for
  // one, else fall back to storage-only monitoring.
  std::optional<LyapEval> lyap;
  std::string monitor = "storage_only";
  if (cfg.monitor_lyapunov && loop.plant()) {
    if (cfg.monitor_Y) {
      lyap.emplace(loop, *cfg.monitor_Y);
      monitor = "supplied";
    } else {
      const CertificateSearch search = find_ni_certificate(*loop.plant());
      if (search.status == CertificateStatus::Found) {
        lyap.emplace(loop, search.certificate->Y);
        monitor = "found";
      }
    }
  }

  const std::vector<Target> targets = build_targets(input, cfg);
  std::size_t n_rows = 1;
  for (const auto& tgt : targets) n_rows += tgt.row ? 1 : 0;

  Trajectory traj;
  traj.times = Vec::Zero(static_cast<Eigen::Index>(n_rows));
  traj.x = Mat::Zero(static_cast<Eigen::Index>(n_rows), np);
  traj.x_h = Mat::Zero(static_cast<Eigen::Index>(n_rows), nh);
  traj.e = Mat::Zero(static_cast<Eigen::Index>(n_rows), nc);
  traj.u = Mat::Zero(static_cast<Eigen::Index>(n_rows), nc);
  traj.modes = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(n_rows), ne);
  traj.V = Vec::Zero(static_cast<Eigen::Index>(n_rows));
  if (lyap) traj.W = Vec::Zero(static_cast<Eigen::Index>(n_rows));
  traj.dissipation = Vec::Zero(static_cast<Eigen::Index>(n_rows) - 1);

  std::vector<HigsMode> modes(static_cast<std::size_t>(ne), HigsMode::Integrator);

  // Initial classification at t = 0 with the right-sided signal value.
  {
    const Engine::Eval ev0 = eng.eval(0.0, xp, xh, modes);
    for (Eigen::Index i = 0; i < ne; ++i) {
      const auto& p = eng.params[static_cast<std::size_t>(i)];
      modes[static_cast<std::size_t>(i)] = classify_mode(p, ev0.elem_e[i], xh[i], ev0.elem_ed[i]);
    }
    eng.project(0.0, xp, xh, modes);
  }

  std::deque<double> zeno_window;
  const auto zeno_push = [&](double t) {
    zeno_window.push_back(t);
    while (!zeno_window.empty() && zeno_window.front() < t - 1.0) zeno_window.pop_front();
    if (static_cast<double>(zeno_window.size()) > cfg.max_switch_rate) {
      std::ostringstream msg;
      msg << "simulate: over " << cfg.max_switch_rate << " switches within 1 s at t = " << t;
      throw ZenoGuard(msg.str());
    }
  };

  // Quadrature samples for the per-interval dissipation residual.
  std::vector<Vec> quad_e, quad_xh;
  const auto push_quad = [&](double t, const Vec& xpv, const Vec& xhv) {
    const Engine::Eval ev = eng.eval(t, xpv, xhv, modes);
    quad_e.push_back(ev.e);
    quad_xh.push_back(xhv);
  };

  const auto interval_residual = [&]() -> double {
    const auto rows = static_cast<Eigen::Index>(quad_e.size());
    if (rows < 2) return 0.0;
    if (loop.controller().kind == ControllerKind::Cascade) {
      std::vector<double> e1(static_cast<std::size_t>(rows)), x2(static_cast<std::size_t>(rows));
      for (Eigen::Index i = 0; i < rows; ++i) {
        e1[static_cast<std::size_t>(i)] = quad_e[static_cast<std::size_t>(i)][0];
        x2[static_cast<std::size_t>(i)] = quad_xh[static_cast<std::size_t>(i)][1];
      }
      return dissipation_residual(eng.params[0], eng.params[1], loop.controller().a,
                                  Eigen::Vector2d(quad_xh.front()), Eigen::Vector2d(quad_xh.back()),
                                  e1, x2);
    }
    if (loop.controller().kind == ControllerKind::Multi) {
      Mat E(rows, nc), U(rows, nc);
      for (Eigen::Index i = 0; i < rows; ++i) {
        E.row(i) = quad_e[static_cast<std::size_t>(i)].transpose();
        U.row(i) = quad_xh[static_cast<std::size_t>(i)].transpose();
      }
      return dissipation_residual(eng.params, quad_xh.front(), quad_xh.back(), E, U);
    }
    std::vector<double> e1(static_cast<std::size_t>(rows)), u1(static_cast<std::size_t>(rows));
    for (Eigen::Index i = 0; i < rows; ++i) {
      e1[static_cast<std::size_t>(i)] = quad_e[static_cast<std::size_t>(i)][0];
      u1[static_cast<std::size_t>(i)] = quad_xh[static_cast<std::size_t>(i)][0];
    }
    return dissipation_residual(eng.params[0], quad_xh.front()[0], quad_xh.back()[0], e1, u1);
  };

  Eigen::Index row = 0;
  const auto emit_row = [&](double t) {
    const Engine::Eval ev = eng.eval(t, xp, xh, modes);
    traj.times[row] = t;
    if (np) traj.x.row(row) = xp.transpose();
    if (nh) traj.x_h.row(row) = xh.transpose();
    traj.e.row(row) = ev.e.transpose();
    traj.u.row(row) = ev.u.transpose();
    for (Eigen::Index i = 0; i < ne; ++i) {
      traj.modes(row, i) = modes[static_cast<std::size_t>(i)] == HigsMode::Gain ? 1 : 0;
    }
    traj.V[row] = controller_storage(loop, eng.params, xh);
    if (lyap) traj.W[row] = lyap->value(xp, xh);
    if (row > 0) traj.dissipation[row - 1] = interval_residual();
    quad_e.clear();
    quad_xh.clear();
    push_quad(t, xp, xh);
    ++row;
  };

  emit_row(0.0);

  double t = 0.0;
  for (const auto& tgt : targets) {
    eng.cap_time = tgt.t;
    eng.cap_left = tgt.jump;
    // Advance to the target, localizing mode switches on the way.
    while (t < tgt.t) {
      const double h = tgt.t - t;
      Vec xp1, xh1;
      eng.rk4(t, h, xp, xh, modes, xp1, xh1);
      check_finite(t + h, xp1, xh1);
      if (!eng.scan(t + h, xp1, xh1, modes).any) {
        t = tgt.t;
        xp = xp1;
        xh = xh1;
        break;
      }
      double lo = 0.0, hi = h;
      while (hi - lo > cfg.eps_switch) {
        const double mid = 0.5 * (lo + hi);
        Vec xpm, xhm;
        eng.rk4(t, mid, xp, xh, modes, xpm, xhm);
        if (eng.scan(t + mid, xpm, xhm, modes).any) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      hi = std::max(hi, std::min(cfg.eps_switch, h));
      Vec xpe, xhe;
      eng.rk4(t, hi, xp, xh, modes, xpe, xhe);
      check_finite(t + hi, xpe, xhe);
      t += hi;
      xp = xpe;
      xh = xhe;
      push_quad(t, xp, xh);
      const EventFlags fired = eng.scan(t, xp, xh, modes);
      const Engine::Eval ev = eng.eval(t, xp, xh, modes);
      for (Eigen::Index i = 0; i < ne; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const auto& p = eng.params[idx];
        if (modes[idx] == HigsMode::Integrator && fired.sector_hit[idx]) {
          const double e = ev.elem_e[i];
          if (p.omega_h * e * e > p.k_h * e * ev.elem_ed[i]) {
            modes[idx] = HigsMode::Gain;
            traj.switches.push_back({t, static_cast<int>(i), HigsMode::Integrator, HigsMode::Gain,
                                     "sector"});
            zeno_push(t);
          } else {
            // Grazing contact without the F2 condition: pull the state back
            // onto the nearest sector edge and keep integrating.
            const double kx = p.k_h * e;
            xh[i] = std::clamp(xh[i], std::min(0.0, kx), std::max(0.0, kx));
            zeno_push(t);
          }
        } else if (modes[idx] == HigsMode::Gain && fired.f2_exit[idx]) {
          modes[idx] = HigsMode::Integrator;
          traj.switches.push_back({t, static_cast<int>(i), HigsMode::Gain, HigsMode::Integrator,
                                   "f2"});
          zeno_push(t);
        }
      }
    }
    eng.project(t, xp, xh, modes);

    if (tgt.jump) {
      push_quad(t, xp, xh);  // pre-jump quadrature sample
      eng.cap_left = false;  // switch to post-jump signal values
      // Two passes: classify with derivatives from the old modes, then
      // refine with derivatives from the tentative modes.
      std::vector<HigsMode> before = modes;
      for (int pass = 0; pass < 2; ++pass) {
        const Engine::Eval evj = eng.eval(t, xp, xh, modes);
        for (Eigen::Index i = 0; i < ne; ++i) {
          const auto idx = static_cast<std::size_t>(i);
          const auto& p = eng.params[idx];
          const double e = evj.elem_e[i];
          if (sector_residual(p, e, xh[i]) < -sector_tolerance(p, e)) {
            const double kx = p.k_h * e;
            xh[i] = std::clamp(xh[i], std::min(0.0, kx), std::max(0.0, kx));
          }
          modes[idx] = classify_mode(p, e, xh[i], evj.elem_ed[i]);
        }
      }
      eng.project(t, xp, xh, modes);
      for (Eigen::Index i = 0; i < ne; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        if (modes[idx] != before[idx]) {
          traj.switches.push_back({t, static_cast<int>(i), before[idx], modes[idx], "input_jump"});
          zeno_push(t);
        }
      }
    }
    if (tgt.row) emit_row(t);
    else push_quad(t, xp, xh);
  }

  traj.times.conservativeResize(row);
  traj.x.conservativeResize(row, np);
  traj.x_h.conservativeResize(row, nh);
  traj.e.conservativeResize(row, nc);
  traj.u.conservativeResize(row, nc);
  traj.modes.conservativeResize(row, ne);
  traj.V.conservativeResize(row);
  if (lyap) traj.W.conservativeResize(row);
  traj.dissipation.conservativeResize(row > 0 ? row - 1 : 0);

  Vec ref_final(nc);
  for (Eigen::Index i = 0; i < nc; ++i) {
    ref_final[i] = input[static_cast<std::size_t>(i)].value_left(cfg.t_end);
  }
  SimReport report = monitor_report(traj, ref_final, cfg.convergence_rel);
  report.monitor = monitor;
  return {std::move(traj), std::move(report)};
}

Trajectory simulate_linear(const PlantModel& plant, const std::vector<InputSignal>& input,
                           const SimConfig& cfg) {
  cfg.validate();
  for (const auto& s : input) s.validate();
  if (static_cast<Eigen::Index>(input.size()) != plant.channels()) {
    throw DimensionMismatch("simulate_linear: input channel count does not match the plant");
  }
  ControllerConfig dummy;
  dummy.kind = ControllerKind::Single;
  dummy.k_h = {1.0};
  dummy.omega_h = {0.0};
  // Reuse the signal plumbing; integrate xdot = A x + B r directly.
  const std::vector<Target> targets = build_targets(input, cfg);
  std::size_t n_rows = 1;
  for (const auto& tgt : targets) n_rows += tgt.row ? 1 : 0;

  const Eigen::Index np = plant.states();
  const Eigen::Index nc = plant.channels();
  Trajectory traj;
  traj.times = Vec::Zero(static_cast<Eigen::Index>(n_rows));
  traj.x = Mat::Zero(static_cast<Eigen::Index>(n_rows), np);
  traj.e = Mat::Zero(static_cast<Eigen::Index>(n_rows), nc);
  traj.u = Mat::Zero(static_cast<Eigen::Index>(n_rows), nc);
  traj.V = Vec::Zero(static_cast<Eigen::Index>(n_rows));
  traj.x_h = Mat::Zero(static_cast<Eigen::Index>(n_rows), 0);
  traj.modes = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(n_rows), 0);
  traj.dissipation = Vec::Zero(static_cast<Eigen::Index>(n_rows) - 1);

  Vec xp = cfg.x0.size() ? cfg.x0 : Vec::Zero(np);
  if (xp.size() != np) throw DimensionMismatch("simulate_linear: bad initial state size");

  double cap_time = std::numeric_limits<double>::infinity();
  bool cap_left = false;
  const auto r_at = [&](double tt) {
    Vec r(nc);
    for (Eigen::Index i = 0; i < nc; ++i) {
      const auto& s = input[static_cast<std::size_t>(i)];
      r[i] = (cap_left && tt >= cap_time) ? s.value_left(cap_time) : s.value(tt);
    }
    return r;
  };
  const auto deriv = [&](double tt, const Vec& x) -> Vec {
    return plant.A() * x + plant.B() * r_at(tt);
  };

  Eigen::Index row = 0;
  const auto emit_row = [&](double tt) {
    traj.times[row] = tt;
    traj.x.row(row) = xp.transpose();
    traj.e.row(row) = (plant.C() * xp).transpose();
    traj.u.row(row) = r_at(tt).transpose();
    ++row;
  };
  emit_row(0.0);

  double t = 0.0;
  for (const auto& tgt : targets) {
    cap_time = tgt.t;
    cap_left = tgt.jump;
    const double h = tgt.t - t;
    if (h > 0.0) {
      const Vec k1 = deriv(t, xp);
      const Vec k2 = deriv(t + 0.5 * h, xp + 0.5 * h * k1);
      const Vec k3 = deriv(t + 0.5 * h, xp + 0.5 * h * k2);
      const Vec k4 = deriv(t + h, xp + h * k3);
      xp += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!xp.allFinite()) throw NonFinite("simulate_linear: non-finite state");
    }
    t = tgt.t;
    cap_left = false;
    if (tgt.row) emit_row(t);
  }
  traj.times.conservativeResize(row);
  traj.x.conservativeResize(row, np);
  traj.e.conservativeResize(row, nc);
  traj.u.conservativeResize(row, nc);
  traj.V.conservativeResize(row);
  traj.dissipation.conservativeResize(row > 0 ? row - 1 : 0);
  return traj;
}

double lyapunov_value(const ClosedLoop& loop, const Mat& Y, const Vec& x, const Vec& x_h) {
  LyapEval lv(loop, Y);
  if (x.size() != loop.plant_states() || x_h.size() != loop.controller_states()) {
    throw DimensionMismatch("lyapunov_value: state dimensions do not match the loop");
  }
  return lv.value(x, x_h);
}

std::vector<StepMetrics> step_metrics_from(const Trajectory& traj, const Vec& reference_final) {
  std::vector<StepMetrics> out;
  const Eigen::Index rows = traj.times.size();
  for (Eigen::Index c = 0; c < traj.e.cols(); ++c) {
    StepMetrics m;
    const double ref = c < reference_final.size() ? reference_final[c] : 0.0;
    m.steady_state_error = std::abs(traj.e(rows - 1, c) - ref);
    double peak_dev = 0.0;
    double approach_side = 0.0;  // sign of the first nonzero deviation
    double past_ref = 0.0;       // largest excursion beyond ref, opposite that side
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double dev = traj.e(i, c) - ref;
      peak_dev = std::max(peak_dev, std::abs(dev));
      if (approach_side == 0.0 && dev != 0.0) approach_side = dev > 0.0 ? 1.0 : -1.0;
      if (approach_side != 0.0) past_ref = std::max(past_ref, -dev * approach_side);
    }
    const double band_ref = std::abs(ref) > 0.0 ? std::abs(ref) : peak_dev;
    if (band_ref == 0.0) {
      m.settled = true;
      out.push_back(m);
      continue;
    }
    const double band = 0.02 * band_ref;
    m.overshoot = ref != 0.0 ? past_ref / std::abs(ref) : past_ref;
    Eigen::Index last_outside = -1;
    for (Eigen::Index i = rows - 1; i >= 0; --i) {
      if (std::abs(traj.e(i, c) - ref) > band) {
        last_outside = i;
        break;
      }
    }
    if (last_outside < 0) {
      m.settled = true;
      m.settling_time_s = 0.0;
    } else if (last_outside + 1 < rows) {
      m.settled = true;
      m.settling_time_s = traj.times[last_outside + 1];
    } else {
      m.settled = false;
      m.settling_time_s = traj.times[rows - 1];
    }
    out.push_back(m);
  }
  return out;
}

SimReport monitor_report(const Trajectory& traj, const Vec& reference_final,
                         double convergence_rel) {
  SimReport rep;
  const Eigen::Index rows = traj.times.size();
  if (rows == 0) return rep;
  rep.switch_count = traj.switches.size();
  double max_joint = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double nx = traj.x.cols() ? traj.x.row(i).norm() : 0.0;
    const double nh = traj.x_h.cols() ? traj.x_h.row(i).norm() : 0.0;
    max_joint = std::max(max_joint, std::hypot(nx, nh));
  }
  {
    const double nx = traj.x.cols() ? traj.x.row(rows - 1).norm() : 0.0;
    const double nh = traj.x_h.cols() ? traj.x_h.row(rows - 1).norm() : 0.0;
    rep.final_state_norm = std::hypot(nx, nh);
  }
  rep.converged = rep.final_state_norm <= convergence_rel * max_joint || max_joint == 0.0;
  if (traj.V.size()) rep.max_V = traj.V.maxCoeff();
  if (traj.W.size()) {
    rep.max_W = traj.W.maxCoeff();
    double inc = 0.0;
    for (Eigen::Index i = 0; i + 1 < traj.W.size(); ++i) {
      inc = std::max(inc, traj.W[i + 1] - traj.W[i]);
    }
    rep.max_W_increase = inc;
  }
  if (traj.dissipation.size()) rep.dissipation_max_residual = traj.dissipation.maxCoeff();
  if (traj.e.cols()) rep.step_metrics = step_metrics_from(traj, reference_final);
  return rep;
}

}  // namespace nihigs
