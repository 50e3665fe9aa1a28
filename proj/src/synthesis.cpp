#include "nihigs/synthesis.hpp"

#include <cmath>
#include <sstream>

namespace nihigs {

void SynthesisRequest::validate() const {
  if (!(margin > 0.0 && margin < 1.0)) {
    throw std::invalid_argument("SynthesisRequest: margin must lie strictly inside (0,1)");
  }
  if (!(gain_cap > 0.0) || !std::isfinite(gain_cap)) {
    throw std::invalid_argument("SynthesisRequest: gain_cap must be finite and > 0");
  }
}

std::vector<double> default_omega_h(const PlantModel& plant, Eigen::Index channels) {
  double slowest = std::numeric_limits<double>::infinity();
  for (const auto& lam : eig_general(plant.A())) slowest = std::min(slowest, std::abs(lam));
  return std::vector<double>(static_cast<std::size_t>(channels), 0.5 * slowest);
}

double synthesize_single(const SynthesisRequest& req) {
  req.validate();
  if (req.plant.channels() != 1) throw NotSiso("synthesize_single: plant is not SISO");
  const double g0 = dc_gain(req.plant)(0, 0);
  const double k = g0 > 0.0 ? std::min(req.gain_cap, (1.0 - req.margin) / g0) : req.gain_cap;
  if (!(k > 0.0 && k * g0 < 1.0)) {
    std::ostringstream msg;
    msg << "synthesize_single: re-verification failed, k_h G(0) = " << k * g0;
    throw Infeasible(msg.str());
  }
  return k;
}

MultiSynthesis synthesize_multi(const SynthesisRequest& req) {
  req.validate();
  const Eigen::Index p = req.plant.channels();
  const Mat g0 = dc_gain(req.plant);
  MultiSynthesis out;
  const double scale = std::max(g0.norm(), 1e-300);
  out.asymmetry_rel = (g0 - g0.transpose()).norm() / scale;
  out.asymmetry_warning = out.asymmetry_rel > 1e-6;
  const Mat g0s = 0.5 * (g0 + g0.transpose());

  const auto passes = [&](double s) {
    const Mat gap = Mat::Identity(p, p) / (s * req.gain_cap) - g0s;
    const Vec eigs = eig_symmetric(gap);
    return eigs.minCoeff() >= req.margin / (s * req.gain_cap);
  };

  double s = 1.0;
  if (!passes(1.0)) {
    const double s_min = 1e-12;
    if (!passes(s_min)) {
      const Vec eigs = eig_symmetric(g0s);
      std::ostringstream msg;
      msg << "synthesize_multi: infeasible under gain_cap " << req.gain_cap
          << "; largest G(0) eigenvalue " << eigs.maxCoeff();
      throw Infeasible(msg.str());
    }
    double lo = s_min, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (passes(mid) ? lo : hi) = mid;
    }
    s = lo;
  }
  out.scale = s;
  out.k_diag = Vec::Constant(p, s * req.gain_cap);
  const Mat gap = Mat::Identity(p, p) / (s * req.gain_cap) - g0s;
  out.margin_achieved = eig_symmetric(gap).minCoeff() * s * req.gain_cap;
  if (!is_pos_def(0.5 * (gap + gap.transpose()))) {
    throw Infeasible("synthesize_multi: re-verification failed");
  }
  return out;
}

CascadeSynthesis synthesize_cascade(const SynthesisRequest& req) {
  req.validate();
  if (req.plant.channels() != 1) throw NotSiso("synthesize_cascade: plant is not SISO");
  const double g0 = dc_gain(req.plant)(0, 0);
  const double cap_root = std::sqrt(req.gain_cap);
  CascadeSynthesis out;
  out.k1 = out.k2 =
      g0 > 0.0 ? std::min(cap_root, std::sqrt((1.0 - req.margin) / g0)) : cap_root;
  if (req.omega_h_hint && req.omega_h_hint->size() >= 2) {
    out.omega2 = (*req.omega_h_hint)[1];
  } else {
    out.omega2 = default_omega_h(req.plant, 1)[0];
  }
  out.omega1 = out.omega2 * out.k1 / out.k2;
  out.a = out.k2 / (4.0 * out.k1);
  const bool rate_ok = out.k2 * out.omega1 <= out.k1 * out.omega2 * (1.0 + 1e-12);
  const bool a_ok = out.a > 0.0 && out.a < out.k2 / (2.0 * out.k1);
  const bool dc_ok = g0 <= 0.0 || out.k1 * out.k2 * g0 < 1.0;
  if (!rate_ok || !a_ok || !dc_ok) {
    throw Infeasible("synthesize_cascade: re-verification failed");
  }
  return out;
}

SynthesizedController synthesize(const SynthesisRequest& req) {
  SynthesizedController out;
  out.omega_h_heuristic = !req.omega_h_hint.has_value();
  auto omega_for = [&](Eigen::Index channels) {
    if (req.omega_h_hint) {
      if (req.omega_h_hint->size() != static_cast<std::size_t>(channels)) {
        throw std::invalid_argument("synthesize: omega_h_hint has the wrong channel count");
      }
      return *req.omega_h_hint;
    }
    return default_omega_h(req.plant, channels);
  };
  switch (req.topology) {
    case ControllerKind::Single: {
      const double k = synthesize_single(req);
      out.config.kind = ControllerKind::Single;
      out.config.k_h = {k};
      out.config.omega_h = omega_for(1);
      const double g0 = dc_gain(req.plant)(0, 0);
      out.margin_achieved = 1.0 - k * g0;
      break;
    }
    case ControllerKind::Multi: {
      const MultiSynthesis ms = synthesize_multi(req);
      out.config.kind = ControllerKind::Multi;
      out.config.k_h.assign(ms.k_diag.data(), ms.k_diag.data() + ms.k_diag.size());
      out.config.omega_h = omega_for(ms.k_diag.size());
      out.margin_achieved = ms.margin_achieved;
      out.asymmetry_rel = ms.asymmetry_rel;
      break;
    }
    case ControllerKind::Cascade: {
      const CascadeSynthesis cs = synthesize_cascade(req);
      out.config.kind = ControllerKind::Cascade;
      out.config.k_h = {cs.k1, cs.k2};
      out.config.omega_h = {cs.omega1, cs.omega2};
      out.config.a = cs.a;
      const double g0 = dc_gain(req.plant)(0, 0);
      out.margin_achieved = g0 > 0.0 ? 1.0 - cs.k1 * cs.k2 * g0 : 1.0;
      break;
    }
  }
  out.config.validate();
  return out;
}

}  // namespace nihigs
