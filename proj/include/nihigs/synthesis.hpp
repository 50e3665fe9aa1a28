// Gain selection for the three controller topologies from the plant's DC
// gain.  The stability conditions only constrain k_h; omega_h is a
// performance knob, so defaults here are heuristics and are labeled as such
// in the results.
#pragma once

#include "nihigs/higs.hpp"
#include "nihigs/plant.hpp"

#include <optional>
#include <vector>

namespace nihigs {

struct NotSiso : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotSquare : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SynthesisRequest {
  PlantModel plant;
  ControllerKind topology = ControllerKind::Single;
  double margin = 0.5;  // strictly inside (0,1)
  std::optional<std::vector<double>> omega_h_hint;  // per channel, rad/s
  double gain_cap = 100.0;

  void validate() const;  // throws std::invalid_argument
};

// Fallback integrator frequency: half the slowest plant eigenvalue magnitude.
std::vector<double> default_omega_h(const PlantModel& plant, Eigen::Index channels);

// k_h = min(gain_cap, (1 - margin)/G(0)) when G(0) > 0, else gain_cap; the
// returned gain always satisfies k_h G(0) < 1.
double synthesize_single(const SynthesisRequest& req);

struct MultiSynthesis {
  Vec k_diag;             // diagonal of K_h
  double scale = 1.0;     // bisection scalar s with K_h = s * gain_cap * I
  double margin_achieved = 0.0;  // lambda_min(K_h^{-1} - G(0)) / lambda_min(K_h^{-1})
  double asymmetry_rel = 0.0;    // relative asymmetry of the raw G(0)
  bool asymmetry_warning = false;
};

// Bisect s in (0,1] on K_h = s * gain_cap * I until K_h^{-1} - G(0) is
// positive definite with eigen-margin at least margin * lambda_min(K_h^{-1}).
// G(0) is symmetrized first.  Throws NotSquare, Infeasible.
MultiSynthesis synthesize_multi(const SynthesisRequest& req);

struct CascadeSynthesis {
  double k1 = 0.0, k2 = 0.0;
  double omega1 = 0.0, omega2 = 0.0;
  double a = 0.0;
};

// k1 = k2 = min(sqrt(gain_cap), sqrt((1 - margin)/G(0))) for G(0) > 0, the
// rate bound saturated as omega1 = omega2 * k1/k2, a at the interval
// midpoint k2/(4 k1).  Throws NotSiso.
CascadeSynthesis synthesize_cascade(const SynthesisRequest& req);

struct SynthesizedController {
  ControllerConfig config;
  bool omega_h_heuristic = true;  // false when the request carried a hint
  double margin_achieved = 0.0;
  double asymmetry_rel = 0.0;
};

// Topology dispatch producing a ready-to-assemble controller; re-verifies
// the stability predicate on the result.
SynthesizedController synthesize(const SynthesisRequest& req);

}  // namespace nihigs
