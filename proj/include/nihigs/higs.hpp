// The hybrid integrator-gain element and its two compositions: N parallel
// channels (multi) and a two-stage series connection (cascade).  The types
// here carry parameters and state; the hybrid time-stepping lives in the
// closedloop module.
#pragma once

#include "nihigs/numerics.hpp"

#include <vector>

namespace nihigs {

struct OutsideSector : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParameterViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// k_h is the gain-mode slope, omega_h the integrator frequency in rad/s.
// omega_h = 0 is legal for the element itself; synthesis warns about it
// because at least one channel needs omega_h > 0 for asymptotic stability.
struct HigsParams {
  double k_h = 1.0;
  double omega_h = 1.0;

  HigsParams() = default;
  HigsParams(double k, double omega) : k_h(k), omega_h(omega) {
    if (!(k_h > 0.0)) throw ParameterViolation("HigsParams: k_h must be > 0");
    if (!(omega_h >= 0.0)) throw ParameterViolation("HigsParams: omega_h must be >= 0");
  }
};

enum class HigsMode { Integrator = 0, Gain = 1 };

// One element: the state x_h equals the output u.
struct HigsElement {
  HigsParams params;
  double x_h = 0.0;
  HigsMode mode = HigsMode::Integrator;
};

// Parallel bank; channel i reads plant output i.
struct MultiHigs {
  std::vector<HigsElement> elements;
};

// Two elements in series: the output x1 of the first stage is the input of
// the second, u = x2.  The storage parameter a must sit strictly inside
// (0, k2/(2 k1)) and the rates must satisfy k2 w1 <= k1 w2.
class CascadeHigs {
 public:
  CascadeHigs(HigsParams first, HigsParams second, double a);

  HigsElement first;
  HigsElement second;
  double a() const { return a_; }

 private:
  double a_;
};

// Scale-aware sector tolerance: membership of (e, x_h) in the sector is
// meaningful only relative to the size of k_h*e.
inline double sector_tolerance(const HigsParams& p, double e) {
  return 1e-9 * (1.0 + std::abs(p.k_h * e));
}

// e*x_h - x_h^2/k_h; >= 0 means (e, x_h) lies inside the sector F.
inline double sector_residual(const HigsParams& p, double e, double x_h) {
  return e * x_h - x_h * x_h / p.k_h;
}

// Gain iff on the sector boundary (|x_h - k_h e| <= tol) and the boundary is
// about to be crossed (omega_h e^2 > k_h e edot); Integrator otherwise.
// At e = 0 the strict inequality fails, so the element classifies Integrator.
// Throws OutsideSector when (e, x_h) violates the sector beyond tolerance.
HigsMode classify_mode(const HigsParams& p, double e, double x_h, double e_dot);
HigsMode classify_mode(const HigsParams& p, double e, double x_h, double e_dot, double tol_sector);

// State rate in the given mode: omega_h*e while integrating, k_h*edot while
// the algebraic tie x_h = k_h*e is active.
inline double higs_rate(const HigsParams& p, HigsMode mode, double e, double e_dot) {
  return mode == HigsMode::Gain ? p.k_h * e_dot : p.omega_h * e;
}

inline double storage_single(const HigsParams& p, double x_h) {
  return x_h * x_h / (2.0 * p.k_h);
}

double storage_multi(const MultiHigs& m);

// a*x1^2 + ((k2 - 2 a k1)/(2 k1 k2^2))*x2^2, positive definite on the legal
// parameter range.
double storage_cascade(const CascadeHigs& c);
double storage_cascade(const HigsParams& first, const HigsParams& second, double a, double x1,
                       double x2);

// Delta V minus the trapezoidal quadrature of integral e^T du across the
// supplied samples; the NNI property demands this stay below tolerance.
// Sample rows are consecutive instants of one simulator step (or any short
// interval); u is the element output (x_h per channel; x2 for the cascade,
// paired with e1).
double dissipation_residual(const HigsParams& p, double xh_before, double xh_after,
                            const std::vector<double>& e_samples,
                            const std::vector<double>& u_samples);
double dissipation_residual(const std::vector<HigsParams>& params, const Vec& xh_before,
                            const Vec& xh_after, const Mat& e_samples, const Mat& u_samples);
double dissipation_residual(const HigsParams& first, const HigsParams& second, double a,
                            const Eigen::Vector2d& x_before, const Eigen::Vector2d& x_after,
                            const std::vector<double>& e1_samples,
                            const std::vector<double>& x2_samples);

// Controller description used by synthesis, the simulator, and the JSON
// formats.  k_h/omega_h hold one entry for single, N for multi, and exactly
// two (first, second) for cascade; a is the cascade storage parameter.
enum class ControllerKind { Single, Multi, Cascade };

struct ControllerConfig {
  ControllerKind kind = ControllerKind::Single;
  std::vector<double> k_h;
  std::vector<double> omega_h;
  double a = 0.0;

  // Number of plant channels the controller connects to (1 for single and
  // cascade, N for multi).
  Eigen::Index channels() const;
  // Number of controller states (N for single/multi, 2 for cascade).
  Eigen::Index states() const;
  void validate() const;  // throws ParameterViolation
};

}  // namespace nihigs
