#include "nihigs/higs.hpp"

#include <cmath>
#include <sstream>

namespace nihigs {

CascadeHigs::CascadeHigs(HigsParams first_params, HigsParams second_params, double a)
    : first{first_params}, second{second_params}, a_(a) {
  const double k1 = first.params.k_h;
  const double k2 = second.params.k_h;
  if (!(a > 0.0 && a < k2 / (2.0 * k1))) {
    std::ostringstream msg;
    msg << "CascadeHigs: a = " << a << " outside (0, " << k2 / (2.0 * k1) << ")";
    throw ParameterViolation(msg.str());
  }
  if (k2 * first.params.omega_h > k1 * second.params.omega_h) {
    throw ParameterViolation("CascadeHigs: rate ordering k2*w1 <= k1*w2 violated");
  }
}

HigsMode classify_mode(const HigsParams& p, double e, double x_h, double e_dot) {
  return classify_mode(p, e, x_h, e_dot, sector_tolerance(p, e));
}

HigsMode classify_mode(const HigsParams& p, double e, double x_h, double e_dot,
                       double tol_sector) {
  if (sector_residual(p, e, x_h) < -tol_sector) {
    std::ostringstream msg;
    msg << "classify_mode: (e, x_h) = (" << e << ", " << x_h
        << ") outside sector, residual " << sector_residual(p, e, x_h);
    throw OutsideSector(msg.str());
  }
  const bool on_boundary = std::abs(x_h - p.k_h * e) <= tol_sector;
  const bool leaving = p.omega_h * e * e > p.k_h * e * e_dot;
  return (on_boundary && leaving) ? HigsMode::Gain : HigsMode::Integrator;
}

double storage_multi(const MultiHigs& m) {
  double v = 0.0;
  for (const auto& el : m.elements) v += storage_single(el.params, el.x_h);
  return v;
}

double storage_cascade(const HigsParams& first, const HigsParams& second, double a, double x1,
                       double x2) {
  const double k1 = first.k_h;
  const double k2 = second.k_h;
  if (!(a > 0.0 && a < k2 / (2.0 * k1))) {
    throw ParameterViolation("storage_cascade: a outside (0, k2/(2 k1))");
  }
  return a * x1 * x1 + (k2 - 2.0 * a * k1) / (2.0 * k1 * k2 * k2) * x2 * x2;
}

double storage_cascade(const CascadeHigs& c) {
  return storage_cascade(c.first.params, c.second.params, c.a(), c.first.x_h, c.second.x_h);
}

namespace {

// Trapezoidal quadrature of integral e^T du over consecutive sample rows.
double supplied_work(const Mat& e_samples, const Mat& u_samples) {
  double work = 0.0;
  for (Eigen::Index i = 0; i + 1 < e_samples.rows(); ++i) {
    const auto du = u_samples.row(i + 1) - u_samples.row(i);
    work += 0.5 * (e_samples.row(i) + e_samples.row(i + 1)).dot(du);
  }
  return work;
}

Mat column(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

double dissipation_residual(const HigsParams& p, double xh_before, double xh_after,
                            const std::vector<double>& e_samples,
                            const std::vector<double>& u_samples) {
  const double dv = storage_single(p, xh_after) - storage_single(p, xh_before);
  return dv - supplied_work(column(e_samples), column(u_samples));
}

double dissipation_residual(const std::vector<HigsParams>& params, const Vec& xh_before,
                            const Vec& xh_after, const Mat& e_samples, const Mat& u_samples) {
  const auto n = static_cast<Eigen::Index>(params.size());
  if (xh_before.size() != n || xh_after.size() != n || e_samples.cols() != n ||
      u_samples.cols() != n) {
    throw std::invalid_argument("dissipation_residual: channel count mismatch");
  }
  double dv = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = params[static_cast<std::size_t>(i)];
    dv += storage_single(p, xh_after[i]) - storage_single(p, xh_before[i]);
  }
  return dv - supplied_work(e_samples, u_samples);
}

double dissipation_residual(const HigsParams& first, const HigsParams& second, double a,
                            const Eigen::Vector2d& x_before, const Eigen::Vector2d& x_after,
                            const std::vector<double>& e1_samples,
                            const std::vector<double>& x2_samples) {
  const double dv = storage_cascade(first, second, a, x_after[0], x_after[1]) -
                    storage_cascade(first, second, a, x_before[0], x_before[1]);
  return dv - supplied_work(column(e1_samples), column(x2_samples));
}

Eigen::Index ControllerConfig::channels() const {
  return kind == ControllerKind::Multi ? static_cast<Eigen::Index>(k_h.size()) : 1;
}

Eigen::Index ControllerConfig::states() const {
  return kind == ControllerKind::Cascade ? 2 : static_cast<Eigen::Index>(k_h.size());
}

void ControllerConfig::validate() const {
  if (k_h.empty() || k_h.size() != omega_h.size()) {
    throw ParameterViolation("ControllerConfig: k_h and omega_h must be equal-length, non-empty");
  }
  if (kind == ControllerKind::Single && k_h.size() != 1) {
    throw ParameterViolation("ControllerConfig: single controller takes exactly one channel");
  }
  if (kind == ControllerKind::Cascade && k_h.size() != 2) {
    throw ParameterViolation("ControllerConfig: cascade takes exactly two stages");
  }
  for (std::size_t i = 0; i < k_h.size(); ++i) {
    HigsParams check(k_h[i], omega_h[i]);  // throws on bad entries
    (void)check;
  }
  if (kind == ControllerKind::Cascade) {
    CascadeHigs check(HigsParams(k_h[0], omega_h[0]), HigsParams(k_h[1], omega_h[1]),
                      a > 0.0 ? a : k_h[1] / (4.0 * k_h[0]));
    (void)check;
  }
}

}  // namespace nihigs
