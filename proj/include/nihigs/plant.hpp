// Linear plant in strictly proper state-space form, its frequency/DC
// responses, and three independent routes for deciding the negative-imaginary
// property: a frequency sweep of j(G - G*), the Hamiltonian spectral test, and
// a direct search for a state-space certificate Y.
#pragma once

#include "nihigs/numerics.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace nihigs {

struct SingularAtFrequency : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyGrid : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PreconditionQ0 : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// x' = Ax + Bu, y = Cx with p == m and no feedthrough.  A must be nonsingular
// (the certificate lemma needs det(A) != 0); checked at construction.
class PlantModel {
 public:
  PlantModel(Mat A, Mat B, Mat C);

  const Mat& A() const { return A_; }
  const Mat& B() const { return B_; }
  const Mat& C() const { return C_; }
  Eigen::Index states() const { return A_.rows(); }
  Eigen::Index channels() const { return B_.cols(); }

 private:
  Mat A_, B_, C_;
};

// Y = Y^T > 0 with AY + YA^T <= 0 and B + AYC^T = 0, up to the recorded
// residuals.
struct NiCertificate {
  Mat Y;
  double residual_eq = 0.0;    // ||B + A Y C^T||
  double residual_lyap = 0.0;  // max eigenvalue of AY + YA^T
};

struct SweepDetail {
  double worst_omega = 0.0;
  double worst_min_eig = 0.0;  // min eig of j(G - G*) at worst_omega
  double tol_at_worst = 0.0;
  std::size_t grid_size = 0;
};

struct AxisCluster {
  double imag = 0.0;  // representative imaginary part of the cluster
  int multiplicity = 0;
};

struct HamiltonianDetail {
  Mat N0;
  Mat Q0;
  std::vector<std::complex<double>> eigenvalues;
  std::vector<AxisCluster> clusters;  // imaginary-axis eigenvalues only
  double axis_tol = 0.0;              // |Re| threshold actually used
};

enum class CertificateStatus { Found, EqualityInfeasible, SearchInconclusive };

struct CertificateSearch {
  CertificateStatus status = CertificateStatus::SearchInconclusive;
  std::optional<NiCertificate> certificate;
  double equality_residual_rel = 0.0;  // relative residual of the particular solution
  double best_phi = 0.0;               // final value of the search objective
  std::string message;
};

enum class NiMethod { Sweep, Hamiltonian, Certificate };

struct NiVerdict {
  NiMethod method = NiMethod::Sweep;
  bool is_ni = false;
  bool conclusive = true;  // false only for an inconclusive certificate search
  std::variant<SweepDetail, HamiltonianDetail, CertificateSearch> detail;
};

// G(0) = -C A^{-1} B.
Mat dc_gain(const PlantModel& plant);

// G(jw) = C (jwI - A)^{-1} B; SingularAtFrequency when jw sits on an
// undamped pole.
CMat freq_response(const PlantModel& plant, double omega);

// Logarithmic grid of `points` frequencies over [0.01 min|eig A|, 100 max|eig A|].
std::vector<double> default_frequency_grid(const PlantModel& plant, std::size_t points = 400);

// is_ni iff min eig of the Hermitian j(G(jw) - G(jw)*) >= -tol_rel*||G(jw)||
// at every grid frequency; detail records the worst offender.
NiVerdict ni_frequency_test(const PlantModel& plant, const std::vector<double>& omega_grid,
                            double tol_rel = 1e-8);

// Spectral test on the Hamiltonian matrix N0 built from Q0 = -(CB + B^T C^T).
// Requires CB + B^T C^T positive definite (PreconditionQ0 otherwise; fall back
// to the sweep).  is_ni iff every imaginary-axis eigenvalue cluster of N0 has
// even cardinality.  Tolerances are relative to ||N0|| because realistic
// plants mix magnitudes across many orders.
NiVerdict ni_hamiltonian_test(const PlantModel& plant, double tol_axis = 1e-7,
                              double tol_cluster = 1e-6);

struct CertificateSearchOptions {
  double equality_tol_rel = 1e-6;
  int subgradient_iters = 2000;
  int polish_rounds = 60;
};

// Solves B + AYC^T = 0 over symmetric Y by least squares, then walks the
// affine solution family to minimize
//   phi(Y) = max(lam_max(AY + YA^T), delta - lam_min(Y)),
// delta = 1e-8*||Y_particular||.  Three-valued outcome: Found (certificate
// with residual bounds), EqualityInfeasible (no NI certificate can exist),
// SearchInconclusive (may still be NI; never claims "not NI").
CertificateSearch find_ni_certificate(const PlantModel& plant,
                                      const CertificateSearchOptions& opts = {});

// Convenience wrapper giving the search a verdict shape: Found -> NI,
// EqualityInfeasible -> not NI, SearchInconclusive -> unknown.
NiVerdict ni_certificate_test(const PlantModel& plant, const CertificateSearchOptions& opts = {});

}  // namespace nihigs
