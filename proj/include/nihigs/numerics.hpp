// Dense linear-algebra substrate shared by the whole toolkit.  Everything here
// operates on small matrices (states <= ~16, Hamiltonians <= ~32x32), so the
// routines favour robustness and explicit residual checks over speed.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <vector>

namespace nihigs {

using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;

struct SingularMatrix : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConvergenceFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AsymmetricInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every default tolerance used by the numeric predicates lives here, so the
// knobs are discoverable in one place and tests can tighten them explicitly.
struct NumericTolerances {
  double pivot_rel = 1e-12;      // singularity threshold, relative to ||M||
  double solve_residual_rel = 1e-9;   // ||M x - b|| <= this * ||b||
  double eig_residual_rel = 1e-6;     // ||(M - lambda I) v|| <= this * ||M||
  double symmetry_rel = 1e-8;         // ||M - M^T|| <= this * ||M||
  double definiteness = 1e-12;   // default pivot/eigenvalue cutoff
};

inline const NumericTolerances& default_tolerances() {
  static const NumericTolerances tols{};
  return tols;
}

// Solves M x = rhs by LU with full pivoting plus iterative refinement.
// Throws SingularMatrix when a pivot falls below pivot_rel * ||M||, or when
// refinement cannot push the residual under solve_residual_rel * ||rhs||.
Mat solve_linear(const Eigen::Ref<const Mat>& M, const Eigen::Ref<const Mat>& rhs,
                 const NumericTolerances& tols = default_tolerances());

// Complex variant used by the frequency-response path (jwI - A systems).
CMat solve_linear_complex(const Eigen::Ref<const CMat>& M, const Eigen::Ref<const CMat>& rhs,
                          const NumericTolerances& tols = default_tolerances());

// Eigenvalues of a general real square matrix (dimension <= 64).  Each
// returned eigenvalue is residual-checked through its eigenvector; a failed
// QR iteration or a residual above eig_residual_rel * ||M|| throws
// ConvergenceFailure.
std::vector<std::complex<double>> eig_general(
    const Eigen::Ref<const Mat>& M,
    const NumericTolerances& tols = default_tolerances());

// Eigenvalues of a symmetric matrix, ascending.  Input symmetry is the
// caller's responsibility here (the predicates below gate on it).
Vec eig_symmetric(const Eigen::Ref<const Mat>& M);

// True iff the symmetric part of M has all eigenvalues > tol.  M must be
// symmetric within symmetry_rel * ||M|| or AsymmetricInput is thrown;
// a merely semidefinite matrix (eigenvalue == 0) is not definite.
bool is_pos_def(const Eigen::Ref<const Mat>& M, double tol = default_tolerances().definiteness,
                const NumericTolerances& tols = default_tolerances());

// True iff every eigenvalue of the symmetric part is <= +tol.
bool is_neg_semidef(const Eigen::Ref<const Mat>& M, double tol = default_tolerances().definiteness,
                    const NumericTolerances& tols = default_tolerances());

}  // namespace nihigs
