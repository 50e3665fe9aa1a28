#include "nihigs/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>

namespace nihigs {

namespace {

void require_square(Eigen::Index rows, Eigen::Index cols, const char* who) {
  if (rows != cols) {
    std::ostringstream os;
    os << who << ": matrix must be square, got " << rows << "x" << cols;
    throw std::invalid_argument(os.str());
  }
}

template <typename MatT>
MatT solve_lu(const MatT& M, const MatT& rhs, const NumericTolerances& tols, const char* who) {
  require_square(M.rows(), M.cols(), who);
  if (rhs.rows() != M.rows()) {
    throw std::invalid_argument(std::string(who) + ": rhs row count does not match matrix");
  }
  const double m_norm = M.norm();
  Eigen::FullPivLU<MatT> lu(M);
  const auto& U = lu.matrixLU();
  double min_pivot = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < U.rows(); ++k) {
    min_pivot = std::min(min_pivot, std::abs(U(k, k)));
  }
  if (!(min_pivot > tols.pivot_rel * m_norm)) {
    std::ostringstream os;
    os << who << ": pivot " << min_pivot << " below " << tols.pivot_rel << " * ||M|| = "
       << tols.pivot_rel * m_norm;
    throw SingularMatrix(os.str());
  }
  MatT x = lu.solve(rhs);
  const double rhs_norm = rhs.norm();
  const double target = tols.solve_residual_rel * rhs_norm;
  for (int pass = 0; pass < 5; ++pass) {
    MatT residual = rhs - M * x;
    if (residual.norm() <= target) return x;
    x += lu.solve(residual);
  }
  if ((rhs - M * x).norm() > target) {
    throw SingularMatrix(std::string(who) + ": refinement stalled; matrix effectively singular");
  }
  return x;
}

}  // namespace

Mat solve_linear(const Eigen::Ref<const Mat>& M, const Eigen::Ref<const Mat>& rhs,
                 const NumericTolerances& tols) {
  return solve_lu<Mat>(M, rhs, tols, "solve_linear");
}

CMat solve_linear_complex(const Eigen::Ref<const CMat>& M, const Eigen::Ref<const CMat>& rhs,
                          const NumericTolerances& tols) {
  return solve_lu<CMat>(M, rhs, tols, "solve_linear_complex");
}

std::vector<std::complex<double>> eig_general(const Eigen::Ref<const Mat>& M,
                                              const NumericTolerances& tols) {
  require_square(M.rows(), M.cols(), "eig_general");
  if (M.rows() > 64) {
    throw std::invalid_argument("eig_general: dimension cap is 64");
  }
  if (M.rows() == 0) return {};
  Eigen::EigenSolver<Mat> es(M, /*computeEigenvectors=*/true);
  if (es.info() != Eigen::Success) {
    throw ConvergenceFailure("eig_general: QR iteration did not converge");
  }
  const CMat V = es.eigenvectors();
  const CVec lambda = es.eigenvalues();
  const double m_norm = M.norm();
  const CMat residual = M.cast<std::complex<double>>() * V - V * lambda.asDiagonal();
  for (Eigen::Index j = 0; j < lambda.size(); ++j) {
    // Eigenvectors come back unit-norm, so the column residual is directly
    // comparable to ||M||.
    if (residual.col(j).norm() > tols.eig_residual_rel * std::max(m_norm, 1e-300)) {
      std::ostringstream os;
      os << "eig_general: eigenpair residual " << residual.col(j).norm()
         << " exceeds " << tols.eig_residual_rel << " * ||M||";
      throw ConvergenceFailure(os.str());
    }
  }
  std::vector<std::complex<double>> out(lambda.size());
  for (Eigen::Index j = 0; j < lambda.size(); ++j) out[static_cast<size_t>(j)] = lambda(j);
  return out;
}

Vec eig_symmetric(const Eigen::Ref<const Mat>& M) {
  require_square(M.rows(), M.cols(), "eig_symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()));
  if (es.info() != Eigen::Success) {
    throw ConvergenceFailure("eig_symmetric: iteration did not converge");
  }
  return es.eigenvalues();
}

namespace {

Vec symmetric_spectrum_checked(const Eigen::Ref<const Mat>& M, const NumericTolerances& tols,
                               const char* who) {
  require_square(M.rows(), M.cols(), who);
  const double asym = (M - M.transpose()).norm();
  if (asym > tols.symmetry_rel * M.norm()) {
    std::ostringstream os;
    os << who << ": ||M - M^T|| = " << asym << " exceeds " << tols.symmetry_rel << " * ||M||";
    throw AsymmetricInput(os.str());
  }
  return eig_symmetric(M);
}

}  // namespace

bool is_pos_def(const Eigen::Ref<const Mat>& M, double tol, const NumericTolerances& tols) {
  const Vec ev = symmetric_spectrum_checked(M, tols, "is_pos_def");
  return ev.size() > 0 && ev.minCoeff() > tol;
}

bool is_neg_semidef(const Eigen::Ref<const Mat>& M, double tol, const NumericTolerances& tols) {
  const Vec ev = symmetric_spectrum_checked(M, tols, "is_neg_semidef");
  return ev.size() == 0 || ev.maxCoeff() <= tol;
}

}  // namespace nihigs
