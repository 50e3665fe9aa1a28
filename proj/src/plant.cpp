#include "nihigs/plant.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace nihigs {

PlantModel::PlantModel(Mat A, Mat B, Mat C) : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)) {
  if (A_.rows() != A_.cols()) {
    throw std::invalid_argument("PlantModel: A must be square");
  }
  if (B_.rows() != A_.rows() || C_.cols() != A_.rows()) {
    throw std::invalid_argument("PlantModel: B/C dimensions inconsistent with A");
  }
  if (B_.cols() != C_.rows()) {
    throw std::invalid_argument("PlantModel: plant must be square (outputs == inputs)");
  }
  if (B_.cols() == 0 || A_.rows() == 0) {
    throw std::invalid_argument("PlantModel: empty system");
  }
  if (!A_.allFinite() || !B_.allFinite() || !C_.allFinite()) {
    throw std::invalid_argument("PlantModel: non-finite entry");
  }
  // Lemma-level requirement det(A) != 0; surfaces as SingularMatrix.
  solve_linear(A_, Mat::Identity(A_.rows(), A_.rows()));
}

Mat dc_gain(const PlantModel& plant) {
  return -plant.C() * solve_linear(plant.A(), plant.B());
}

CMat freq_response(const PlantModel& plant, double omega) {
  if (omega < 0.0 || !std::isfinite(omega)) {
    throw std::invalid_argument("freq_response: omega must be finite and >= 0");
  }
  const Eigen::Index n = plant.states();
  CMat M = CMat::Zero(n, n);
  M.real() = -plant.A();
  for (Eigen::Index i = 0; i < n; ++i) M(i, i) += std::complex<double>(0.0, omega);
  try {
    return plant.C().cast<std::complex<double>>() *
           solve_linear_complex(M, plant.B().cast<std::complex<double>>());
  } catch (const SingularMatrix&) {
    std::ostringstream os;
    os << "freq_response: jwI - A singular at omega = " << omega;
    throw SingularAtFrequency(os.str());
  }
}

std::vector<double> default_frequency_grid(const PlantModel& plant, std::size_t points) {
  if (points < 2) throw std::invalid_argument("default_frequency_grid: need at least 2 points");
  const auto eigs = eig_general(plant.A());
  double lo_mag = std::numeric_limits<double>::infinity();
  double hi_mag = 0.0;
  for (const auto& l : eigs) {
    lo_mag = std::min(lo_mag, std::abs(l));
    hi_mag = std::max(hi_mag, std::abs(l));
  }
  const double lo = 0.01 * lo_mag;
  const double hi = 100.0 * hi_mag;
  std::vector<double> grid(points);
  const double step = std::log10(hi / lo) / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) {
    grid[k] = lo * std::pow(10.0, step * static_cast<double>(k));
  }
  return grid;
}

NiVerdict ni_frequency_test(const PlantModel& plant, const std::vector<double>& omega_grid,
                            double tol_rel) {
  if (omega_grid.empty()) throw EmptyGrid("ni_frequency_test: empty frequency grid");
  SweepDetail detail;
  detail.grid_size = omega_grid.size();
  double worst_margin = std::numeric_limits<double>::infinity();
  bool ok = true;
  for (double omega : omega_grid) {
    if (!(omega > 0.0)) {
      throw std::invalid_argument("ni_frequency_test: grid frequencies must be > 0");
    }
    const CMat G = freq_response(plant, omega);
    const CMat H = std::complex<double>(0.0, 1.0) * (G - G.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(H);
    if (es.info() != Eigen::Success) {
      throw ConvergenceFailure("ni_frequency_test: Hermitian eigensolve failed");
    }
    const double min_eig = es.eigenvalues().minCoeff();
    const double tol = tol_rel * G.norm();
    if (min_eig < -tol) ok = false;
    const double margin = min_eig + tol;
    if (margin < worst_margin) {
      worst_margin = margin;
      detail.worst_omega = omega;
      detail.worst_min_eig = min_eig;
      detail.tol_at_worst = tol;
    }
  }
  NiVerdict v;
  v.method = NiMethod::Sweep;
  v.is_ni = ok;
  v.detail = detail;
  return v;
}

NiVerdict ni_hamiltonian_test(const PlantModel& plant, double tol_axis, double tol_cluster) {
  const Mat& A = plant.A();
  const Mat& B = plant.B();
  const Mat& C = plant.C();
  const Eigen::Index n = plant.states();

  const Mat Q = C * B + (C * B).transpose();
  const Vec q_eigs = eig_symmetric(Q);
  if (!(q_eigs.minCoeff() > 0.0)) {
    std::ostringstream os;
    os << "ni_hamiltonian_test: CB + B^T C^T not positive definite (min eig "
       << q_eigs.minCoeff() << "); use the frequency sweep instead";
    throw PreconditionQ0(os.str());
  }
  const Mat Q0 = -Q;
  const Mat Qi = solve_linear(Q0, Mat::Identity(Q0.rows(), Q0.rows()));

  Mat N0(2 * n, 2 * n);
  const Mat CA = C * A;
  N0.topLeftCorner(n, n) = A + B * Qi * CA;
  N0.topRightCorner(n, n) = B * Qi * B.transpose();
  N0.bottomLeftCorner(n, n) = -A.transpose() * C.transpose() * Qi * CA;
  N0.bottomRightCorner(n, n) = -A.transpose() - A.transpose() * C.transpose() * Qi * B.transpose();

  HamiltonianDetail detail;
  detail.N0 = N0;
  detail.Q0 = Q0;
  detail.eigenvalues = eig_general(N0);
  const double scale = N0.norm();
  detail.axis_tol = tol_axis * scale;

  std::vector<double> axis_imags;
  for (const auto& l : detail.eigenvalues) {
    if (std::abs(l.real()) <= detail.axis_tol) axis_imags.push_back(l.imag());
  }
  std::sort(axis_imags.begin(), axis_imags.end());
  const double gap = tol_cluster * std::max(scale, 1.0);
  bool all_even = true;
  for (std::size_t i = 0; i < axis_imags.size();) {
    std::size_t j = i + 1;
    while (j < axis_imags.size() && axis_imags[j] - axis_imags[j - 1] <= gap) ++j;
    AxisCluster cluster;
    cluster.multiplicity = static_cast<int>(j - i);
    cluster.imag = axis_imags[i + (j - i) / 2];
    detail.clusters.push_back(cluster);
    if (cluster.multiplicity % 2 != 0) all_even = false;
    i = j;
  }

  NiVerdict v;
  v.method = NiMethod::Hamiltonian;
  v.is_ni = all_even;
  v.detail = detail;
  return v;
}

namespace {

// Orthonormal-style basis for symmetric n x n matrices: one matrix per upper
// triangular position, with off-diagonal entries mirrored.
Mat sym_basis(Eigen::Index n, Eigen::Index k) {
  Mat E = Mat::Zero(n, n);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      if (idx == k) {
        E(i, j) = 1.0;
        E(j, i) = 1.0;
        return E;
      }
      ++idx;
    }
  }
  throw std::logic_error("sym_basis: index out of range");
}

struct Family {
  Vec particular;  // coefficients of the least-squares solution
  Mat nullspace;   // columns span the homogeneous solutions
  double residual_rel = 0.0;
};

Family solve_equality_family(const Mat& A, const Mat& B, const Mat& C) {
  const Eigen::Index n = A.rows();
  const Eigen::Index p = C.rows();
  const Eigen::Index unknowns = n * (n + 1) / 2;
  Mat E(n * p, unknowns);
  for (Eigen::Index k = 0; k < unknowns; ++k) {
    const Mat G = A * sym_basis(n, k) * C.transpose();
    E.col(k) = Eigen::Map<const Vec>(G.data(), G.size());
  }
  Vec rhs(n * p);
  {
    const Mat nb = -B;
    rhs = Eigen::Map<const Vec>(nb.data(), nb.size());
  }
  Eigen::JacobiSVD<Mat> svd(E, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Vec sv = svd.singularValues();
  const double sv_tol =
      std::max(E.rows(), E.cols()) * std::numeric_limits<double>::epsilon() * sv(0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > sv_tol) ++rank;

  Vec c = Vec::Zero(unknowns);
  const Vec utb = svd.matrixU().transpose() * rhs;
  for (Eigen::Index k = 0; k < rank; ++k) {
    c += (utb(k) / sv(k)) * svd.matrixV().col(k);
  }
  Family fam;
  fam.particular = c;
  fam.nullspace = svd.matrixV().rightCols(unknowns - rank);
  fam.residual_rel = (E * c - rhs).norm() / std::max(rhs.norm(), 1e-300);
  return fam;
}

Mat coeffs_to_sym(const Vec& c, Eigen::Index n) {
  Mat Y = Mat::Zero(n, n);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      Y(i, j) = c(idx);
      Y(j, i) = c(idx);
      ++idx;
    }
  }
  return Y;
}

}  // namespace

CertificateSearch find_ni_certificate(const PlantModel& plant, const CertificateSearchOptions& opts) {
  const Mat& A = plant.A();
  const Mat& B = plant.B();
  const Mat& C = plant.C();
  const Eigen::Index n = plant.states();

  CertificateSearch out;
  const Family fam = solve_equality_family(A, B, C);
  out.equality_residual_rel = fam.residual_rel;
  if (fam.residual_rel > opts.equality_tol_rel) {
    out.status = CertificateStatus::EqualityInfeasible;
    std::ostringstream os;
    os << "equality B + AYC^T = 0 has no symmetric solution (relative residual "
       << fam.residual_rel << "); no NI certificate exists";
    out.message = os.str();
    return out;
  }

  const Mat Y_part = coeffs_to_sym(fam.particular, n);
  const double delta = 1e-8 * std::max(Y_part.norm(), 1e-300);
  const Eigen::Index free_dims = fam.nullspace.cols();

  auto phi_of = [&](const Vec& theta) {
    const Mat Y = coeffs_to_sym(fam.particular + fam.nullspace * theta, n);
    const Mat L = A * Y + Y * A.transpose();
    const double lmax = eig_symmetric(L).maxCoeff();
    const double lmin_y = eig_symmetric(Y).minCoeff();
    return std::max(lmax, delta - lmin_y);
  };

  Vec theta = Vec::Zero(free_dims);
  double best_phi = phi_of(theta);
  Vec best_theta = theta;

  if (free_dims > 0) {
    // Projected subgradient with diminishing steps on the active branch of phi.
    const double step0 = 0.5 * std::max(fam.particular.norm(), 1e-12);
    for (int it = 0; it < opts.subgradient_iters && best_phi > 0.0; ++it) {
      const Mat Y = coeffs_to_sym(fam.particular + fam.nullspace * theta, n);
      const Mat L = A * Y + Y * A.transpose();
      Eigen::SelfAdjointEigenSolver<Mat> esL(L);
      Eigen::SelfAdjointEigenSolver<Mat> esY(Y);
      const double lmax = esL.eigenvalues().maxCoeff();
      const double branch_y = delta - esY.eigenvalues().minCoeff();
      Vec grad(free_dims);
      if (lmax >= branch_y) {
        const Vec v = esL.eigenvectors().col(n - 1);
        for (Eigen::Index k = 0; k < free_dims; ++k) {
          const Mat Nk = coeffs_to_sym(fam.nullspace.col(k), n);
          grad(k) = v.dot((A * Nk + Nk * A.transpose()) * v);
        }
      } else {
        const Vec w = esY.eigenvectors().col(0);
        for (Eigen::Index k = 0; k < free_dims; ++k) {
          const Mat Nk = coeffs_to_sym(fam.nullspace.col(k), n);
          grad(k) = -w.dot(Nk * w);
        }
      }
      const double gnorm = grad.norm();
      if (gnorm < 1e-300) break;
      theta -= (step0 / std::sqrt(static_cast<double>(it + 1))) * grad / gnorm;
      const double phi = phi_of(theta);
      if (phi < best_phi) {
        best_phi = phi;
        best_theta = theta;
      }
    }

    // Deterministic compass polish around the best subgradient iterate; the
    // feasible set can be a single point (unique certificate), which the
    // subgradient phase alone rarely hits to full precision.
    double radius = 0.25 * std::max(best_theta.norm() + fam.particular.norm(), 1e-12);
    for (int round = 0; round < opts.polish_rounds && radius > 1e-14 * (1.0 + best_theta.norm());
         ++round) {
      bool improved = false;
      for (Eigen::Index k = 0; k < free_dims; ++k) {
        for (double sgn : {+1.0, -1.0}) {
          Vec trial = best_theta;
          trial(k) += sgn * radius;
          const double phi = phi_of(trial);
          if (phi < best_phi) {
            best_phi = phi;
            best_theta = trial;
            improved = true;
          }
        }
      }
      if (!improved) radius *= 0.5;
    }
  }

  const Mat Y = coeffs_to_sym(fam.particular + fam.nullspace * best_theta, n);
  const Mat L = A * Y + Y * A.transpose();
  NiCertificate cert;
  cert.Y = Y;
  cert.residual_eq = (B + A * Y * C.transpose()).norm();
  cert.residual_lyap = eig_symmetric(L).maxCoeff();
  out.best_phi = best_phi;

  const double eq_budget = 1e-6 * (B.norm() + A.norm() * Y.norm() * C.norm());
  const double lyap_budget = 1e-8 * L.norm() + 1e-10;
  const bool positive = eig_symmetric(Y).minCoeff() > 0.0;
  if (positive && cert.residual_eq <= eq_budget && cert.residual_lyap <= lyap_budget) {
    out.status = CertificateStatus::Found;
    out.certificate = cert;
    out.message = "certificate found";
  } else {
    out.status = CertificateStatus::SearchInconclusive;
    std::ostringstream os;
    os << "search stopped with phi = " << best_phi
       << "; the plant may still be NI (verdict unknown)";
    out.message = os.str();
  }
  return out;
}

NiVerdict ni_certificate_test(const PlantModel& plant, const CertificateSearchOptions& opts) {
  NiVerdict v;
  v.method = NiMethod::Certificate;
  CertificateSearch search = find_ni_certificate(plant, opts);
  v.is_ni = search.status == CertificateStatus::Found;
  v.conclusive = search.status != CertificateStatus::SearchInconclusive;
  v.detail = std::move(search);
  return v;
}

}  // namespace nihigs
