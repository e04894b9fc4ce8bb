#pragma once
#include "mtrl/core_model.hpp"

namespace mtrl {

// Eigenvalues below this are treated as numerical noise and clamped to zero.
inline constexpr double kEigenClampTol = 1e-8;
// Ridge applied to Omega wherever a genuine inverse is required.
inline constexpr double kOmegaRidge = 1e-8;

struct EigenDecomposition {
  VectorXd values;   // descending
  MatrixXd vectors;  // orthonormal columns, vectors.col(k) pairs with values(k)
};

// Throws NotSymmetric when |A_ij - A_ji| > 1e-8 * max(1, |A_ij|).
EigenDecomposition sym_eig(const MatrixXd& a);

// Symmetric PSD square root. Throws NotPSD when an eigenvalue is below -1e-8.
MatrixXd psd_sqrt(const MatrixXd& a);

// (A + ridge I)^-1 through the eigendecomposition. Throws Singular when a
// shifted eigenvalue is <= 1e-10.
MatrixXd psd_inverse(const MatrixXd& a, double ridge);

// (A + ridge I)^(-1/2). Throws Singular like psd_inverse.
MatrixXd psd_inverse_sqrt(const MatrixXd& a, double ridge);

// Pivoted LU with one step of iterative refinement. Throws SingularSystem when
// a pivot magnitude falls below 1e-12.
VectorXd solve_linear(const MatrixXd& a, const VectorXd& rhs);

// C_ij = Omega_ij / sqrt(Omega_ii Omega_jj). Throws DegenerateTaskVariance.
MatrixXd correlation_from_covariance(const MatrixXd& omega);
inline MatrixXd correlation_from_covariance(const TaskCovariance& omega) {
  return correlation_from_covariance(omega.matrix());
}

double min_eigenvalue(const MatrixXd& a);

}  // namespace mtrl
