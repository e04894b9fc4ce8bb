#include "mtrl/matrix_ops.hpp"

#include <fmt/format.h>

#include <cmath>

#include "mtrl/error.hpp"

namespace mtrl {

namespace {

void require_square(const MatrixXd& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("{}: expected a square matrix, got {}x{}", what, a.rows(), a.cols()));
  }
}

void require_symmetric(const MatrixXd& a, double tol) {
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = i + 1; j < a.cols(); ++j) {
      if (std::abs(a(i, j) - a(j, i)) > tol * std::max(1.0, std::abs(a(i, j)))) {
        throw Error(ErrorCode::NotSymmetric,
                    fmt::format("matrix not symmetric at ({}, {}): {} vs {}", i, j, a(i, j), a(j, i)));
      }
    }
  }
}

}  // namespace

EigenDecomposition sym_eig(const MatrixXd& a) {
  require_square(a, "sym_eig");
  require_symmetric(a, 1e-8);
  const MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  const Index k = a.rows();
  EigenDecomposition out{VectorXd(k), MatrixXd(k, k)};
  // Eigen returns ascending order.
  for (Index i = 0; i < k; ++i) {
    out.values(i) = es.eigenvalues()(k - 1 - i);
    out.vectors.col(i) = es.eigenvectors().col(k - 1 - i);
  }
  return out;
}

double min_eigenvalue(const MatrixXd& a) {
  require_square(a, "min_eigenvalue");
  if (a.rows() == 0) return 0.0;
  const MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

MatrixXd psd_sqrt(const MatrixXd& a) {
  const auto eig = sym_eig(a);
  VectorXd root(eig.values.size());
  for (Index i = 0; i < root.size(); ++i) {
    const double v = eig.values(i);
    if (v < -kEigenClampTol) {
      throw Error(ErrorCode::NotPSD, fmt::format("psd_sqrt: eigenvalue {} is negative", v));
    }
    root(i) = std::sqrt(std::max(v, 0.0));
  }
  MatrixXd r = eig.vectors * root.asDiagonal() * eig.vectors.transpose();
  return 0.5 * (r + r.transpose());
}

namespace {

MatrixXd spectral_power(const MatrixXd& a, double ridge, double power) {
  const auto eig = sym_eig(a);
  VectorXd mapped(eig.values.size());
  for (Index i = 0; i < mapped.size(); ++i) {
    const double v = eig.values(i) + ridge;
    if (v <= 1e-10) {
      throw Error(ErrorCode::Singular,
                  fmt::format("matrix is singular: shifted eigenvalue {} <= 1e-10", v));
    }
    mapped(i) = std::pow(v, power);
  }
  MatrixXd r = eig.vectors * mapped.asDiagonal() * eig.vectors.transpose();
  return 0.5 * (r + r.transpose());
}

}  // namespace

MatrixXd psd_inverse(const MatrixXd& a, double ridge) { return spectral_power(a, ridge, -1.0); }

MatrixXd psd_inverse_sqrt(const MatrixXd& a, double ridge) {
  return spectral_power(a, ridge, -0.5);
}

VectorXd solve_linear(const MatrixXd& a, const VectorXd& rhs) {
  require_square(a, "solve_linear");
  if (rhs.size() != a.rows()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("solve_linear: rhs has length {}, matrix is {}x{}", rhs.size(),
                            a.rows(), a.cols()));
  }
  if (a.rows() == 0) return VectorXd();
  Eigen::PartialPivLU<MatrixXd> lu(a);
  const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (!(min_pivot >= 1e-12)) {
    throw Error(ErrorCode::SingularSystem,
                fmt::format("linear system is singular: pivot {} below 1e-12", min_pivot));
  }
  VectorXd x = lu.solve(rhs);
  const VectorXd residual = rhs - a * x;
  x += lu.solve(residual);
  return x;
}

MatrixXd correlation_from_covariance(const MatrixXd& omega) {
  require_square(omega, "correlation_from_covariance");
  const Index m = omega.rows();
  VectorXd scale(m);
  for (Index i = 0; i < m; ++i) {
    if (!(omega(i, i) > 1e-12)) {
      throw Error(ErrorCode::DegenerateTaskVariance,
                  fmt::format("task {} has variance {} <= 1e-12", i, omega(i, i)));
    }
    scale(i) = 1.0 / std::sqrt(omega(i, i));
  }
  MatrixXd c = scale.asDiagonal() * omega * scale.asDiagonal();
  c.diagonal().setOnes();
  return c;
}

}  // namespace mtrl
