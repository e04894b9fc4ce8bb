#include "mtrl/kernels.hpp"

#include <fmt/format.h>

#include <cmath>

#include "mtrl/error.hpp"
#include "mtrl/matrix_ops.hpp"

namespace mtrl {

double base_kernel(const KernelSpec& k, const Eigen::Ref<const VectorXd>& x,
                   const Eigen::Ref<const VectorXd>& z) {
  if (x.size() != z.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("kernel arguments have dimensions {} and {}", x.size(), z.size()));
  }
  if (k.kind == KernelKind::Linear) return x.dot(z);
  return std::exp(-(x - z).squaredNorm() / (2.0 * k.width * k.width));
}

namespace {

// Unchecked row-pair evaluation for the hot loops.
inline double eval_rows(const KernelSpec& k, const MatrixXd& a, Index i, const MatrixXd& b,
                        Index j) {
  if (k.kind == KernelKind::Linear) return a.row(i).dot(b.row(j));
  return std::exp(-(a.row(i) - b.row(j)).squaredNorm() / (2.0 * k.width * k.width));
}

void check_lambdas(const Hyperparams& hp) {
  if (!(hp.lambda1 >= 0.0) || !(hp.lambda2 >= 0.0) || !(hp.lambda1 > 0.0 || hp.lambda2 > 0.0)) {
    throw Error(ErrorCode::InvalidHyperparams,
                fmt::format("coupling needs lambda1 > 0 or lambda2 > 0 (got {}, {})", hp.lambda1,
                            hp.lambda2));
  }
}

}  // namespace

CouplingMatrix coupling_matrix(const TaskCovariance& omega, const Hyperparams& hp) {
  check_lambdas(hp);
  const auto eig = sym_eig(omega.matrix());
  VectorXd mapped(eig.values.size());
  for (Index i = 0; i < mapped.size(); ++i) {
    const double mu = std::max(eig.values(i), 0.0);
    // lambda2 == 0: Omega (lambda1 Omega)^-1 = I / lambda1 on every direction.
    mapped(i) = hp.lambda2 == 0.0 ? 1.0 / hp.lambda1 : mu / (hp.lambda1 * mu + hp.lambda2);
  }
  MatrixXd c = eig.vectors * mapped.asDiagonal() * eig.vectors.transpose();
  return CouplingMatrix(0.5 * (c + c.transpose()));
}

CouplingMatrix coupling_from_inverse(const MatrixXd& inverse_cov, const Hyperparams& hp) {
  check_lambdas(hp);
  if (!(hp.lambda1 > 0.0)) {
    throw Error(ErrorCode::InvalidHyperparams, "a fixed inverse covariance requires lambda1 > 0");
  }
  return CouplingMatrix(psd_inverse(hp.lambda2 * inverse_cov, hp.lambda1));
}

CouplingMatrix model_coupling(const TrainedModel& model) {
  if (model.fixed_inverse) return coupling_from_inverse(*model.fixed_inverse, model.hyperparams);
  return coupling_matrix(model.omega, model.hyperparams);
}

double multitask_kernel(const KernelSpec& k, const CouplingMatrix& coupling, Index i1,
                        const Eigen::Ref<const VectorXd>& x1, Index i2,
                        const Eigen::Ref<const VectorXd>& x2) {
  const Index m = coupling.size();
  if (i1 < 0 || i1 >= m || i2 < 0 || i2 >= m) {
    throw Error(ErrorCode::TaskIndexOutOfRange,
                fmt::format("task indices ({}, {}) out of range for {} tasks", i1, i2, m));
  }
  return coupling(i1, i2) * base_kernel(k, x1, x2);
}

MatrixXd base_gram(const MatrixXd& inputs, const KernelSpec& k) {
  const Index n = inputs.rows();
  MatrixXd g(n, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double v = eval_rows(k, inputs, i, inputs, j);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

MatrixXd cross_gram(const MatrixXd& a, const MatrixXd& b, const KernelSpec& k) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("cross_gram: dimensions {} and {}", a.cols(), b.cols()));
  }
  MatrixXd g(a.rows(), b.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) g(i, j) = eval_rows(k, a, i, b, j);
  }
  return g;
}

MatrixXd assemble_kernel_matrix(const MultiTaskDataset& ds, const KernelSpec& k,
                                const CouplingMatrix& coupling) {
  const Index n = ds.total_points();
  const auto task = ds.task_of();
  const MatrixXd& x = ds.inputs();
  MatrixXd out(n, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (Index p = 0; p < n; ++p) {
    for (Index q = 0; q <= p; ++q) {
      const double v = coupling(task[p], task[q]) * eval_rows(k, x, p, x, q);
      out(p, q) = v;
      out(q, p) = v;
    }
  }
  return out;
}

MatrixXd couple_gram(const MatrixXd& base, std::span<const int> task_of,
                     const CouplingMatrix& coupling) {
  const Index n = base.rows();
  MatrixXd out(n, n);
#pragma omp parallel for schedule(static)
  for (Index q = 0; q < n; ++q) {
    for (Index p = 0; p < n; ++p) out(p, q) = coupling(task_of[p], task_of[q]) * base(p, q);
  }
  return out;
}

MatrixXd dual_task_gram(const MatrixXd& base, const VectorXd& alpha, std::span<const int> task_of,
                        Index num_tasks) {
  const Index n = base.rows();
  // v(p, b) = sum over q in task b of base_pq alpha_q
  MatrixXd v = MatrixXd::Zero(n, num_tasks);
#pragma omp parallel for schedule(static)
  for (Index p = 0; p < n; ++p) {
    for (Index q = 0; q < n; ++q) v(p, task_of[q]) += base(p, q) * alpha(q);
  }
  MatrixXd out = MatrixXd::Zero(num_tasks, num_tasks);
  for (Index p = 0; p < n; ++p) out.row(task_of[p]) += alpha(p) * v.row(p);
  return 0.5 * (out + out.transpose());
}

namespace reference {

MatrixXd base_gram(const MatrixXd& inputs, const KernelSpec& k) {
  return reference::cross_gram(inputs, inputs, k);
}

MatrixXd cross_gram(const MatrixXd& a, const MatrixXd& b, const KernelSpec& k) {
  MatrixXd g(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) g(i, j) = base_kernel(k, a.row(i), b.row(j));
  }
  return g;
}

MatrixXd assemble_kernel_matrix(const MultiTaskDataset& ds, const KernelSpec& k,
                                const CouplingMatrix& coupling) {
  const Index n = ds.total_points();
  const auto task = ds.task_of();
  MatrixXd out(n, n);
  for (Index p = 0; p < n; ++p) {
    for (Index q = 0; q < n; ++q) {
      out(p, q) =
          multitask_kernel(k, coupling, task[p], ds.inputs().row(p), task[q], ds.inputs().row(q));
    }
  }
  return out;
}

MatrixXd couple_gram(const MatrixXd& base, std::span<const int> task_of,
                     const CouplingMatrix& coupling) {
  MatrixXd out(base.rows(), base.cols());
  for (Index p = 0; p < base.rows(); ++p) {
    for (Index q = 0; q < base.cols(); ++q) out(p, q) = coupling(task_of[p], task_of[q]) * base(p, q);
  }
  return out;
}

MatrixXd dual_task_gram(const MatrixXd& base, const VectorXd& alpha, std::span<const int> task_of,
                        Index num_tasks) {
  MatrixXd out = MatrixXd::Zero(num_tasks, num_tasks);
  for (Index p = 0; p < base.rows(); ++p) {
    for (Index q = 0; q < base.cols(); ++q) {
      out(task_of[p], task_of[q]) += alpha(p) * alpha(q) * base(p, q);
    }
  }
  return out;
}

}  // namespace reference

}  // namespace mtrl
