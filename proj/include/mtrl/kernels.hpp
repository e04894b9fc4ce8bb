#pragma once
#include <span>

#include "mtrl/core_model.hpp"

namespace mtrl {

// Omega (lambda1 Omega + lambda2 I)^-1, or (lambda1 I + lambda2 L)^-1 for a fixed
// prior L. Symmetric, and shares eigenvectors with Omega.
class CouplingMatrix {
 public:
  explicit CouplingMatrix(MatrixXd value) : value_(std::move(value)) {}
  const MatrixXd& matrix() const { return value_; }
  double operator()(Index i, Index j) const { return value_(i, j); }
  Index size() const { return value_.rows(); }

 private:
  MatrixXd value_;
};

double base_kernel(const KernelSpec& k, const Eigen::Ref<const VectorXd>& x,
                   const Eigen::Ref<const VectorXd>& z);

// Eigenvalue mu of Omega maps to mu / (lambda1 mu + lambda2). Requires lambda1 > 0
// or lambda2 > 0.
CouplingMatrix coupling_matrix(const TaskCovariance& omega, const Hyperparams& hp);

// (lambda1 I + lambda2 L)^-1 for a symmetric PSD L standing in for Omega^-1.
CouplingMatrix coupling_from_inverse(const MatrixXd& inverse_cov, const Hyperparams& hp);

// Coupling a trained model predicts with.
CouplingMatrix model_coupling(const TrainedModel& model);

double multitask_kernel(const KernelSpec& k, const CouplingMatrix& coupling, Index i1,
                        const Eigen::Ref<const VectorXd>& x1, Index i2,
                        const Eigen::Ref<const VectorXd>& x2);

// The kernels below are OpenMP-parallel; mtrl::reference holds serial versions
// with identical results, kept for testing and benchmarking.

// N x N base Gram over the rows of `inputs`.
MatrixXd base_gram(const MatrixXd& inputs, const KernelSpec& k);
// rows(a) x rows(b) cross Gram.
MatrixXd cross_gram(const MatrixXd& a, const MatrixXd& b, const KernelSpec& k);

// Full multi-task kernel matrix K in flat order.
MatrixXd assemble_kernel_matrix(const MultiTaskDataset& ds, const KernelSpec& k,
                                const CouplingMatrix& coupling);

// K_pq = coupling(t_p, t_q) * base_pq, reusing a cached base Gram.
MatrixXd couple_gram(const MatrixXd& base, std::span<const int> task_of,
                     const CouplingMatrix& coupling);

// Q_ab = sum over p in task a, q in task b of alpha_p alpha_q base_pq. W^T W is
// then C Q C for coupling C.
MatrixXd dual_task_gram(const MatrixXd& base, const VectorXd& alpha, std::span<const int> task_of,
                        Index num_tasks);

namespace reference {

MatrixXd base_gram(const MatrixXd& inputs, const KernelSpec& k);
MatrixXd cross_gram(const MatrixXd& a, const MatrixXd& b, const KernelSpec& k);
MatrixXd assemble_kernel_matrix(const MultiTaskDataset& ds, const KernelSpec& k,
                                const CouplingMatrix& coupling);
MatrixXd couple_gram(const MatrixXd& base, std::span<const int> task_of,
                     const CouplingMatrix& coupling);
MatrixXd dual_task_gram(const MatrixXd& base, const VectorXd& alpha, std::span<const int> task_of,
                        Index num_tasks);

}  // namespace reference

}  // namespace mtrl
