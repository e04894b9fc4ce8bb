#pragma once
#include <utility>

#include "mtrl/core_model.hpp"

namespace mtrl {

// [(1 - sigma) Omega, omega_col; omega_col^T, sigma]. Throws SigmaOutOfRange
// unless 0 < sigma < 1.
MatrixXd augmented_covariance(const TaskCovariance& omega, const VectorXd& omega_col, double sigma);

// omega_col^T Omega^-1 omega_col <= sigma - sigma^2 (+1e-10), the Schur-complement
// form of "augmented covariance is PSD". A singular Omega gets a 1e-8 ridge.
bool schur_feasible(const TaskCovariance& omega, const VectorXd& omega_col, double sigma);

/*
 * Data of the (omega_col, sigma) step in the rotated-cone form. With
 * Psi = W~^T W~ split as [Psi11, psi12; psi12^T, psi22] and
 * Psi11~ = Omega^(-1/2) Psi11 Omega^(-1/2) = U diag(lambda) U^T.
 */
struct SocpInstance {
  VectorXd eigenvalues;   // lambda, descending
  MatrixXd eigenvectors;  // U
  VectorXd psi12;
  double psi22 = 0.0;
  MatrixXd omega_inv_sqrt;
  MatrixXd omega_sqrt;

  // Throws DegenerateGram when Psi is numerically zero.
  static SocpInstance build(const MatrixXd& psi, const TaskCovariance& omega);
};

struct OmegaSigmaStep {
  VectorXd omega_col;
  double sigma = 0.0;
  double t = 0.0;  // certified lower bound 1/t >= lambda_max(W~ Omega~^-1 W~^T) (SOCP only)
  int newton_steps = 0;
};

/*
 * Maximizes t subject to
 *   r_j = 1 - sigma - t lambda_j > 0,
 *   sum_j f_j^2 / r_j <= sigma - t psi22,  f = U^T Omega^(-1/2) (omega_col - t psi12),
 *   omega_col^T Omega^-1 omega_col <= sigma - sigma^2,
 *   sigma in [sigma_min, 1 - sigma_min],
 * which is equivalent to Omega~ - t Psi >= 0. Log-barrier interior method,
 * barrier weight halved from 1 to 1e-8, Newton tolerance 1e-10.
 * Throws Infeasible or SolverStalled.
 */
OmegaSigmaStep solve_omega_sigma(const SocpInstance& socp, const TaskCovariance& omega,
                                 double sigma_min = 1e-4);

// Minimizes tr(Omega~^-1 Psi) over (omega_col, sigma) directly. Coincides with
// solve_omega_sigma when Psi has rank one; in general the cone program bounds
// the largest eigenvalue instead of the trace.
OmegaSigmaStep solve_omega_sigma_trace(const MatrixXd& psi, const TaskCovariance& omega,
                                       double sigma_min = 1e-4);

// tr(Omega~^-1 Psi) for the augmented covariance of (omega_col, sigma).
double augmented_trace(const MatrixXd& psi, const TaskCovariance& omega, const VectorXd& omega_col,
                       double sigma);

// Minimizes the new-task objective over (w, b) with Omega~ fixed. Linear in
// (w, b): effective ridge lambda1 + lambda2 P_{m~m~} and offset
// lambda2 W_m P_{1:m, m~} for P = Omega~^-1.
std::pair<VectorXd, double> solve_wb_newtask(const TaskData& task, const MatrixXd& existing_weights,
                                             const MatrixXd& omega_tilde, const Hyperparams& hp);

// (1/n) sum (y - w^T x - b)^2 + lambda1/2 |w|^2
//   + lambda2/2 (tr(W~ Omega~^-1 W~^T) + eps tr(Omega~^-1))
double new_task_objective(const TaskData& task, const MatrixXd& existing_weights,
                          const VectorXd& w, double b, const MatrixXd& omega_tilde,
                          const Hyperparams& hp);

enum class OmegaStepMethod { Exact, Socp };

struct NewTaskOptions {
  OmegaStepMethod method = OmegaStepMethod::Exact;
  double sigma_min = 1e-4;
};

// Adds one task to a trained linear-kernel model without touching the existing
// weights or Omega. Starts from omega_col = 0, sigma = 1/(m+1).
NewTaskSolution incorporate_new_task(const TrainedModel& model, const TaskData& task,
                                     const Hyperparams& hp, const NewTaskOptions& opts = {});

// Correlation between the new task and existing task i implied by the solution.
double new_task_correlation(const NewTaskSolution& sol, const TaskCovariance& omega, Index task);

}  // namespace mtrl
