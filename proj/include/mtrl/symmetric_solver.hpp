#pragma once
#include <string_view>

#include "mtrl/core_model.hpp"
#include "mtrl/kernels.hpp"

namespace mtrl {

enum class SolverChoice { Direct, Smo, Auto };

// Auto picks the direct path up to this many points, SMO above.
inline constexpr Index kAutoDirectMaxPoints = 2000;

std::string_view solver_name(SolverChoice s);

struct DualSolution {
  VectorXd alpha;  // length N
  VectorXd bias;   // length m
};

struct SmoOptions {
  double kkt_tol = 1e-6;
  long max_iters = 0;  // 0 selects max(100000, 100 N)
};

struct SmoResult {
  DualSolution solution;
  long iterations = 0;
  double max_violation = 0.0;
  bool converged = false;  // false: max_iters hit, `solution` is the last (best) iterate
};

// Solves the bordered system [K + Lambda/2, M; M^T, 0] [alpha; b] = [y; 0] where
// Lambda_pp = n_i for p in task i and column i of M indicates task i's points.
DualSolution solve_alpha_b_direct(const MultiTaskDataset& ds, const KernelSpec& kernel,
                                  const CouplingMatrix& coupling);
DualSolution solve_alpha_b_direct(const MultiTaskDataset& ds, const MatrixXd& kernel_matrix);

// Minimizes h(alpha) = alpha^T (K + Lambda/2) alpha / 2 - alpha^T y subject to
// sum_j alpha_j = 0 within every task. Pairs are drawn inside one task (the
// maximal violating pair), tasks visited round-robin. b_i is recovered from
// per-task stationarity: b_i = -mean of the gradient over task i.
SmoResult solve_alpha_b_smo(const MultiTaskDataset& ds, const KernelSpec& kernel,
                            const CouplingMatrix& coupling, const SmoOptions& opts = {});
SmoResult solve_alpha_b_smo(const MultiTaskDataset& ds, const MatrixXd& kernel_matrix,
                            const SmoOptions& opts = {});

// h(alpha) for the kernel matrix K (without the Lambda/2 shift; it is added here).
double dual_objective(const MultiTaskDataset& ds, const MatrixXd& kernel_matrix,
                      const VectorXd& alpha);

// W^T W for W = sum alpha_p phi(x_p) e_{t_p}^T C, i.e. C Q C.
MatrixXd gram_wtw(const VectorXd& alpha, const MultiTaskDataset& ds, const KernelSpec& kernel,
                  const TaskCovariance& omega, const Hyperparams& hp);
MatrixXd gram_wtw(const MatrixXd& base_gram, const VectorXd& alpha, std::span<const int> task_of,
                  const CouplingMatrix& coupling);

// Omega = G^(1/2) / tr(G^(1/2)). Throws DegenerateGram when tr(G^(1/2)) <= 1e-12.
TaskCovariance update_omega(const MatrixXd& gram);

struct ObjectiveTerms {
  double loss = 0.0;      // sum_i (1/n_i) sum_j residual^2
  double ridge = 0.0;     // lambda1/2 tr(W W^T)
  double relation = 0.0;  // lambda2/2 (tr(W Omega^-1 W^T) + eps tr(Omega^-1))
  double total() const { return loss + ridge + relation; }
};

// Objective for the state (alpha, b, Omega), with W reconstructed from alpha
// under the coupling of Omega.
ObjectiveTerms objective_terms(const MultiTaskDataset& ds, const VectorXd& alpha,
                               const VectorXd& bias, const TaskCovariance& omega,
                               const KernelSpec& kernel, const Hyperparams& hp);
double objective_value(const MultiTaskDataset& ds, const VectorXd& alpha, const VectorXd& bias,
                       const TaskCovariance& omega, const KernelSpec& kernel,
                       const Hyperparams& hp);

// Primal objective for explicit weights W (d x m): loss + lambda1/2 tr(W W^T) +
// lambda2/2 tr(W P W^T) where P plays the role of Omega^-1.
double primal_objective(const MultiTaskDataset& ds, const MatrixXd& weights, const VectorXd& bias,
                        const MatrixXd& omega_inverse, const Hyperparams& hp);

struct FitOptions {
  SolverChoice solver = SolverChoice::Auto;
  SmoOptions smo;
};

// Alternates the (alpha, b)-step and the analytic Omega step from Omega = I/m.
// objective_trace[k] is the objective right after the k-th (alpha, b)-step.
TrainedModel fit(const MultiTaskDataset& ds, const KernelSpec& kernel, const Hyperparams& hp,
                 const FitOptions& opts = {});

double predict(const TrainedModel& model, std::string_view task_id,
               const Eigen::Ref<const VectorXd>& x);
double predict(const TrainedModel& model, Index task, const Eigen::Ref<const VectorXd>& x);
// One prediction per row of `inputs`, all for the same task.
VectorXd predict_batch(const TrainedModel& model, Index task, const MatrixXd& inputs);

// Linear kernel only: W (d x m) with column i = w_i.
MatrixXd explicit_weights(const TrainedModel& model);

namespace detail {

// Dual solve on a precomputed coupled kernel matrix, honoring the solver choice.
DualSolution solve_dual(const MultiTaskDataset& ds, const MatrixXd& kernel_matrix,
                        const FitOptions& opts);
// sum_i (1/n_i) sum_j (y - K alpha - b)^2
double training_loss(const MultiTaskDataset& ds, const MatrixXd& kernel_matrix,
                     const VectorXd& alpha, const VectorXd& bias);
TrainedModel make_model(const MultiTaskDataset& ds, const KernelSpec& kernel,
                        const Hyperparams& hp, DualSolution sol, TaskCovariance omega);

}  // namespace detail

}  // namespace mtrl
