#pragma once
#include <cstdint>
#include <optional>
#include <vector>

#include "mtrl/core_model.hpp"
#include "mtrl/metrics.hpp"
#include "mtrl/priors.hpp"
#include "mtrl/symmetric_solver.hpp"

namespace mtrl {

// Candidate values. An empty rbf_width list means "use the kernel's width".
struct HyperGrid {
  std::vector<double> lambda1;
  std::vector<double> lambda2;
  std::vector<double> rbf_width;
};

struct ExperimentConfig {
  KernelSpec kernel;
  HyperGrid grid;
  int folds = 5;
  std::uint64_t seed = 0;
  SolverChoice solver = SolverChoice::Auto;
  TaskType task_type = TaskType::Regression;
  Hyperparams base;  // tol, max_iters, omega_epsilon; lambdas come from the grid
  std::optional<FixedInverseCovariance> prior;

  // Throws GridEmpty or InvalidArgument.
  void validate() const;
};

struct GridPointResult {
  Hyperparams hyperparams;
  KernelSpec kernel;
  std::vector<double> fold_scores;
  double mean_score = 0.0;
};

struct CvResult {
  std::size_t best_index = 0;
  Hyperparams best_hyperparams;
  KernelSpec best_kernel;
  std::vector<GridPointResult> grid;
};

// Validation fold of every point (flat order). Each task's points are shuffled
// and dealt round-robin, so a task with n_i < folds fills folds 0..n_i-1.
// Throws InsufficientData when a task has a single point.
std::vector<int> assign_folds(const MultiTaskDataset& ds, int folds, std::uint64_t seed);

// Exhaustive grid search. Score: mean over folds of the mean over tasks of
// (validation MSE / variance of the task's targets), or of the sign error rate
// for classification. Lowest score wins, ties go to the earlier grid point.
CvResult cross_validate(const ExperimentConfig& config, const MultiTaskDataset& ds);

}  // namespace mtrl
