#pragma once
#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mtrl {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// One task's training points. inputs[j] is x_j, targets[j] is y_j.
struct TaskData {
  std::string id;
  std::vector<VectorXd> inputs;
  std::vector<double> targets;
};

// Throws DimensionMismatch, EmptyTask, EmptyDataset or DuplicateTaskId.
void validate_dataset(std::span<const TaskData> tasks);

/*
 * Validated multi-task training set.
 *
 * Points are addressed by a flat index in task-concatenation order: task 0's
 * points first, then task 1's, and so on. Every N-sized vector or N x N matrix
 * in the library (dual coefficients, kernel matrices, the diagonal Lambda) uses
 * this order.
 */
class MultiTaskDataset {
 public:
  MultiTaskDataset() = default;
  explicit MultiTaskDataset(std::vector<TaskData> tasks);

  Index num_tasks() const { return static_cast<Index>(tasks_.size()); }
  Index dim() const { return inputs_.cols(); }
  Index total_points() const { return inputs_.rows(); }

  const std::vector<TaskData>& tasks() const { return tasks_; }
  const TaskData& task(Index i) const { return tasks_[static_cast<std::size_t>(i)]; }
  std::optional<Index> find_task(std::string_view id) const;

  // Flat index of task i's first point; offset(num_tasks()) == total_points().
  Index offset(Index i) const { return offsets_[static_cast<std::size_t>(i)]; }
  Index task_size(Index i) const { return offset(i + 1) - offset(i); }

  // N x d, row p is the p-th point in flat order.
  const MatrixXd& inputs() const { return inputs_; }
  const VectorXd& targets() const { return targets_; }
  // Task index of each flat point.
  std::span<const int> task_of() const { return task_of_; }

 private:
  std::vector<TaskData> tasks_;
  std::vector<Index> offsets_{0};
  std::vector<int> task_of_;
  MatrixXd inputs_;
  VectorXd targets_;
};

struct Hyperparams {
  double lambda1 = 0.01;  // ridge weight
  double lambda2 = 0.005; // task-relationship weight
  double tol = 1e-6;      // relative objective change for convergence
  int max_iters = 50;
  // Added to W^T W before the covariance step (and as eps * tr(Omega^-1) in the
  // objective). Keeps Omega full rank when the feature dimension is below the
  // task count. 0 gives the unregularized objective.
  double omega_epsilon = 1e-5;

  // Throws InvalidHyperparams.
  void validate() const;
};

enum class KernelKind { Linear, Rbf };

struct KernelSpec {
  KernelKind kind = KernelKind::Linear;
  double width = 1.0;  // RBF s in exp(-|x-z|^2 / (2 s^2))

  static KernelSpec linear() { return {}; }
  static KernelSpec rbf(double width) { return {KernelKind::Rbf, width}; }

  // Throws InvalidKernel.
  void validate() const;
};

std::string_view kernel_name(KernelKind kind);

// m x m symmetric PSD matrix with unit trace.
class TaskCovariance {
 public:
  static constexpr double kSymmetryTol = 1e-10;
  static constexpr double kPsdTol = 1e-8;
  static constexpr double kTraceTol = 1e-8;

  // Throws InvalidCovariance if any invariant fails.
  explicit TaskCovariance(MatrixXd omega);

  // (1/m) I, every task unrelated.
  static TaskCovariance uniform(Index m);

  const MatrixXd& matrix() const { return omega_; }
  Index size() const { return omega_.rows(); }

 private:
  MatrixXd omega_;
};

// Returns true iff the three TaskCovariance invariants hold for `omega`.
bool is_valid_covariance(const MatrixXd& omega);

/*
 * Result of a symmetric fit (or of a fit with a fixed task-relationship prior).
 *
 * Predictions use the coupling Omega (lambda1 Omega + lambda2 I)^-1 derived from
 * `omega`, unless `fixed_inverse` is present, in which case the coupling is
 * (lambda1 I + lambda2 L)^-1 and `omega` is informational only.
 */
struct TrainedModel {
  std::vector<std::string> task_ids;
  std::vector<Index> task_sizes;
  VectorXd alpha;           // length N, flat order
  VectorXd bias;            // length m
  TaskCovariance omega = TaskCovariance::uniform(1);
  KernelSpec kernel;
  MatrixXd support_inputs;  // N x d, flat order
  Hyperparams hyperparams;
  std::optional<MatrixXd> fixed_inverse;
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;

  Index num_tasks() const { return static_cast<Index>(task_ids.size()); }
  Index dim() const { return support_inputs.cols(); }
  std::optional<Index> find_task(std::string_view id) const;
  // Task index of each support point.
  std::vector<int> support_task_of() const;
};

struct NewTaskSolution {
  VectorXd w;
  double b = 0.0;
  VectorXd omega_col;         // covariances with the m existing tasks
  double sigma = 0.0;         // new task variance
  MatrixXd augmented_omega;   // (m+1) x (m+1)
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
};

}  // namespace mtrl
