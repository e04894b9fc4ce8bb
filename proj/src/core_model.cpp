#include "mtrl/core_model.hpp"

#include <fmt/format.h>

#include <cmath>
#include <unordered_set>

#include "mtrl/error.hpp"

namespace mtrl {

void validate_dataset(std::span<const TaskData> tasks) {
  if (tasks.empty()) throw Error(ErrorCode::EmptyDataset, "dataset has no tasks");
  std::unordered_set<std::string> seen;
  std::optional<Index> dim;
  for (const auto& task : tasks) {
    if (!seen.insert(task.id).second) {
      throw Error(ErrorCode::DuplicateTaskId, fmt::format("task id '{}' appears twice", task.id));
    }
    if (task.inputs.empty()) {
      throw Error(ErrorCode::EmptyTask, fmt::format("task '{}' has no points", task.id));
    }
    if (task.inputs.size() != task.targets.size()) {
      throw Error(ErrorCode::DimensionMismatch,
                  fmt::format("task '{}' has {} inputs but {} targets", task.id,
                              task.inputs.size(), task.targets.size()));
    }
    for (const auto& x : task.inputs) {
      if (!dim) dim = x.size();
      if (x.size() != *dim || *dim < 1) {
        throw Error(ErrorCode::DimensionMismatch,
                    fmt::format("task '{}' has an input of dimension {}, expected {}", task.id,
                                x.size(), *dim));
      }
    }
  }
}

MultiTaskDataset::MultiTaskDataset(std::vector<TaskData> tasks) : tasks_(std::move(tasks)) {
  validate_dataset(tasks_);
  Index total = 0;
  for (const auto& t : tasks_) {
    total += static_cast<Index>(t.inputs.size());
    offsets_.push_back(total);
  }
  const Index d = tasks_.front().inputs.front().size();
  inputs_.resize(total, d);
  targets_.resize(total);
  task_of_.reserve(static_cast<std::size_t>(total));
  Index p = 0;
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    for (std::size_t j = 0; j < tasks_[i].inputs.size(); ++j, ++p) {
      inputs_.row(p) = tasks_[i].inputs[j].transpose();
      targets_(p) = tasks_[i].targets[j];
      task_of_.push_back(static_cast<int>(i));
    }
  }
}

std::optional<Index> MultiTaskDataset::find_task(std::string_view id) const {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (tasks_[i].id == id) return static_cast<Index>(i);
  }
  return std::nullopt;
}

void Hyperparams::validate() const {
  if (!(lambda1 > 0.0) || !std::isfinite(lambda1)) {
    throw Error(ErrorCode::InvalidHyperparams, fmt::format("lambda1 must be > 0, got {}", lambda1));
  }
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) {
    throw Error(ErrorCode::InvalidHyperparams, fmt::format("lambda2 must be >= 0, got {}", lambda2));
  }
  if (!(tol > 0.0)) {
    throw Error(ErrorCode::InvalidHyperparams, fmt::format("tol must be > 0, got {}", tol));
  }
  if (max_iters < 1) {
    throw Error(ErrorCode::InvalidHyperparams,
                fmt::format("max_iters must be >= 1, got {}", max_iters));
  }
  if (!(omega_epsilon >= 0.0)) {
    throw Error(ErrorCode::InvalidHyperparams,
                fmt::format("omega_epsilon must be >= 0, got {}", omega_epsilon));
  }
}

void KernelSpec::validate() const {
  if (kind == KernelKind::Rbf && !(width > 0.0 && std::isfinite(width))) {
    throw Error(ErrorCode::InvalidKernel, fmt::format("rbf width must be > 0, got {}", width));
  }
}

std::string_view kernel_name(KernelKind kind) {
  return kind == KernelKind::Linear ? "linear" : "rbf";
}

bool is_valid_covariance(const MatrixXd& omega) {
  if (omega.rows() != omega.cols() || omega.rows() == 0) return false;
  if (!omega.allFinite()) return false;
  for (Index i = 0; i < omega.rows(); ++i) {
    for (Index j = i + 1; j < omega.cols(); ++j) {
      const double scale = std::max(1.0, std::abs(omega(i, j)));
      if (std::abs(omega(i, j) - omega(j, i)) > TaskCovariance::kSymmetryTol * scale) return false;
    }
  }
  if (std::abs(omega.trace() - 1.0) > TaskCovariance::kTraceTol) return false;
  const MatrixXd sym = 0.5 * (omega + omega.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -TaskCovariance::kPsdTol;
}

TaskCovariance::TaskCovariance(MatrixXd omega) : omega_(std::move(omega)) {
  if (!is_valid_covariance(omega_)) {
    throw Error(ErrorCode::InvalidCovariance,
                "task covariance must be square, symmetric, PSD and have unit trace");
  }
}

TaskCovariance TaskCovariance::uniform(Index m) {
  return TaskCovariance(MatrixXd::Identity(m, m) / static_cast<double>(m));
}

std::optional<Index> TrainedModel::find_task(std::string_view id) const {
  for (std::size_t i = 0; i < task_ids.size(); ++i) {
    if (task_ids[i] == id) return static_cast<Index>(i);
  }
  return std::nullopt;
}

std::vector<int> TrainedModel::support_task_of() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(support_inputs.rows()));
  for (std::size_t i = 0; i < task_sizes.size(); ++i) {
    out.insert(out.end(), static_cast<std::size_t>(task_sizes[i]), static_cast<int>(i));
  }
  return out;
}

}  // namespace mtrl
