#pragma once
#include <optional>
#include <vector>

namespace mtrl {

enum class TaskType { Regression, Classification };

struct Metrics {
  std::vector<double> nmse;                  // per task, regression only
  std::vector<double> classification_error;  // per task, classification only
  std::optional<double> pooled_nmse;         // all points: MSE / variance of all targets
  std::optional<double> explained_variance;  // 100 (1 - pooled_nmse)
};

// truth[i], predicted[i] hold task i's values. Variances are population
// variances. Classification compares signs (0 counts as positive).
// Throws DimensionMismatch, ZeroVarianceTruth (variance <= 1e-12), EmptyTask.
Metrics compute_metrics(const std::vector<std::vector<double>>& truth,
                        const std::vector<std::vector<double>>& predicted, TaskType type);

}  // namespace mtrl
