#include "mtrl/metrics.hpp"

#include <fmt/format.h>

#include "mtrl/error.hpp"

namespace mtrl {

namespace {

double variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size());
}

double sse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

}  // namespace

Metrics compute_metrics(const std::vector<std::vector<double>>& truth,
                        const std::vector<std::vector<double>>& predicted, TaskType type) {
  if (truth.size() != predicted.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("{} truth tasks, {} predicted tasks", truth.size(), predicted.size()));
  }
  if (truth.empty()) throw Error(ErrorCode::EmptyDataset, "no tasks to evaluate");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].size() != predicted[i].size()) {
      throw Error(ErrorCode::DimensionMismatch,
                  fmt::format("task {}: {} targets, {} predictions", i, truth[i].size(),
                              predicted[i].size()));
    }
    if (truth[i].empty()) throw Error(ErrorCode::EmptyTask, fmt::format("task {} has no points", i));
  }

  Metrics out;
  if (type == TaskType::Classification) {
    for (std::size_t i = 0; i < truth.size(); ++i) {
      std::size_t wrong = 0;
      for (std::size_t j = 0; j < truth[i].size(); ++j) {
        if ((truth[i][j] >= 0.0) != (predicted[i][j] >= 0.0)) ++wrong;
      }
      out.classification_error.push_back(static_cast<double>(wrong) /
                                         static_cast<double>(truth[i].size()));
    }
    return out;
  }

  std::vector<double> all_truth;
  double total_sse = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double var = variance(truth[i]);
    if (!(var > 1e-12)) {
      throw Error(ErrorCode::ZeroVarianceTruth, fmt::format("task {} targets have variance {}", i, var));
    }
    const double err = sse(truth[i], predicted[i]);
    out.nmse.push_back(err / static_cast<double>(truth[i].size()) / var);
    total_sse += err;
    all_truth.insert(all_truth.end(), truth[i].begin(), truth[i].end());
  }
  const double pooled_var = variance(all_truth);
  if (!(pooled_var > 1e-12)) {
    throw Error(ErrorCode::ZeroVarianceTruth, "pooled targets have zero variance");
  }
  out.pooled_nmse = total_sse / static_cast<double>(all_truth.size()) / pooled_var;
  out.explained_variance = 100.0 * (1.0 - *out.pooled_nmse);
  return out;
}

}  // namespace mtrl
