#include "mtrl/cross_validation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <exception>
#include <numeric>
#include <random>

#include "mtrl/error.hpp"

namespace mtrl {

void ExperimentConfig::validate() const {
  if (grid.lambda1.empty() || grid.lambda2.empty()) {
    throw Error(ErrorCode::GridEmpty, "lambda1 and lambda2 grids must be nonempty");
  }
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, fmt::format("folds must be >= 2, got {}", folds));
  kernel.validate();
}

std::vector<int> assign_folds(const MultiTaskDataset& ds, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, fmt::format("folds must be >= 2, got {}", folds));
  std::mt19937_64 rng(seed);
  std::vector<int> fold(static_cast<std::size_t>(ds.total_points()));
  for (Index i = 0; i < ds.num_tasks(); ++i) {
    const Index n = ds.task_size(i);
    if (n < 2) {
      throw Error(ErrorCode::InsufficientData,
                  fmt::format("task '{}' has {} point; cross-validation needs at least 2",
                              ds.task(i).id, n));
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (Index k = 0; k < n; ++k) {
      fold[static_cast<std::size_t>(ds.offset(i) + order[static_cast<std::size_t>(k)])] =
          static_cast<int>(k % folds);
    }
  }
  return fold;
}

namespace {

double population_variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size());
}

double fold_score(const ExperimentConfig& cfg, const MultiTaskDataset& ds, const std::vector<int>& fold,
                  int f, const Hyperparams& hp, const KernelSpec& kernel,
                  const std::vector<double>& task_var) {
  std::vector<TaskData> train;
  std::vector<std::vector<std::size_t>> held(static_cast<std::size_t>(ds.num_tasks()));
  for (Index i = 0; i < ds.num_tasks(); ++i) {
    const TaskData& t = ds.task(i);
    TaskData part{t.id, {}, {}};
    for (std::size_t j = 0; j < t.targets.size(); ++j) {
      if (fold[static_cast<std::size_t>(ds.offset(i)) + j] == f) {
        held[static_cast<std::size_t>(i)].push_back(j);
      } else {
        part.inputs.push_back(t.inputs[j]);
        part.targets.push_back(t.targets[j]);
      }
    }
    train.push_back(std::move(part));
  }
  const MultiTaskDataset train_ds(std::move(train));
  FitOptions opts;
  opts.solver = cfg.solver;
  const TrainedModel model = cfg.prior ? fit_with_fixed_inverse(train_ds, kernel, hp, *cfg.prior, opts)
                                       : fit(train_ds, kernel, hp, opts);

  double total = 0.0;
  int counted = 0;
  for (Index i = 0; i < ds.num_tasks(); ++i) {
    const auto& idx = held[static_cast<std::size_t>(i)];
    if (idx.empty()) continue;
    const TaskData& t = ds.task(i);
    MatrixXd x(static_cast<Index>(idx.size()), ds.dim());
    for (std::size_t r = 0; r < idx.size(); ++r) x.row(static_cast<Index>(r)) = t.inputs[idx[r]].transpose();
    const VectorXd pred = predict_batch(model, i, x);
    double score = 0.0;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const double y = t.targets[idx[r]];
      const double p = pred(static_cast<Index>(r));
      if (cfg.task_type == TaskType::Classification) {
        score += (y >= 0.0) != (p >= 0.0) ? 1.0 : 0.0;
      } else {
        score += (y - p) * (y - p);
      }
    }
    score /= static_cast<double>(idx.size());
    if (cfg.task_type == TaskType::Regression) score /= task_var[static_cast<std::size_t>(i)];
    total += score;
    ++counted;
  }
  return total / static_cast<double>(counted);
}

}  // namespace

CvResult cross_validate(const ExperimentConfig& config, const MultiTaskDataset& ds) {
  config.validate();
  const std::vector<int> fold = assign_folds(ds, config.folds, config.seed);

  std::vector<double> task_var;
  for (const auto& t : ds.tasks()) {
    const double v = population_variance(t.targets);
    if (config.task_type == TaskType::Regression && !(v > 1e-12)) {
      throw Error(ErrorCode::ZeroVarianceTruth, fmt::format("task '{}' targets have zero variance", t.id));
    }
    task_var.push_back(v);
  }

  CvResult result;
  std::vector<double> widths = config.grid.rbf_width;
  if (config.kernel.kind == KernelKind::Linear || widths.empty()) widths = {config.kernel.width};
  for (double l1 : config.grid.lambda1) {
    for (double l2 : config.grid.lambda2) {
      for (double s : widths) {
        GridPointResult g;
        g.hyperparams = config.base;
        g.hyperparams.lambda1 = l1;
        g.hyperparams.lambda2 = l2;
        g.hyperparams.validate();
        g.kernel = config.kernel;
        g.kernel.width = s;
        g.kernel.validate();
        result.grid.push_back(std::move(g));
      }
    }
  }

  const int folds_used = std::min(config.folds, *std::max_element(fold.begin(), fold.end()) + 1);
  const auto points = static_cast<long>(result.grid.size());
  std::vector<std::exception_ptr> failure(result.grid.size());
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < points; ++k) {
    auto& g = result.grid[static_cast<std::size_t>(k)];
    try {
      for (int f = 0; f < folds_used; ++f) {
        g.fold_scores.push_back(fold_score(config, ds, fold, f, g.hyperparams, g.kernel, task_var));
      }
      g.mean_score = std::accumulate(g.fold_scores.begin(), g.fold_scores.end(), 0.0) /
                     static_cast<double>(g.fold_scores.size());
    } catch (...) {
      failure[static_cast<std::size_t>(k)] = std::current_exception();
    }
  }
  for (const auto& e : failure) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t k = 1; k < result.grid.size(); ++k) {
    if (result.grid[k].mean_score < result.grid[result.best_index].mean_score) result.best_index = k;
  }
  result.best_hyperparams = result.grid[result.best_index].hyperparams;
  result.best_kernel = result.grid[result.best_index].kernel;
  return result;
}

}  // namespace mtrl
