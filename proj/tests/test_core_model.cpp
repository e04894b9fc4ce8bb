#include <doctest.h>

#include <functional>

#include "mtrl/core_model.hpp"
#include "mtrl/error.hpp"

using namespace mtrl;

namespace {

TaskData task(std::string id, std::vector<std::vector<double>> xs, std::vector<double> ys) {
  TaskData t{std::move(id), {}, std::move(ys)};
  for (auto& x : xs) t.inputs.push_back(Eigen::Map<VectorXd>(x.data(), static_cast<Index>(x.size())));
  return t;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an mtrl::Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("dataset flattens tasks in order") {
  MultiTaskDataset ds({task("a", {{1, 2}, {3, 4}}, {1, 2}), task("b", {{5, 6}}, {3})});
  CHECK(ds.num_tasks() == 2);
  CHECK(ds.dim() == 2);
  CHECK(ds.total_points() == 3);
  CHECK(ds.offset(1) == 2);
  CHECK(ds.offset(2) == 3);
  CHECK(ds.task_size(0) == 2);
  CHECK(ds.inputs()(2, 1) == 6.0);
  CHECK(ds.targets()(1) == 2.0);
  CHECK(ds.task_of()[2] == 1);
  CHECK(ds.find_task("b") == 1);
  CHECK_FALSE(ds.find_task("c").has_value());
}

TEST_CASE("dataset validation errors") {
  CHECK(code_of([] { MultiTaskDataset ds(std::vector<TaskData>{}); }) == ErrorCode::EmptyDataset);
  CHECK(code_of([] { MultiTaskDataset ds({task("a", {}, {})}); }) == ErrorCode::EmptyTask);
  CHECK(code_of([] { MultiTaskDataset ds({task("a", {{1}}, {1}), task("a", {{2}}, {2})}); }) ==
        ErrorCode::DuplicateTaskId);
  CHECK(code_of([] { MultiTaskDataset ds({task("a", {{1}, {1, 2}}, {1, 2})}); }) ==
        ErrorCode::DimensionMismatch);
  CHECK(code_of([] { MultiTaskDataset ds({task("a", {{1}}, {1, 2})}); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("hyperparameter and kernel validation") {
  Hyperparams hp;
  CHECK_NOTHROW(hp.validate());
  hp.lambda1 = -1;
  CHECK(code_of([&] { hp.validate(); }) == ErrorCode::InvalidHyperparams);
  hp = {};
  hp.lambda1 = 0;
  hp.lambda2 = 0;
  CHECK(code_of([&] { hp.validate(); }) == ErrorCode::InvalidHyperparams);
  hp = {};
  hp.tol = 0;
  CHECK(code_of([&] { hp.validate(); }) == ErrorCode::InvalidHyperparams);
  CHECK(code_of([] { KernelSpec::rbf(0.0).validate(); }) == ErrorCode::InvalidKernel);
  CHECK_NOTHROW(KernelSpec::rbf(2.0).validate());
}

TEST_CASE("task covariance invariants") {
  CHECK(TaskCovariance::uniform(4).matrix().isApprox(MatrixXd::Identity(4, 4) / 4.0));
  MatrixXd bad_trace = MatrixXd::Identity(2, 2);
  CHECK(code_of([&] { TaskCovariance c(bad_trace); }) == ErrorCode::InvalidCovariance);
  MatrixXd asym(2, 2);
  asym << 0.5, 0.1, 0.0, 0.5;
  CHECK(code_of([&] { TaskCovariance c(asym); }) == ErrorCode::InvalidCovariance);
  MatrixXd indefinite(2, 2);
  indefinite << 0.5, 0.9, 0.9, 0.5;
  CHECK_FALSE(is_valid_covariance(indefinite));
  MatrixXd ok(2, 2);
  ok << 0.5, 0.5, 0.5, 0.5;  // singular but valid
  CHECK(is_valid_covariance(ok));
}

TEST_CASE("model task lookup") {
  TrainedModel m;
  m.task_ids = {"x", "y"};
  m.task_sizes = {2, 1};
  CHECK(m.find_task("y") == 1);
  CHECK(m.support_task_of() == std::vector<int>{0, 0, 1});
}

TEST_CASE("error names") {
  CHECK(error_name(ErrorCode::UnknownTask) == "UnknownTask");
  CHECK(Error(ErrorCode::NotPSD, "x").name() == "NotPSD");
}
