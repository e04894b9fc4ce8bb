#include <doctest.h>

#include <functional>

#include "mtrl/asymmetric_solver.hpp"
#include "mtrl/error.hpp"
#include "mtrl/matrix_ops.hpp"
#include "mtrl/symmetric_solver.hpp"
#include "oracles.hpp"

using namespace mtrl;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an mtrl::Error");
  return ErrorCode::InvalidArgument;
}

TaskData to_task(std::string id, const MatrixXd& x, const VectorXd& y) {
  TaskData t{std::move(id), {}, {}};
  for (Index j = 0; j < x.rows(); ++j) {
    t.inputs.push_back(x.row(j).transpose());
    t.targets.push_back(y(j));
  }
  return t;
}

TaskData random_task(oracle::Rng& rng, Index d, Index n, const VectorXd& w, double b) {
  const MatrixXd x = oracle::random_matrix(rng, n, d);
  VectorXd y = x * w;
  for (Index j = 0; j < n; ++j) y(j) += b + 0.1 * oracle::normal(rng);
  return to_task("new", x, y);
}

// Largest t with Omega~ - t Psi PSD.
double max_t(const MatrixXd& omega_tilde, const MatrixXd& psi) {
  Eigen::LLT<MatrixXd> llt(omega_tilde);
  if (llt.info() != Eigen::Success) return 0.0;
  const MatrixXd linv = llt.matrixL().solve(MatrixXd::Identity(psi.rows(), psi.cols()));
  const MatrixXd s = linv * psi * linv.transpose();
  return 1.0 / sym_eig(0.5 * (s + s.transpose())).values(0);
}

// Random feasible (omega, sigma) strictly inside the Schur region.
std::pair<VectorXd, double> random_feasible(oracle::Rng& rng, const TaskCovariance& omega) {
  const Index m = omega.size();
  const double sigma = oracle::uniform(rng, 0.01, 0.99);
  VectorXd z = oracle::random_matrix(rng, m, 1).col(0);
  z *= oracle::uniform(rng, 0.0, 0.999) * std::sqrt(sigma - sigma * sigma) / z.norm();
  return {psd_sqrt(omega.matrix()) * z, sigma};
}

}  // namespace

TEST_CASE("augmented covariance examples") {
  const MatrixXd a = augmented_covariance(TaskCovariance::uniform(3), VectorXd::Zero(3), 0.5);
  MatrixXd expect = MatrixXd::Zero(4, 4);
  expect.diagonal() << 1.0 / 6, 1.0 / 6, 1.0 / 6, 0.5;
  CHECK((a - expect).norm() < 1e-15);
  CHECK(a.trace() == doctest::Approx(1.0));
  const MatrixXd b = augmented_covariance(TaskCovariance::uniform(1), VectorXd::Constant(1, 0.3), 0.4);
  CHECK(b(0, 0) == doctest::Approx(0.6));
  CHECK(b(0, 1) == 0.3);
  CHECK(b(1, 0) == 0.3);
  CHECK(b(1, 1) == 0.4);
  CHECK(code_of([] { augmented_covariance(TaskCovariance::uniform(1), VectorXd::Zero(1), 1.0); }) ==
        ErrorCode::SigmaOutOfRange);
  CHECK(code_of([] { augmented_covariance(TaskCovariance::uniform(1), VectorXd::Zero(1), 0.0); }) ==
        ErrorCode::SigmaOutOfRange);
}

TEST_CASE("Schur test agrees with the eigenvalue test") {
  CHECK(schur_feasible(TaskCovariance::uniform(2), VectorXd::Zero(2), 0.5));
  CHECK_FALSE(schur_feasible(TaskCovariance::uniform(2), VectorXd::Constant(2, 0.01), 1.0));
  oracle::Rng rng(31);
  int compared = 0;
  for (int s = 0; s < 500; ++s) {
    const Index m = oracle::uniform_int(rng, 1, 5);
    const TaskCovariance omega(oracle::random_covariance(rng, m));
    const double sigma = oracle::uniform(rng, 0.001, 0.999);
    const VectorXd w = 0.4 * oracle::random_matrix(rng, m, 1).col(0);
    const double quad = w.dot(omega.matrix().inverse() * w);
    if (std::abs(quad - (sigma - sigma * sigma)) < 1e-6) continue;  // too close to call
    ++compared;
    const bool by_eig = min_eigenvalue(augmented_covariance(omega, w, sigma)) >= -1e-12;
    CHECK(schur_feasible(omega, w, sigma) == by_eig);
  }
  CHECK(compared > 450);
}

TEST_CASE("new-task weights: block-diagonal and lambda2 = 0 cases") {
  oracle::Rng rng(32);
  const MatrixXd wm = oracle::random_matrix(rng, 3, 2);
  const TaskCovariance omega(oracle::random_covariance(rng, 2));
  const TaskData t = random_task(rng, 3, 8, VectorXd::Ones(3), 0.5);
  const MultiTaskDataset single({t});
  Hyperparams hp;
  hp.lambda1 = 0.1;
  hp.lambda2 = 0.3;
  const double sigma = 0.25;
  auto [w0, b0] = solve_wb_newtask(t, wm, augmented_covariance(omega, VectorXd::Zero(2), sigma), hp);
  const auto ridge = oracle::primal_qp(single, hp.lambda1 + hp.lambda2 / sigma, 0.0, MatrixXd::Zero(1, 1));
  CHECK((w0 - ridge.w.col(0)).norm() < 1e-10);
  CHECK(b0 == doctest::Approx(ridge.b(0)));

  hp.lambda2 = 0.0;
  auto [w1, b1] = solve_wb_newtask(t, wm, augmented_covariance(omega, VectorXd::Constant(2, 0.05), 0.3), hp);
  const auto plain = oracle::primal_qp(single, hp.lambda1, 0.0, MatrixXd::Zero(1, 1));
  CHECK((w1 - plain.w.col(0)).norm() < 1e-10);
  CHECK(b1 == doctest::Approx(plain.b(0)));
}

TEST_CASE("new-task weights minimize the coupled objective") {
  oracle::Rng rng(33);
  for (int rep = 0; rep < 5; ++rep) {
    const MatrixXd wm = oracle::random_matrix(rng, 2, 1);
    const TaskCovariance omega = TaskCovariance::uniform(1);
    const TaskData t = random_task(rng, 2, 6, wm.col(0), 0.0);
    Hyperparams hp;
    hp.lambda1 = 0.05;
    hp.lambda2 = 0.5;
    const MatrixXd at = augmented_covariance(omega, VectorXd::Constant(1, 0.3), 0.4);
    auto [w, b] = solve_wb_newtask(t, wm, at, hp);
    const double j0 = new_task_objective(t, wm, w, b, at, hp);
    // gradient by central differences vanishes; every perturbation costs
    const double h = 1e-5;
    for (Index k = 0; k <= 2; ++k) {
      VectorXd wp = w, wn = w;
      double bp = b, bn = b;
      if (k < 2) {
        wp(k) += h;
        wn(k) -= h;
      } else {
        bp += h;
        bn -= h;
      }
      const double jp = new_task_objective(t, wm, wp, bp, at, hp);
      const double jn = new_task_objective(t, wm, wn, bn, at, hp);
      CHECK(std::abs(jp - jn) / (2 * h) < 1e-6);
      CHECK(jp >= j0);
      CHECK(jn >= j0);
    }
  }
}

TEST_CASE("cone step: positive and negative transfer match the grid oracle") {
  const TaskCovariance omega = TaskCovariance::uniform(1);
  for (const double sign : {1.0, -1.0}) {
    MatrixXd wt(2, 2);
    wt << 1, sign, 0, 0;  // w_1 = (1, 0), w_new = sign (1, 0)
    const MatrixXd psi = wt.transpose() * wt;
    const OmegaSigmaStep step = solve_omega_sigma(SocpInstance::build(psi, omega), omega);
    auto trace_obj = [&](double w, double s) {
      Eigen::LLT<MatrixXd> llt(oracle::augmented_m1(1.0, w, s));
      if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
      return llt.solve(psi).trace();
    };
    const auto grid = oracle::grid_search_m1(trace_obj, 1.0);
    CHECK(sign * step.omega_col(0) > 0.0);
    CHECK(std::abs(step.omega_col(0) - grid.omega) < 1e-3);
    CHECK(std::abs(step.sigma - grid.sigma) < 1e-3);
    // LMI tight with a rank-one Psi: tr(Omega~^-1 Psi) = 1/t
    const MatrixXd at = augmented_covariance(omega, step.omega_col, step.sigma);
    CHECK(min_eigenvalue(at - step.t * psi) > -1e-7);
    CHECK(at.llt().solve(psi).trace() == doctest::Approx(1.0 / step.t).epsilon(1e-5));
  }
}

TEST_CASE("cone step maximizes t on random instances") {
  oracle::Rng rng(34);
  for (int rep = 0; rep < 15; ++rep) {
    const Index m = oracle::uniform_int(rng, 1, 4);
    const Index d = oracle::uniform_int(rng, 1, 4);
    const TaskCovariance omega(oracle::random_covariance(rng, m));
    const MatrixXd wt = oracle::random_matrix(rng, d, m + 1);
    MatrixXd psi = wt.transpose() * wt;
    psi.diagonal().array() += 1e-3;
    const OmegaSigmaStep step = solve_omega_sigma(SocpInstance::build(psi, omega), omega);
    const MatrixXd at = augmented_covariance(omega, step.omega_col, step.sigma);
    CHECK(min_eigenvalue(at - step.t * psi) > -1e-7);
    CHECK(schur_feasible(omega, step.omega_col, step.sigma));
    CHECK(max_t(at, psi) == doctest::Approx(step.t).epsilon(1e-5));
    for (int s = 0; s < 200; ++s) {
      const auto [w, sg] = random_feasible(rng, omega);
      CHECK(max_t(augmented_covariance(omega, w, sg), psi) <= step.t * (1 + 1e-6));
    }
  }
}

TEST_CASE("cone step on m = 1 with a full-rank Gram matches the grid oracle") {
  oracle::Rng rng(35);
  for (int rep = 0; rep < 5; ++rep) {
    const TaskCovariance omega = TaskCovariance::uniform(1);
    const MatrixXd wt = oracle::random_matrix(rng, 3, 2);
    const MatrixXd psi = wt.transpose() * wt;
    const OmegaSigmaStep step = solve_omega_sigma(SocpInstance::build(psi, omega), omega);
    const auto grid = oracle::grid_search_m1(
        [&](double w, double s) { return -max_t(oracle::augmented_m1(1.0, w, s), psi); }, 1.0);
    CHECK(std::abs(step.omega_col(0) - grid.omega) < 1e-3);
    CHECK(std::abs(step.sigma - grid.sigma) < 1e-3);
  }
}

TEST_CASE("trace step matches the grid oracle and random samples") {
  oracle::Rng rng(36);
  for (int rep = 0; rep < 5; ++rep) {
    const TaskCovariance omega = TaskCovariance::uniform(1);
    const MatrixXd wt = oracle::random_matrix(rng, 3, 2);
    const MatrixXd psi = wt.transpose() * wt;
    const OmegaSigmaStep step = solve_omega_sigma_trace(psi, omega);
    const auto grid = oracle::grid_search_m1(
        [&](double w, double s) { return augmented_trace(psi, omega, VectorXd::Constant(1, w), s); }, 1.0);
    CHECK(std::abs(step.omega_col(0) - grid.omega) < 1e-3);
    CHECK(std::abs(step.sigma - grid.sigma) < 1e-3);
  }
  for (int rep = 0; rep < 15; ++rep) {
    const Index m = oracle::uniform_int(rng, 2, 5);
    const TaskCovariance omega(oracle::random_covariance(rng, m));
    const MatrixXd wt = oracle::random_matrix(rng, oracle::uniform_int(rng, 1, 4), m + 1);
    MatrixXd psi = wt.transpose() * wt;
    psi.diagonal().array() += 1e-4;
    const OmegaSigmaStep step = solve_omega_sigma_trace(psi, omega);
    const double best = augmented_trace(psi, omega, step.omega_col, step.sigma);
    CHECK(schur_feasible(omega, step.omega_col, step.sigma));
    for (int s = 0; s < 200; ++s) {
      const auto [w, sg] = random_feasible(rng, omega);
      CHECK(augmented_trace(psi, omega, w, sg) >= best * (1 - 1e-9));
    }
  }
}

TEST_CASE("trace and cone steps coincide for a rank-one Gram") {
  oracle::Rng rng(37);
  for (int rep = 0; rep < 5; ++rep) {
    const Index m = oracle::uniform_int(rng, 1, 4);
    const TaskCovariance omega(oracle::random_covariance(rng, m));
    const MatrixXd wt = oracle::random_matrix(rng, 1, m + 1);
    MatrixXd psi = wt.transpose() * wt;
    const OmegaSigmaStep a = solve_omega_sigma(SocpInstance::build(psi, omega), omega);
    const OmegaSigmaStep b = solve_omega_sigma_trace(psi, omega);
    CHECK(augmented_trace(psi, omega, b.omega_col, b.sigma) ==
          doctest::Approx(augmented_trace(psi, omega, a.omega_col, a.sigma)).epsilon(1e-4));
  }
}

TEST_CASE("degenerate and invalid inputs") {
  const TaskCovariance omega = TaskCovariance::uniform(2);
  CHECK(code_of([&] { SocpInstance::build(MatrixXd::Zero(3, 3), omega); }) == ErrorCode::DegenerateGram);
  CHECK(code_of([&] { solve_omega_sigma_trace(MatrixXd::Zero(3, 3), omega); }) == ErrorCode::DegenerateGram);
  CHECK(code_of([&] { solve_omega_sigma_trace(MatrixXd::Identity(3, 3), omega, 0.7); }) ==
        ErrorCode::InvalidArgument);
  CHECK(code_of([&] { SocpInstance::build(MatrixXd::Identity(2, 2), omega); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("incorporating a copy of an existing task") {
  oracle::Rng rng(38);
  const auto ds = oracle::random_dataset(rng, 3, 2, 10, 15, 0.1);
  const TrainedModel model = fit(ds, KernelSpec::linear(), Hyperparams{});
  const TrainedModel before = model;
  for (Index i = 0; i < 3; ++i) {
    TaskData copy = ds.task(i);
    copy.id = "copy";
    const NewTaskSolution sol = incorporate_new_task(model, copy, Hyperparams{});
    CHECK(new_task_correlation(sol, model.omega, i) >= 0.8);
    CHECK(sol.augmented_omega.trace() == doctest::Approx(1.0));
    for (std::size_t k = 1; k < sol.objective_trace.size(); ++k) {
      CHECK(sol.objective_trace[k] <= sol.objective_trace[k - 1] * (1 + 1e-10));
    }
  }
  CHECK(model.alpha == before.alpha);
  CHECK(model.omega.matrix() == before.omega.matrix());
}

TEST_CASE("incorporating a task with zero targets") {
  oracle::Rng rng(39);
  const auto ds = oracle::random_dataset(rng, 2, 3, 8, 10);
  const TrainedModel model = fit(ds, KernelSpec::linear(), Hyperparams{});
  const TaskData zero = to_task("zero", oracle::random_matrix(rng, 6, 3), VectorXd::Zero(6));
  const NewTaskSolution sol = incorporate_new_task(model, zero, Hyperparams{});
  CHECK(sol.w.norm() < 1e-8);
  CHECK(std::abs(sol.b) < 1e-8);
  CHECK(sol.omega_col.norm() < 1e-6);
}

TEST_CASE("cone-step alternation runs and stays feasible") {
  oracle::Rng rng(40);
  const auto ds = oracle::random_dataset(rng, 3, 2, 8, 10);
  const TrainedModel model = fit(ds, KernelSpec::linear(), Hyperparams{});
  NewTaskOptions opts;
  opts.method = OmegaStepMethod::Socp;
  const NewTaskSolution sol = incorporate_new_task(model, ds.task(0), Hyperparams{}, opts);
  CHECK(schur_feasible(model.omega, sol.omega_col, sol.sigma));
  CHECK(sol.sigma >= 1e-4);
  CHECK(sol.sigma <= 1 - 1e-4);
}

TEST_CASE("new-task preconditions") {
  oracle::Rng rng(41);
  const auto ds = oracle::random_dataset(rng, 2, 2, 5, 6);
  const TrainedModel rbf = fit(ds, KernelSpec::rbf(1.0), Hyperparams{});
  CHECK(code_of([&] { incorporate_new_task(rbf, ds.task(0), Hyperparams{}); }) ==
        ErrorCode::UnsupportedKernel);
  const TrainedModel lin = fit(ds, KernelSpec::linear(), Hyperparams{});
  const TaskData wrong = to_task("w", oracle::random_matrix(rng, 3, 4), VectorXd::Ones(3));
  CHECK(code_of([&] { incorporate_new_task(lin, wrong, Hyperparams{}); }) ==
        ErrorCode::DimensionMismatch);
  CHECK(code_of([&] {
          NewTaskSolution s;
          s.omega_col = VectorXd::Zero(2);
          s.sigma = 0.5;
          new_task_correlation(s, lin.omega, 5);
        }) == ErrorCode::TaskIndexOutOfRange);
}
