#include "mtrl/asymmetric_solver.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "mtrl/error.hpp"
#include "mtrl/matrix_ops.hpp"
#include "mtrl/symmetric_solver.hpp"

namespace mtrl {

MatrixXd augmented_covariance(const TaskCovariance& omega, const VectorXd& omega_col, double sigma) {
  const Index m = omega.size();
  if (omega_col.size() != m) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("omega column has length {}, expected {}", omega_col.size(), m));
  }
  if (!(sigma > 0.0 && sigma < 1.0)) {
    throw Error(ErrorCode::SigmaOutOfRange, fmt::format("sigma must lie in (0, 1), got {}", sigma));
  }
  MatrixXd out(m + 1, m + 1);
  out.topLeftCorner(m, m) = (1.0 - sigma) * omega.matrix();
  out.col(m).head(m) = omega_col;
  out.row(m).head(m) = omega_col.transpose();
  out(m, m) = sigma;
  return out;
}

bool schur_feasible(const TaskCovariance& omega, const VectorXd& omega_col, double sigma) {
  if (omega_col.size() != omega.size()) return false;
  MatrixXd shifted = omega.matrix();
  if (min_eigenvalue(shifted) <= 1e-10) shifted.diagonal().array() += kOmegaRidge;
  const double quad = omega_col.dot(shifted.llt().solve(omega_col));
  return quad <= sigma - sigma * sigma + 1e-10;
}

namespace {

struct TaskMatrices {
  MatrixXd x;  // n x d
  VectorXd y;
};

TaskMatrices task_matrices(const TaskData& task) {
  TaskMatrices tm;
  const Index n = static_cast<Index>(task.inputs.size());
  const Index d = n > 0 ? task.inputs.front().size() : 0;
  tm.x.resize(n, d);
  tm.y.resize(n);
  for (Index j = 0; j < n; ++j) {
    tm.x.row(j) = task.inputs[static_cast<std::size_t>(j)].transpose();
    tm.y(j) = task.targets[static_cast<std::size_t>(j)];
  }
  return tm;
}

MatrixXd augmented_inverse(const MatrixXd& omega_tilde) {
  Eigen::LLT<MatrixXd> llt(omega_tilde);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularSystem, "augmented covariance is not positive definite");
  }
  return llt.solve(MatrixXd::Identity(omega_tilde.rows(), omega_tilde.cols()));
}

void check_pieces(const TaskData& task, const MatrixXd& weights, const MatrixXd& omega_tilde) {
  validate_dataset(std::span<const TaskData>(&task, 1));
  const Index d = task.inputs.front().size();
  if (weights.rows() != d || omega_tilde.rows() != weights.cols() + 1 ||
      omega_tilde.cols() != weights.cols() + 1) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("new task d={}, W is {}x{}, augmented covariance is {}x{}", d,
                            weights.rows(), weights.cols(), omega_tilde.rows(), omega_tilde.cols()));
  }
}

MatrixXd stack_weights(const MatrixXd& existing, const VectorXd& w) {
  MatrixXd out(existing.rows(), existing.cols() + 1);
  out << existing, w;
  return out;
}

}  // namespace

std::pair<VectorXd, double> solve_wb_newtask(const TaskData& task, const MatrixXd& existing_weights,
                                             const MatrixXd& omega_tilde, const Hyperparams& hp) {
  check_pieces(task, existing_weights, omega_tilde);
  const auto [x, y] = task_matrices(task);
  const Index n = x.rows();
  const Index d = x.cols();
  const Index m = existing_weights.cols();
  const double c = 2.0 / static_cast<double>(n);

  double ridge = hp.lambda1;
  VectorXd offset = VectorXd::Zero(d);
  if (hp.lambda2 != 0.0) {
    const MatrixXd p = augmented_inverse(omega_tilde);
    ridge += hp.lambda2 * p(m, m);
    offset = hp.lambda2 * existing_weights * p.col(m).head(m);
  }

  MatrixXd sys(d + 1, d + 1);
  sys.topLeftCorner(d, d) = c * x.transpose() * x;
  sys.topLeftCorner(d, d).diagonal().array() += ridge;
  const VectorXd xsum = x.colwise().sum().transpose();
  sys.col(d).head(d) = c * xsum;
  sys.row(d).head(d) = c * xsum.transpose();
  sys(d, d) = 2.0;
  VectorXd rhs(d + 1);
  rhs.head(d) = c * x.transpose() * y - offset;
  rhs(d) = c * y.sum();
  const VectorXd sol = solve_linear(sys, rhs);
  return {sol.head(d), sol(d)};
}

double new_task_objective(const TaskData& task, const MatrixXd& existing_weights,
                          const VectorXd& w, double b, const MatrixXd& omega_tilde,
                          const Hyperparams& hp) {
  check_pieces(task, existing_weights, omega_tilde);
  const auto [x, y] = task_matrices(task);
  const double loss = (y - x * w - VectorXd::Constant(y.size(), b)).squaredNorm() /
                      static_cast<double>(y.size());
  double value = loss + 0.5 * hp.lambda1 * w.squaredNorm();
  if (hp.lambda2 != 0.0) {
    const MatrixXd p = augmented_inverse(omega_tilde);
    const MatrixXd wt = stack_weights(existing_weights, w);
    const double rel = (wt * p * wt.transpose()).trace() + hp.omega_epsilon * p.trace();
    value += 0.5 * hp.lambda2 * rel;
  }
  return value;
}

NewTaskSolution incorporate_new_task(const TrainedModel& model, const TaskData& task,
                                     const Hyperparams& hp, const NewTaskOptions& opts) {
  hp.validate();
  if (model.kernel.kind != KernelKind::Linear) {
    throw Error(ErrorCode::UnsupportedKernel, "new-task incorporation supports the linear kernel only");
  }
  if (model.fixed_inverse) {
    throw Error(ErrorCode::InvalidArgument,
                "new-task incorporation needs a model with a learned task covariance");
  }
  validate_dataset(std::span<const TaskData>(&task, 1));
  if (task.inputs.front().size() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("new task has dimension {}, model has {}", task.inputs.front().size(),
                            model.dim()));
  }

  const MatrixXd weights = explicit_weights(model);
  const TaskCovariance& omega = model.omega;
  const Index m = omega.size();

  NewTaskSolution out;
  VectorXd omega_col = VectorXd::Zero(m);
  double sigma = std::clamp(1.0 / static_cast<double>(m + 1), opts.sigma_min, 1.0 - opts.sigma_min);
  VectorXd w;
  double b = 0.0;

  for (int it = 1; it <= hp.max_iters; ++it) {
    const MatrixXd omega_tilde = augmented_covariance(omega, omega_col, sigma);
    std::tie(w, b) = solve_wb_newtask(task, weights, omega_tilde, hp);
    const double value = new_task_objective(task, weights, w, b, omega_tilde, hp);
    out.iterations = it;
    if (!out.objective_trace.empty()) {
      const double prev = out.objective_trace.back();
      if (opts.method == OmegaStepMethod::Exact &&
          value > prev + 1e-8 * std::max(std::abs(prev), 1e-12)) {
        throw Error(ErrorCode::NonDecreaseDetected,
                    fmt::format("new-task objective rose from {} to {} at iteration {}", prev,
                                value, it));
      }
      out.objective_trace.push_back(value);
      if (std::abs(prev - value) <= hp.tol * std::max(std::abs(prev), 1e-300)) {
        out.converged = true;
        break;
      }
    } else {
      out.objective_trace.push_back(value);
    }
    if (it == hp.max_iters || hp.lambda2 == 0.0) {
      // lambda2 = 0: (w, b) no longer depends on Omega~, one step is exact.
      out.converged = out.converged || hp.lambda2 == 0.0;
      break;
    }

    const MatrixXd wt = stack_weights(weights, w);
    MatrixXd psi = wt.transpose() * wt;
    psi.diagonal().array() += hp.omega_epsilon;
    if (!(psi.trace() > 1e-12)) {
      out.converged = true;  // all-zero W~: keep the current (omega, sigma)
      break;
    }
    OmegaSigmaStep step;
    if (opts.method == OmegaStepMethod::Exact) {
      step = solve_omega_sigma_trace(psi, omega, opts.sigma_min);
      // Never trade the current point for a worse one at the solver's tolerance.
      if (augmented_trace(psi, omega, step.omega_col, step.sigma) >
          augmented_trace(psi, omega, omega_col, sigma)) {
        continue;
      }
    } else {
      step = solve_omega_sigma(SocpInstance::build(psi, omega), omega, opts.sigma_min);
    }
    omega_col = step.omega_col;
    sigma = step.sigma;
  }

  out.w = std::move(w);
  out.b = b;
  out.omega_col = omega_col;
  out.sigma = sigma;
  out.augmented_omega = augmented_covariance(omega, omega_col, sigma);
  return out;
}

double new_task_correlation(const NewTaskSolution& sol, const TaskCovariance& omega, Index task) {
  if (task < 0 || task >= omega.size()) {
    throw Error(ErrorCode::TaskIndexOutOfRange,
                fmt::format("task {} out of range for {} tasks", task, omega.size()));
  }
  const double var = (1.0 - sol.sigma) * omega.matrix()(task, task) * sol.sigma;
  if (!(var > 0.0)) {
    throw Error(ErrorCode::DegenerateTaskVariance,
                fmt::format("zero variance between the new task and task {}", task));
  }
  return sol.omega_col(task) / std::sqrt(var);
}

}  // namespace mtrl
