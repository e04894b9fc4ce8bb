#include "mtrl/symmetric_solver.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

#include "mtrl/error.hpp"
#include "mtrl/matrix_ops.hpp"

namespace mtrl {

std::string_view solver_name(SolverChoice s) {
  switch (s) {
    case SolverChoice::Direct: return "direct";
    case SolverChoice::Smo: return "smo";
    case SolverChoice::Auto: return "auto";
  }
  return "auto";
}

namespace {

void check_kernel_matrix(const MultiTaskDataset& ds, const MatrixXd& k) {
  if (k.rows() != ds.total_points() || k.cols() != ds.total_points()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("kernel matrix is {}x{}, dataset has {} points", k.rows(), k.cols(),
                            ds.total_points()));
  }
}

// K + Lambda/2
MatrixXd shifted_kernel(const MultiTaskDataset& ds, const MatrixXd& k) {
  MatrixXd out = k;
  const auto task = ds.task_of();
  for (Index p = 0; p < out.rows(); ++p) out(p, p) += 0.5 * static_cast<double>(ds.task_size(task[p]));
  return out;
}

}  // namespace

DualSolution solve_alpha_b_direct(const MultiTaskDataset& ds, const MatrixXd& kernel_matrix) {
  check_kernel_matrix(ds, kernel_matrix);
  const Index n = ds.total_points();
  const Index m = ds.num_tasks();
  MatrixXd system = MatrixXd::Zero(n + m, n + m);
  system.topLeftCorner(n, n) = shifted_kernel(ds, kernel_matrix);
  const auto task = ds.task_of();
  for (Index p = 0; p < n; ++p) {
    system(p, n + task[p]) = 1.0;
    system(n + task[p], p) = 1.0;
  }
  VectorXd rhs = VectorXd::Zero(n + m);
  rhs.head(n) = ds.targets();
  const VectorXd x = solve_linear(system, rhs);
  return {x.head(n), x.tail(m)};
}

DualSolution solve_alpha_b_direct(const MultiTaskDataset& ds, const KernelSpec& kernel,
                                  const CouplingMatrix& coupling) {
  return solve_alpha_b_direct(ds, assemble_kernel_matrix(ds, kernel, coupling));
}

SmoResult solve_alpha_b_smo(const MultiTaskDataset& ds, const MatrixXd& kernel_matrix,
                            const SmoOptions& opts) {
  check_kernel_matrix(ds, kernel_matrix);
  if (!(opts.kkt_tol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("kkt_tol must be > 0, got {}", opts.kkt_tol));
  }
  const Index n = ds.total_points();
  const Index m = ds.num_tasks();
  const MatrixXd kt = shifted_kernel(ds, kernel_matrix);
  const long max_iters = opts.max_iters > 0 ? opts.max_iters : std::max<long>(100000, 100 * n);

  SmoResult result;
  VectorXd alpha = VectorXd::Zero(n);
  VectorXd grad = -ds.targets();  // K~ alpha - y

  // Most violating pair (argmax, argmin of the gradient) inside task i.
  auto task_pair = [&](Index i) {
    Index hi = ds.offset(i);
    Index lo = hi;
    for (Index p = ds.offset(i) + 1; p < ds.offset(i + 1); ++p) {
      if (grad(p) > grad(hi)) hi = p;
      if (grad(p) < grad(lo)) lo = p;
    }
    return std::pair{hi, lo};
  };

  Index cursor = 0;
  long iter = 0;
  for (;; ++iter) {
    // Round-robin search for the next task still violating the KKT conditions.
    Index chosen = -1;
    double worst = 0.0;
    for (Index step = 0; step < m; ++step) {
      const Index i = (cursor + step) % m;
      const auto [hi, lo] = task_pair(i);
      const double violation = grad(hi) - grad(lo);
      worst = std::max(worst, violation);
      if (chosen < 0 && violation > opts.kkt_tol) chosen = i;
    }
    result.max_violation = worst;
    if (chosen < 0) {
      result.converged = true;
      break;
    }
    if (iter >= max_iters) break;
    cursor = (chosen + 1) % m;

    const auto [p, q] = task_pair(chosen);
    const double eta = kt(p, p) + kt(q, q) - 2.0 * kt(p, q);
    if (!(eta > 0.0)) {
      throw Error(ErrorCode::SingularSystem,
                  fmt::format("SMO pair ({}, {}) has non-positive curvature {}", p, q, eta));
    }
    const double delta = (grad(p) - grad(q)) / eta;
    alpha(p) -= delta;
    alpha(q) += delta;
#pragma omp parallel for schedule(static) if (n > 4096)
    for (Index r = 0; r < n; ++r) grad(r) += delta * (kt(r, q) - kt(r, p));
  }
  result.iterations = iter;

  VectorXd bias(m);
  for (Index i = 0; i < m; ++i) {
    bias(i) = -grad.segment(ds.offset(i), ds.task_size(i)).mean();
  }
  result.solution = {std::move(alpha), std::move(bias)};
  return result;
}

SmoResult solve_alpha_b_smo(const MultiTaskDataset& ds, const KernelSpec& kernel,
                            const CouplingMatrix& coupling, const SmoOptions& opts) {
  return solve_alpha_b_smo(ds, assemble_kernel_matrix(ds, kernel, coupling), opts);
}

double dual_objective(const MultiTaskDataset& ds, const MatrixXd& kernel_matrix,
                      const VectorXd& alpha) {
  const MatrixXd kt = shifted_kernel(ds, kernel_matrix);
  return 0.5 * alpha.dot(kt * alpha) - alpha.dot(ds.targets());
}

MatrixXd gram_wtw(const MatrixXd& base_gram, const VectorXd& alpha, std::span<const int> task_of,
                  const CouplingMatrix& coupling) {
  const MatrixXd q = dual_task_gram(base_gram, alpha, task_of, coupling.size());
  const MatrixXd& c = coupling.matrix();
  MatrixXd g = c * q * c;
  return 0.5 * (g + g.transpose());
}

MatrixXd gram_wtw(const VectorXd& alpha, const MultiTaskDataset& ds, const KernelSpec& kernel,
                  const TaskCovariance& omega, const Hyperparams& hp) {
  return gram_wtw(base_gram(ds.inputs(), kernel), alpha, ds.task_of(), coupling_matrix(omega, hp));
}

TaskCovariance update_omega(const MatrixXd& gram) {
  MatrixXd root = psd_sqrt(gram);
  const double tr = root.trace();
  if (!(tr > 1e-12)) {
    throw Error(ErrorCode::DegenerateGram,
                fmt::format("trace of (W^T W)^(1/2) is {}; W is numerically zero", tr));
  }
  root /= tr;
  // Renormalize after symmetrizing so the unit-trace invariant holds to rounding.
  root = 0.5 * (root + root.transpose());
  root /= root.trace();
  return TaskCovariance(std::move(root));
}

namespace detail {

double training_loss(const MultiTaskDataset& ds, const MatrixXd& kernel_matrix,
                     const VectorXd& alpha, const VectorXd& bias) {
  const VectorXd fitted = kernel_matrix * alpha;
  const auto task = ds.task_of();
  double loss = 0.0;
  for (Index p = 0; p < ds.total_points(); ++p) {
    const double r = ds.targets()(p) - fitted(p) - bias(task[p]);
    loss += r * r / static_cast<double>(ds.task_size(task[p]));
  }
  return loss;
}

}  // namespace detail

namespace {

// tr(W Omega^-1 W^T) + eps tr(Omega^-1), with W = A C. Since C and Omega share
// eigenvectors, tr(C Omega^-1 C Q) has eigenvalue weights mu / (l1 mu + l2)^2,
// which stay finite when Omega is singular (W has no component there).
double relation_trace(const MatrixXd& q, const TaskCovariance& omega, const Hyperparams& hp) {
  const auto eig = sym_eig(omega.matrix());
  const MatrixXd qr = eig.vectors.transpose() * q * eig.vectors;
  double tr = 0.0;
  for (Index k = 0; k < eig.values.size(); ++k) {
    const double mu = std::max(eig.values(k), 0.0);
    const double denom = hp.lambda1 * mu + hp.lambda2;
    if (mu > 0.0) tr += mu / (denom * denom) * qr(k, k);
  }
  if (hp.omega_epsilon > 0.0) {
    const double ridge = eig.values.minCoeff() > 1e-10 ? 0.0 : kOmegaRidge;
    tr += hp.omega_epsilon * psd_inverse(omega.matrix(), ridge).trace();
  }
  return tr;
}

struct StepState {
  ObjectiveTerms terms;
  MatrixXd gram;  // W^T W
};

StepState evaluate_step(const MultiTaskDataset& ds, const MatrixXd& base, const MatrixXd& kernel_matrix,
                        const DualSolution& sol, const TaskCovariance& omega,
                        const CouplingMatrix& coupling, const Hyperparams& hp) {
  StepState st;
  st.terms.loss = detail::training_loss(ds, kernel_matrix, sol.alpha, sol.bias);
  const MatrixXd q = dual_task_gram(base, sol.alpha, ds.task_of(), ds.num_tasks());
  const MatrixXd& c = coupling.matrix();
  st.gram = c * q * c;
  st.gram = 0.5 * (st.gram + st.gram.transpose());
  st.terms.ridge = 0.5 * hp.lambda1 * st.gram.trace();
  st.terms.relation = hp.lambda2 == 0.0 ? 0.0 : 0.5 * hp.lambda2 * relation_trace(q, omega, hp);
  return st;
}

}  // namespace

ObjectiveTerms objective_terms(const MultiTaskDataset& ds, const VectorXd& alpha,
                               const VectorXd& bias, const TaskCovariance& omega,
                               const KernelSpec& kernel, const Hyperparams& hp) {
  if (alpha.size() != ds.total_points() || bias.size() != ds.num_tasks() ||
      omega.size() != ds.num_tasks()) {
    throw Error(ErrorCode::DimensionMismatch, "objective: state does not match the dataset");
  }
  const MatrixXd base = base_gram(ds.inputs(), kernel);
  const CouplingMatrix coupling = coupling_matrix(omega, hp);
  const MatrixXd k = couple_gram(base, ds.task_of(), coupling);
  return evaluate_step(ds, base, k, {alpha, bias}, omega, coupling, hp).terms;
}

double objective_value(const MultiTaskDataset& ds, const VectorXd& alpha, const VectorXd& bias,
                       const TaskCovariance& omega, const KernelSpec& kernel,
                       const Hyperparams& hp) {
  return objective_terms(ds, alpha, bias, omega, kernel, hp).total();
}

double primal_objective(const MultiTaskDataset& ds, const MatrixXd& weights, const VectorXd& bias,
                        const MatrixXd& omega_inverse, const Hyperparams& hp) {
  if (weights.rows() != ds.dim() || weights.cols() != ds.num_tasks()) {
    throw Error(ErrorCode::DimensionMismatch, "primal objective: W must be d x m");
  }
  const auto task = ds.task_of();
  double loss = 0.0;
  for (Index p = 0; p < ds.total_points(); ++p) {
    const double r =
        ds.targets()(p) - ds.inputs().row(p).dot(weights.col(task[p])) - bias(task[p]);
    loss += r * r / static_cast<double>(ds.task_size(task[p]));
  }
  return loss + 0.5 * hp.lambda1 * weights.squaredNorm() +
         0.5 * hp.lambda2 * (weights * omega_inverse * weights.transpose()).trace();
}

namespace detail {

DualSolution solve_dual(const MultiTaskDataset& ds, const MatrixXd& kernel_matrix,
                        const FitOptions& opts) {
  const bool use_direct =
      opts.solver == SolverChoice::Direct ||
      (opts.solver == SolverChoice::Auto && ds.total_points() <= kAutoDirectMaxPoints);
  if (use_direct) return solve_alpha_b_direct(ds, kernel_matrix);
  SmoResult r = solve_alpha_b_smo(ds, kernel_matrix, opts.smo);
  if (!r.converged) {
    throw Error(ErrorCode::MaxIterationsExceeded,
                fmt::format("SMO stopped after {} iterations with KKT violation {}", r.iterations,
                            r.max_violation));
  }
  return std::move(r.solution);
}

TrainedModel make_model(const MultiTaskDataset& ds, const KernelSpec& kernel,
                        const Hyperparams& hp, DualSolution sol, TaskCovariance omega) {
  TrainedModel model;
  for (const auto& t : ds.tasks()) model.task_ids.push_back(t.id);
  for (Index i = 0; i < ds.num_tasks(); ++i) model.task_sizes.push_back(ds.task_size(i));
  model.alpha = std::move(sol.alpha);
  model.bias = std::move(sol.bias);
  model.omega = std::move(omega);
  model.kernel = kernel;
  model.support_inputs = ds.inputs();
  model.hyperparams = hp;
  return model;
}

}  // namespace detail

TrainedModel fit(const MultiTaskDataset& ds, const KernelSpec& kernel, const Hyperparams& hp,
                 const FitOptions& opts) {
  hp.validate();
  kernel.validate();
  const Index m = ds.num_tasks();
  const MatrixXd base = base_gram(ds.inputs(), kernel);

  TaskCovariance omega = TaskCovariance::uniform(m);
  std::vector<double> trace;
  DualSolution sol;
  bool converged = false;
  int iterations = 0;
  for (int it = 1; it <= hp.max_iters; ++it) {
    const CouplingMatrix coupling = coupling_matrix(omega, hp);
    const MatrixXd k = couple_gram(base, ds.task_of(), coupling);
    sol = detail::solve_dual(ds, k, opts);
    StepState st = evaluate_step(ds, base, k, sol, omega, coupling, hp);
    const double value = st.terms.total();
    iterations = it;
    if (!trace.empty()) {
      const double prev = trace.back();
      if (value > prev + 1e-8 * std::max(std::abs(prev), 1e-12)) {
        throw Error(ErrorCode::NonDecreaseDetected,
                    fmt::format("objective rose from {} to {} at iteration {}", prev, value, it));
      }
      trace.push_back(value);
      const double rel = std::abs(prev - value) / std::max(std::abs(prev), 1e-300);
      if (rel < hp.tol || prev == value) {
        converged = true;
        break;
      }
    } else {
      trace.push_back(value);
    }
    if (it == hp.max_iters) break;

    MatrixXd target = st.gram;
    target.diagonal().array() += hp.omega_epsilon;
    try {
      omega = update_omega(target);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateGram) throw;
      converged = true;  // W = 0: keep the previous Omega
      break;
    }
  }

  TrainedModel model = detail::make_model(ds, kernel, hp, std::move(sol), std::move(omega));
  model.objective_trace = std::move(trace);
  model.iterations = iterations;
  model.converged = converged;
  return model;
}

double predict(const TrainedModel& model, Index task, const Eigen::Ref<const VectorXd>& x) {
  MatrixXd row = x.transpose();
  return predict_batch(model, task, row)(0);
}

double predict(const TrainedModel& model, std::string_view task_id,
               const Eigen::Ref<const VectorXd>& x) {
  const auto task = model.find_task(task_id);
  if (!task) throw Error(ErrorCode::UnknownTask, fmt::format("unknown task '{}'", task_id));
  return predict(model, *task, x);
}

VectorXd predict_batch(const TrainedModel& model, Index task, const MatrixXd& inputs) {
  if (task < 0 || task >= model.num_tasks()) {
    throw Error(ErrorCode::UnknownTask, fmt::format("task index {} out of range", task));
  }
  if (inputs.cols() != model.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("input dimension {} does not match model dimension {}", inputs.cols(),
                            model.dim()));
  }
  const CouplingMatrix coupling = model_coupling(model);
  const std::vector<int> task_of = model.support_task_of();
  // Each support point's weight toward `task`.
  VectorXd weight(model.alpha.size());
  for (Index p = 0; p < weight.size(); ++p) weight(p) = model.alpha(p) * coupling(task_of[p], task);
  const MatrixXd k = cross_gram(inputs, model.support_inputs, model.kernel);
  return (k * weight).array() + model.bias(task);
}

MatrixXd explicit_weights(const TrainedModel& model) {
  if (model.kernel.kind != KernelKind::Linear) {
    throw Error(ErrorCode::UnsupportedKernel, "explicit weights exist only for the linear kernel");
  }
  const std::vector<int> task_of = model.support_task_of();
  MatrixXd a = MatrixXd::Zero(model.dim(), model.num_tasks());
  for (Index p = 0; p < model.alpha.size(); ++p) {
    a.col(task_of[p]) += model.alpha(p) * model.support_inputs.row(p).transpose();
  }
  return a * model_coupling(model).matrix();
}

}  // namespace mtrl
