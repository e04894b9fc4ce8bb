#include "mtrl/priors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "mtrl/error.hpp"
#include "mtrl/kernels.hpp"
#include "mtrl/matrix_ops.hpp"

namespace mtrl {

FixedInverseCovariance::FixedInverseCovariance(MatrixXd value) : value_(std::move(value)) {
  if (value_.rows() != value_.cols() || value_.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("fixed inverse covariance must be square and nonempty, got {}x{}",
                            value_.rows(), value_.cols()));
  }
  if ((value_ - value_.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw Error(ErrorCode::NotSymmetric, "fixed inverse covariance is not symmetric");
  }
  const double lo = min_eigenvalue(value_);
  if (lo < -1e-8) {
    throw Error(ErrorCode::NotPSD,
                fmt::format("fixed inverse covariance has eigenvalue {}", lo));
  }
}

namespace {

MatrixXd centering(Index m) {
  return MatrixXd::Identity(m, m) - MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
}

}  // namespace

FixedInverseCovariance laplacian_mean_regularization(Index m) {
  if (m < 1) throw Error(ErrorCode::InvalidArgument, fmt::format("task count must be >= 1, got {}", m));
  return FixedInverseCovariance(centering(m));
}

FixedInverseCovariance laplacian_from_similarity(const MatrixXd& s) {
  if (s.rows() != s.cols() || s.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("similarity must be square and nonempty, got {}x{}", s.rows(), s.cols()));
  }
  if (s.minCoeff() < 0.0) {
    throw Error(ErrorCode::NegativeSimilarity,
                fmt::format("similarity has negative entry {}", s.minCoeff()));
  }
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::AsymmetricSimilarity, "similarity matrix is not symmetric");
  }
  MatrixXd sym = 0.5 * (s + s.transpose());
  sym.diagonal().setZero();  // s_ii pairs contribute |w_i - w_i|^2 = 0
  MatrixXd l = -2.0 * sym;
  l.diagonal() = 2.0 * sym.rowwise().sum();
  return FixedInverseCovariance(std::move(l));
}

FixedInverseCovariance laplacian_from_task_network(Index m,
                                                   const std::vector<std::pair<Index, Index>>& edges) {
  if (m < 1) throw Error(ErrorCode::InvalidArgument, fmt::format("task count must be >= 1, got {}", m));
  MatrixXd g = MatrixXd::Zero(m, m);
  for (const auto& [p, q] : edges) {
    if (p < 0 || p >= m || q < 0 || q >= m) {
      throw Error(ErrorCode::IndexOutOfRange,
                  fmt::format("edge ({}, {}) out of range for {} tasks", p, q, m));
    }
    if (p == q) throw Error(ErrorCode::SelfEdge, fmt::format("self edge on task {}", p));
    g(p, q) = 1.0;
    g(q, p) = 1.0;
  }
  MatrixXd l = -g;
  l.diagonal() = g.rowwise().sum();
  return FixedInverseCovariance(std::move(l));
}

FixedInverseCovariance clustered_inverse_covariance(Index m, const std::vector<int>& cluster_of,
                                                    double alpha, double beta, double gamma) {
  if (static_cast<Index>(cluster_of.size()) != m || m < 1) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("{} cluster labels for {} tasks", cluster_of.size(), m));
  }
  if (!(alpha > 0.0 && beta > 0.0 && gamma > 0.0)) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("alpha, beta, gamma must be positive (got {}, {}, {})", alpha, beta, gamma));
  }
  const int k = *std::max_element(cluster_of.begin(), cluster_of.end()) + 1;
  MatrixXd e = MatrixXd::Zero(m, k);
  for (Index i = 0; i < m; ++i) {
    const int c = cluster_of[static_cast<std::size_t>(i)];
    if (c < 0) throw Error(ErrorCode::IndexOutOfRange, fmt::format("task {} has cluster {}", i, c));
    e(i, c) = 1.0;
  }
  const VectorXd counts = e.colwise().sum().transpose();
  for (int c = 0; c < k; ++c) {
    if (counts(c) == 0.0) throw Error(ErrorCode::EmptyCluster, fmt::format("cluster {} is empty", c));
  }
  const MatrixXd mproj = e * counts.cwiseInverse().asDiagonal() * e.transpose();
  const MatrixXd h = centering(m);
  const MatrixXd id = MatrixXd::Identity(m, m);
  MatrixXd l = alpha * h + beta * (mproj - h) + gamma * (id - mproj);
  l = 0.5 * (l + l.transpose());
  const double lo = min_eigenvalue(l);
  if (lo < -1e-8) {
    throw Error(ErrorCode::NotPSD,
                fmt::format("alpha={}, beta={}, gamma={} give eigenvalue {}", alpha, beta, gamma, lo));
  }
  return FixedInverseCovariance(std::move(l));
}

TaskCovariance implied_covariance(const FixedInverseCovariance& l) {
  const Index m = l.size();
  const auto eig = sym_eig(l.matrix());
  const double cut = 1e-10 * std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  VectorXd inv = VectorXd::Zero(m);
  for (Index k = 0; k < m; ++k) {
    if (eig.values(k) > cut) inv(k) = 1.0 / eig.values(k);
  }
  if (inv.sum() <= 0.0) return TaskCovariance::uniform(m);
  MatrixXd pinv = eig.vectors * inv.asDiagonal() * eig.vectors.transpose();
  pinv = 0.5 * (pinv + pinv.transpose());
  pinv /= pinv.trace();
  return TaskCovariance(std::move(pinv));
}

TrainedModel fit_with_fixed_inverse(const MultiTaskDataset& ds, const KernelSpec& kernel,
                                    const Hyperparams& hp, const FixedInverseCovariance& l,
                                    const FitOptions& opts) {
  hp.validate();
  kernel.validate();
  if (l.size() != ds.num_tasks()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("prior is {}x{} for {} tasks", l.size(), l.size(), ds.num_tasks()));
  }
  const CouplingMatrix coupling = coupling_from_inverse(l.matrix(), hp);
  const MatrixXd base = base_gram(ds.inputs(), kernel);
  const MatrixXd k = couple_gram(base, ds.task_of(), coupling);
  DualSolution sol = detail::solve_dual(ds, k, opts);

  const MatrixXd& c = coupling.matrix();
  const MatrixXd gram = c * dual_task_gram(base, sol.alpha, ds.task_of(), ds.num_tasks()) * c;
  const double value = detail::training_loss(ds, k, sol.alpha, sol.bias) +
                       0.5 * hp.lambda1 * gram.trace() +
                       0.5 * hp.lambda2 * (l.matrix() * gram).trace();

  TrainedModel model = detail::make_model(ds, kernel, hp, std::move(sol), implied_covariance(l));
  model.fixed_inverse = l.matrix();
  model.objective_trace = {value};
  model.iterations = 1;
  model.converged = true;
  return model;
}

}  // namespace mtrl
