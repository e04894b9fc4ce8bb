#pragma once
#include <utility>
#include <vector>

#include "mtrl/core_model.hpp"
#include "mtrl/symmetric_solver.hpp"

namespace mtrl {

// Symmetric PSD m x m matrix L used in place of Omega^-1.
class FixedInverseCovariance {
 public:
  // Throws NotSymmetric (|L_ij - L_ji| > 1e-10) or NotPSD (eigenvalue < -1e-8).
  explicit FixedInverseCovariance(MatrixXd value);
  const MatrixXd& matrix() const { return value_; }
  Index size() const { return value_.rows(); }

 private:
  MatrixXd value_;
};

// Centering matrix I - (1/m) 11^T: tr(W L W^T) = sum_i |w_i - mean_j w_j|^2.
FixedInverseCovariance laplacian_mean_regularization(Index m);

// L = 2 (D - S) so that tr(W L W^T) = sum_{i,j} s_ij |w_i - w_j|^2 over ordered pairs.
// Throws NegativeSimilarity or AsymmetricSimilarity.
FixedInverseCovariance laplacian_from_similarity(const MatrixXd& similarity);

// L = D - G for the 0/1 adjacency of the undirected edge list (0-based indices):
// tr(W L W^T) = sum over edges |w_p - w_q|^2. Throws IndexOutOfRange or SelfEdge.
FixedInverseCovariance laplacian_from_task_network(Index m,
                                                   const std::vector<std::pair<Index, Index>>& edges);

// alpha H + beta (M - H) + gamma (I - M) with H the centering matrix and
// M = E (E^T E)^-1 E^T the projector onto the cluster indicators. Clusters are
// labelled 0..k-1. Throws EmptyCluster, NotPSD, IndexOutOfRange, InvalidArgument.
FixedInverseCovariance clustered_inverse_covariance(Index m, const std::vector<int>& cluster_of,
                                                    double alpha, double beta, double gamma);

// L^+ / tr(L^+), or I/m when L^+ = 0. Reporting only.
TaskCovariance implied_covariance(const FixedInverseCovariance& l);

// One (alpha, b)-step with coupling (lambda1 I + lambda2 L)^-1; no Omega step.
// Requires lambda1 > 0.
TrainedModel fit_with_fixed_inverse(const MultiTaskDataset& ds, const KernelSpec& kernel,
                                    const Hyperparams& hp, const FixedInverseCovariance& l,
                                    const FitOptions& opts = {});

}  // namespace mtrl
