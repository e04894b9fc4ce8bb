#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <optional>

#include "mtrl/asymmetric_solver.hpp"
#include "mtrl/error.hpp"
#include "mtrl/matrix_ops.hpp"

namespace mtrl {

namespace {

constexpr double kNewtonTol = 1e-10;
constexpr int kMaxNewtonPerStage = 200;

// Returns the barrier value at v for weight tau, or nullopt outside the domain.
// Fills the gradient and Hessian when asked.
template <class Eval>
int barrier_minimize(VectorXd& v, double tau0, double tau_max, double factor, Eval eval) {
  int steps = 0;
  VectorXd g;
  MatrixXd h;
  for (double tau = tau0; tau <= tau_max * (1.0 + 1e-12); tau *= factor) {
    for (int it = 0;; ++it) {
      if (it >= kMaxNewtonPerStage) {
        throw Error(ErrorCode::SolverStalled,
                    fmt::format("barrier stage tau={} did not converge in {} Newton steps", tau,
                                kMaxNewtonPerStage));
      }
      const auto f0 = eval(v, tau, &g, &h);
      if (!f0) throw Error(ErrorCode::SolverStalled, "barrier iterate left the feasible region");
      Eigen::LDLT<MatrixXd> ldlt(h);
      VectorXd dir = -ldlt.solve(g);
      if (ldlt.info() != Eigen::Success || !dir.allFinite()) {
        MatrixXd hr = h;
        hr.diagonal().array() += 1e-12 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
        dir = -hr.ldlt().solve(g);
      }
      const double decrement = -g.dot(dir);
      // Decrement/2 bounds the suboptimality; below ~1e-12 |f| it is rounding.
      const double floor = std::max(kNewtonTol, 1e-12 * std::abs(*f0));
      if (!(decrement > 2.0 * floor)) break;

      double s = 1.0;
      bool accepted = false;
      bool stuck = false;
      for (int ls = 0; ls < 80; ++ls, s *= 0.5) {
        const VectorXd cand = v + s * dir;
        const auto f1 = eval(cand, tau, nullptr, nullptr);
        if (f1 && *f1 <= *f0 - 0.25 * s * decrement) {
          v = cand;
          accepted = true;
          stuck = !(*f1 < *f0);
          break;
        }
      }
      ++steps;
      if (stuck) break;
      if (!accepted) {
        // Rounding floor of tau * objective reached.
        if (decrement < 1e-8 * std::max(1.0, std::abs(*f0))) break;
        throw Error(ErrorCode::SolverStalled,
                    fmt::format("line search failed at tau={} (Newton decrement {})", tau,
                                decrement));
      }
    }
  }
  return steps;
}

void check_sigma_min(double sigma_min) {
  if (!(sigma_min > 0.0 && sigma_min < 0.5)) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("sigma_min must lie in (0, 0.5), got {}", sigma_min));
  }
}

void check_psi(const MatrixXd& psi, const TaskCovariance& omega) {
  if (psi.rows() != omega.size() + 1 || psi.cols() != omega.size() + 1) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("Psi is {}x{}, expected {}x{}", psi.rows(), psi.cols(),
                            omega.size() + 1, omega.size() + 1));
  }
}

double omega_ridge(const TaskCovariance& omega) {
  return min_eigenvalue(omega.matrix()) > 1e-10 ? 0.0 : kOmegaRidge;
}

}  // namespace

SocpInstance SocpInstance::build(const MatrixXd& psi, const TaskCovariance& omega) {
  check_psi(psi, omega);
  const Index m = omega.size();
  if (!(psi.trace() > 1e-12)) {
    throw Error(ErrorCode::DegenerateGram,
                fmt::format("W~^T W~ has trace {}; the new-task step is undefined", psi.trace()));
  }
  SocpInstance s;
  const double ridge = omega_ridge(omega);
  s.omega_inv_sqrt = psd_inverse_sqrt(omega.matrix(), ridge);
  MatrixXd shifted = omega.matrix();
  shifted.diagonal().array() += ridge;
  s.omega_sqrt = psd_sqrt(shifted);
  MatrixXd p11 = s.omega_inv_sqrt * psi.topLeftCorner(m, m) * s.omega_inv_sqrt;
  const auto eig = sym_eig(0.5 * (p11 + p11.transpose()));
  s.eigenvalues = eig.values;
  s.eigenvectors = eig.vectors;
  s.psi12 = psi.col(m).head(m);
  s.psi22 = psi(m, m);
  return s;
}

OmegaSigmaStep solve_omega_sigma(const SocpInstance& socp, const TaskCovariance& omega,
                                 double sigma_min) {
  check_sigma_min(sigma_min);
  const Index m = omega.size();
  if (socp.eigenvalues.size() != m) {
    throw Error(ErrorCode::DimensionMismatch, "SOCP instance does not match Omega");
  }

  // Work with Psi / s so t is O(1); t scales back by 1/s.
  const VectorXd a_raw = socp.eigenvectors.transpose() * socp.omega_inv_sqrt * socp.psi12;
  const double scale = socp.eigenvalues.sum() + socp.psi22;
  if (!(scale > 1e-12)) {
    throw Error(ErrorCode::DegenerateGram, "SOCP instance has a zero Gram matrix");
  }
  const VectorXd lam = socp.eigenvalues / scale;
  const VectorXd a = a_raw / scale;
  const double psi22 = socp.psi22 / scale;
  const Index n = m + 2;  // (t, sigma, y_1..y_m)

  auto eval = [&](const VectorXd& v, double tau, VectorXd* g,
                  MatrixXd* h) -> std::optional<double> {
    const double t = v(0);
    const double sigma = v(1);
    const auto y = v.tail(m);
    const double lo = sigma - sigma_min;
    const double hi = 1.0 - sigma_min - sigma;
    const double c3 = sigma - sigma * sigma - y.squaredNorm();
    if (!(lo > 0.0 && hi > 0.0 && c3 > 0.0)) return std::nullopt;
    VectorXd r(m), f(m);
    double qsum = 0.0;
    for (Index j = 0; j < m; ++j) {
      r(j) = 1.0 - sigma - t * lam(j);
      if (!(r(j) > 0.0)) return std::nullopt;
      f(j) = y(j) - t * a(j);
      qsum += f(j) * f(j) / r(j);
    }
    const double c2 = sigma - t * psi22 - qsum;
    if (!(c2 > 0.0)) return std::nullopt;

    double value = -tau * t - std::log(c2) - std::log(c3) - std::log(lo) - std::log(hi);
    for (Index j = 0; j < m; ++j) value -= std::log(r(j));
    if (!g) return value;

    g->setZero(n);
    h->setZero(n, n);
    (*g)(0) = -tau;
    // -log r_j
    for (Index j = 0; j < m; ++j) {
      const double gt = -lam(j), gs = -1.0;
      (*g)(0) -= gt / r(j);
      (*g)(1) -= gs / r(j);
      const double w = 1.0 / (r(j) * r(j));
      (*h)(0, 0) += w * gt * gt;
      (*h)(0, 1) += w * gt * gs;
      (*h)(1, 0) += w * gt * gs;
      (*h)(1, 1) += w * gs * gs;
    }
    // -log c2, c2 = sigma - t psi22 - sum f_j^2 / r_j
    VectorXd dc2 = VectorXd::Zero(n);
    dc2(0) = -psi22;
    dc2(1) = 1.0;
    for (Index j = 0; j < m; ++j) {
      const Index idx[3] = {0, 1, 2 + j};
      const double df[3] = {-a(j), 0.0, 1.0};
      const double dr[3] = {-lam(j), -1.0, 0.0};
      const double qf = 2.0 * f(j) / r(j);
      const double qr = -f(j) * f(j) / (r(j) * r(j));
      const double hff = 2.0 / r(j);
      const double hfr = -2.0 * f(j) / (r(j) * r(j));
      const double hrr = 2.0 * f(j) * f(j) / (r(j) * r(j) * r(j));
      for (int u = 0; u < 3; ++u) {
        dc2(idx[u]) -= qf * df[u] + qr * dr[u];
        for (int w = 0; w < 3; ++w) {
          const double hq = hff * df[u] * df[w] + hfr * (df[u] * dr[w] + dr[u] * df[w]) +
                            hrr * dr[u] * dr[w];
          (*h)(idx[u], idx[w]) += hq / c2;  // -Hess(c2)/c2 with Hess(c2) = -sum Hess(q_j)
        }
      }
    }
    *g -= dc2 / c2;
    *h += dc2 * dc2.transpose() / (c2 * c2);
    // -log c3, c3 = sigma - sigma^2 - |y|^2
    VectorXd dc3 = VectorXd::Zero(n);
    dc3(1) = 1.0 - 2.0 * sigma;
    dc3.tail(m) = -2.0 * y;
    *g -= dc3 / c3;
    *h += dc3 * dc3.transpose() / (c3 * c3);
    (*h)(1, 1) += 2.0 / c3;
    for (Index j = 0; j < m; ++j) (*h)(2 + j, 2 + j) += 2.0 / c3;
    // sigma box
    (*g)(1) += -1.0 / lo + 1.0 / hi;
    (*h)(1, 1) += 1.0 / (lo * lo) + 1.0 / (hi * hi);
    return value;
  };

  VectorXd v = VectorXd::Zero(n);
  v(1) = 0.5;  // t = 0, y = 0 is strictly feasible
  if (!eval(v, 1.0, nullptr, nullptr)) {
    throw Error(ErrorCode::Infeasible, "no strictly feasible starting point");
  }
  // tau = 1/mu with mu halved from 1 down to 1e-8.
  const int steps = barrier_minimize(v, 1.0, 1e8, 2.0, eval);

  OmegaSigmaStep out;
  out.t = v(0) / scale;
  out.sigma = v(1);
  out.omega_col = socp.omega_sqrt * (socp.eigenvectors * v.tail(m));
  out.newton_steps = steps;
  if (!(out.t > 0.0)) {
    throw Error(ErrorCode::Infeasible,
                fmt::format("no sigma in [{}, {}] admits t > 0", sigma_min, 1.0 - sigma_min));
  }
  return out;
}

namespace {

/*
 * Second-order terms for F(B) = tr(B^-1 X) with B affine in (sigma, z):
 * B = B0 + sigma J + sum z_k E_k, J = diag(-1, .., -1, 1), E_k = e_k e_L^T + e_L e_k^T.
 * Returns T_ab = tr(E_a P E_b R), index 0 for sigma, 1 + k for z_k.
 */
MatrixXd trace_pairs(const MatrixXd& p, const MatrixXd& r) {
  const Index l = p.rows() - 1;
  const Index m = l;
  const MatrixXd pr = p * r;
  const MatrixXd rp = r * p;
  MatrixXd t(m + 1, m + 1);
  t(0, 0) = pr.trace() - 2.0 * pr(l, l) - 2.0 * rp(l, l) + 4.0 * p(l, l) * r(l, l);
  for (Index k = 0; k < m; ++k) {
    t(0, 1 + k) = -(rp(l, k) + rp(k, l)) + 2.0 * (p(l, k) * r(l, l) + p(l, l) * r(k, l));
    t(1 + k, 0) = -(pr(l, k) + pr(k, l)) + 2.0 * (p(l, l) * r(l, k) + p(k, l) * r(l, l));
    for (Index q = 0; q < m; ++q) {
      t(1 + k, 1 + q) =
          p(l, q) * r(l, k) + p(l, l) * r(q, k) + p(k, q) * r(l, l) + p(k, l) * r(q, l);
    }
  }
  return t;
}

MatrixXd whitened_block(double sigma, const VectorXd& z) {
  const Index m = z.size();
  MatrixXd b = MatrixXd::Zero(m + 1, m + 1);
  b.topLeftCorner(m, m).diagonal().setConstant(1.0 - sigma);
  b.col(m).head(m) = z;
  b.row(m).head(m) = z.transpose();
  b(m, m) = sigma;
  return b;
}

}  // namespace

OmegaSigmaStep solve_omega_sigma_trace(const MatrixXd& psi, const TaskCovariance& omega,
                                       double sigma_min) {
  check_sigma_min(sigma_min);
  check_psi(psi, omega);
  const Index m = omega.size();
  if (!(psi.trace() > 1e-12)) {
    throw Error(ErrorCode::DegenerateGram,
                fmt::format("W~^T W~ has trace {}; the new-task step is undefined", psi.trace()));
  }
  // Whiten with D = blkdiag(Omega^(1/2), 1): Omega~ = D B D, tr(Omega~^-1 Psi) = tr(B^-1 X).
  const double ridge = omega_ridge(omega);
  MatrixXd shifted = omega.matrix();
  shifted.diagonal().array() += ridge;
  const MatrixXd root = psd_sqrt(shifted);
  MatrixXd d_inv = MatrixXd::Identity(m + 1, m + 1);
  d_inv.topLeftCorner(m, m) = psd_inverse_sqrt(omega.matrix(), ridge);
  MatrixXd x = d_inv * psi * d_inv;
  x = 0.5 * (x + x.transpose());
  x /= x.trace();

  auto eval = [&](const VectorXd& v, double tau, VectorXd* g,
                  MatrixXd* h) -> std::optional<double> {
    const double sigma = v(0);
    const double lo = sigma - sigma_min;
    const double hi = 1.0 - sigma_min - sigma;
    if (!(lo > 0.0 && hi > 0.0)) return std::nullopt;
    const MatrixXd b = whitened_block(sigma, v.tail(m));
    Eigen::LLT<MatrixXd> llt(b);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const MatrixXd p = llt.solve(MatrixXd::Identity(m + 1, m + 1));
    const auto diag = llt.matrixLLT().diagonal();
    if (!(diag.minCoeff() > 0.0)) return std::nullopt;
    const double logdet = 2.0 * diag.array().log().sum();
    const double f = (p * x).trace();
    const double value = tau * f - logdet - std::log(lo) - std::log(hi);
    if (!g) return value;

    const MatrixXd r = p * x * p;
    g->resize(m + 1);
    // dF/dsigma = -tr(J R), dF/dz_k = -2 R_kL; -log det B gives the same with P.
    const double jr = r.trace() - 2.0 * r(m, m);
    const double jp = p.trace() - 2.0 * p(m, m);
    (*g)(0) = tau * jr + jp - 1.0 / lo + 1.0 / hi;
    for (Index k = 0; k < m; ++k) (*g)(1 + k) = -2.0 * tau * r(k, m) - 2.0 * p(k, m);
    const MatrixXd tf = trace_pairs(p, r);
    *h = tau * (tf + tf.transpose()) + trace_pairs(p, p);
    (*h)(0, 0) += 1.0 / (lo * lo) + 1.0 / (hi * hi);
    *h = 0.5 * (*h + h->transpose());
    return value;
  };

  VectorXd v = VectorXd::Zero(m + 1);
  v(0) = 0.5;
  const int steps = barrier_minimize(v, 1.0, 1e12, 4.0, eval);

  OmegaSigmaStep out;
  out.sigma = v(0);
  out.omega_col = root * v.tail(m);
  out.newton_steps = steps;
  return out;
}

double augmented_trace(const MatrixXd& psi, const TaskCovariance& omega, const VectorXd& omega_col,
                       double sigma) {
  check_psi(psi, omega);
  const MatrixXd at = augmented_covariance(omega, omega_col, sigma);
  Eigen::LLT<MatrixXd> llt(at);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  return llt.solve(psi).trace();
}

}  // namespace mtrl
