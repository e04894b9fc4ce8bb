#include <doctest.h>

#include "mtrl/error.hpp"
#include "mtrl/kernels.hpp"
#include "mtrl/matrix_ops.hpp"
#include "mtrl/parallel.hpp"
#include "oracles.hpp"

using namespace mtrl;

TEST_CASE("base kernels") {
  VectorXd x(2), z(2);
  x << 1, 2;
  z << 3, -1;
  CHECK(base_kernel(KernelSpec::linear(), x, z) == doctest::Approx(1.0));
  CHECK(base_kernel(KernelSpec::rbf(2.0), x, z) == doctest::Approx(std::exp(-13.0 / 8.0)));
  CHECK(base_kernel(KernelSpec::rbf(0.5), x, x) == 1.0);
  CHECK_THROWS_AS(base_kernel(KernelSpec::linear(), x, VectorXd::Ones(3)), Error);
}

TEST_CASE("coupling matrix special cases") {
  Hyperparams hp;
  hp.lambda1 = 0.3;
  hp.lambda2 = 0.7;
  // Omega = I/m: (1/m) / (l1/m + l2) on the diagonal
  const auto c = coupling_matrix(TaskCovariance::uniform(4), hp);
  CHECK((c.matrix() - MatrixXd::Identity(4, 4) * (0.25 / (0.3 * 0.25 + 0.7))).norm() < 1e-14);
  hp.lambda2 = 0.0;
  oracle::Rng rng(4);
  const TaskCovariance omega(oracle::random_covariance(rng, 3, 1));
  CHECK((coupling_matrix(omega, hp).matrix() - MatrixXd::Identity(3, 3) / 0.3).norm() < 1e-10);
}

TEST_CASE("coupling matches the explicit formula for full-rank Omega") {
  oracle::Rng rng(5);
  Hyperparams hp;
  for (int rep = 0; rep < 20; ++rep) {
    const Index m = oracle::uniform_int(rng, 1, 6);
    const MatrixXd om = oracle::random_covariance(rng, m);
    const MatrixXd expected =
        om * (hp.lambda1 * om + hp.lambda2 * MatrixXd::Identity(m, m)).inverse();
    const auto c = coupling_matrix(TaskCovariance(om), hp);
    CHECK((c.matrix() - expected).norm() < 1e-9 * expected.norm());
    // fixed-inverse route with L = Omega^-1
    const auto ci = coupling_from_inverse(om.inverse(), hp);
    CHECK((ci.matrix() - expected).norm() < 1e-8 * expected.norm());
  }
}

TEST_CASE("coupling rejects both lambdas zero") {
  Hyperparams hp;
  hp.lambda1 = 0;
  hp.lambda2 = 0;
  CHECK_THROWS_AS(coupling_matrix(TaskCovariance::uniform(2), hp), Error);
}

TEST_CASE("multitask kernel bounds") {
  const CouplingMatrix c(MatrixXd::Identity(2, 2));
  VectorXd x = VectorXd::Ones(1);
  CHECK(multitask_kernel(KernelSpec::linear(), c, 1, x, 1, x) == 1.0);
  CHECK(multitask_kernel(KernelSpec::linear(), c, 0, x, 1, x) == 0.0);
  try {
    multitask_kernel(KernelSpec::linear(), c, 2, x, 0, x);
    FAIL("expected TaskIndexOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TaskIndexOutOfRange);
  }
}

TEST_CASE("parallel kernels equal the serial reference") {
  oracle::Rng rng(6);
  for (const KernelSpec k : {KernelSpec::linear(), KernelSpec::rbf(1.3)}) {
    for (int rep = 0; rep < 5; ++rep) {
      const auto ds = oracle::random_dataset(rng, 4, 3, 20, 60);
      const TaskCovariance om(oracle::random_covariance(rng, 4));
      const auto c = coupling_matrix(om, Hyperparams{});
      const MatrixXd base = base_gram(ds.inputs(), k);
      CHECK(base == reference::base_gram(ds.inputs(), k));
      const MatrixXd probe = oracle::random_matrix(rng, 17, 3);
      CHECK(cross_gram(probe, ds.inputs(), k) == reference::cross_gram(probe, ds.inputs(), k));
      CHECK(assemble_kernel_matrix(ds, k, c) == reference::assemble_kernel_matrix(ds, k, c));
      CHECK(couple_gram(base, ds.task_of(), c) == reference::couple_gram(base, ds.task_of(), c));
      const VectorXd alpha = oracle::random_matrix(rng, ds.total_points(), 1).col(0);
      const MatrixXd q = dual_task_gram(base, alpha, ds.task_of(), 4);
      const MatrixXd qr = reference::dual_task_gram(base, alpha, ds.task_of(), 4);
      CHECK((q - qr).norm() < 1e-10 * qr.norm());
    }
  }
}

TEST_CASE("results do not depend on the thread count") {
  oracle::Rng rng(7);
  const auto ds = oracle::random_dataset(rng, 3, 2, 30, 40);
  const int saved = parallel::get_num_threads();
  parallel::set_num_threads(1);
  const MatrixXd one = base_gram(ds.inputs(), KernelSpec::rbf(0.8));
  parallel::set_num_threads(4);
  const MatrixXd four = base_gram(ds.inputs(), KernelSpec::rbf(0.8));
  parallel::set_num_threads(saved);
  CHECK(one == four);
}

TEST_CASE("multi-task kernel matrix is PSD") {
  oracle::Rng rng(8);
  const auto ds = oracle::random_dataset(rng, 3, 2, 5, 10);
  const TaskCovariance om(oracle::random_covariance(rng, 3));
  const MatrixXd k = assemble_kernel_matrix(ds, KernelSpec::rbf(1.0), coupling_matrix(om, Hyperparams{}));
  CHECK(min_eigenvalue(k) > -1e-8);
}
