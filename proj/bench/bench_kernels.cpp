// Serial reference kernels against the OpenMP versions.
#include <benchmark/benchmark.h>

#include <map>
#include <random>

#include "mtrl/kernels.hpp"

using namespace mtrl;

namespace {

constexpr int kTasks = 8;

struct Fixture {
  MatrixXd inputs;
  std::vector<int> task_of;
  VectorXd alpha;
  CouplingMatrix coupling{MatrixXd::Identity(kTasks, kTasks)};

  explicit Fixture(Index n) : inputs(n, 16), task_of(static_cast<std::size_t>(n)), alpha(n) {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> g;
    for (Index p = 0; p < n; ++p) {
      for (Index j = 0; j < inputs.cols(); ++j) inputs(p, j) = g(rng);
      task_of[static_cast<std::size_t>(p)] = static_cast<int>(p * kTasks / n);
      alpha(p) = g(rng);
    }
    MatrixXd c = MatrixXd::Constant(kTasks, kTasks, 0.1);
    c.diagonal().setOnes();
    coupling = CouplingMatrix(c);
  }
};

const Fixture& fixture(Index n) {
  static std::map<Index, Fixture> cache;
  return cache.try_emplace(n, n).first->second;
}

template <bool Parallel>
void BM_BaseGram(benchmark::State& state) {
  const Fixture& f = fixture(state.range(0));
  const KernelSpec k = KernelSpec::rbf(2.0);
  for (auto _ : state) {
    MatrixXd g = Parallel ? base_gram(f.inputs, k) : reference::base_gram(f.inputs, k);
    benchmark::DoNotOptimize(g.data());
  }
}

template <bool Parallel>
void BM_CoupleGram(benchmark::State& state) {
  const Fixture& f = fixture(state.range(0));
  const MatrixXd base = reference::base_gram(f.inputs, KernelSpec::linear());
  for (auto _ : state) {
    MatrixXd k = Parallel ? couple_gram(base, f.task_of, f.coupling)
                          : reference::couple_gram(base, f.task_of, f.coupling);
    benchmark::DoNotOptimize(k.data());
  }
}

template <bool Parallel>
void BM_DualTaskGram(benchmark::State& state) {
  const Fixture& f = fixture(state.range(0));
  const MatrixXd base = reference::base_gram(f.inputs, KernelSpec::linear());
  for (auto _ : state) {
    MatrixXd q = Parallel ? dual_task_gram(base, f.alpha, f.task_of, kTasks)
                          : reference::dual_task_gram(base, f.alpha, f.task_of, kTasks);
    benchmark::DoNotOptimize(q.data());
  }
}

}  // namespace

BENCHMARK(BM_BaseGram<false>)->Name("base_gram/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_BaseGram<true>)->Name("base_gram/parallel")->Arg(500)->Arg(2000)->UseRealTime();
BENCHMARK(BM_CoupleGram<false>)->Name("couple_gram/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_CoupleGram<true>)->Name("couple_gram/parallel")->Arg(500)->Arg(2000)->UseRealTime();
BENCHMARK(BM_DualTaskGram<false>)->Name("dual_task_gram/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_DualTaskGram<true>)->Name("dual_task_gram/parallel")->Arg(500)->Arg(2000)->UseRealTime();

BENCHMARK_MAIN();
