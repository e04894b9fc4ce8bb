#include "mtrl/toy.hpp"

#include <fmt/format.h>

#include <cmath>
#include <random>

#include "mtrl/error.hpp"

namespace mtrl {

MultiTaskDataset generate_toy(std::uint64_t seed, double noise_variance) {
  if (!(noise_variance >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("noise variance must be >= 0, got {}", noise_variance));
  }
  constexpr double kSlope[3] = {3.0, -3.0, 0.0};
  constexpr double kIntercept[3] = {10.0, -5.0, 1.0};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> xdist(0.0, 10.0);
  std::normal_distribution<double> noise(0.0, std::sqrt(noise_variance));

  std::vector<TaskData> tasks;
  for (int i = 0; i < 3; ++i) {
    TaskData t{fmt::format("t{}", i + 1), {}, {}};
    for (int j = 0; j < 5; ++j) {
      const double x = xdist(rng);
      const double e = noise_variance > 0.0 ? noise(rng) : 0.0;
      t.inputs.push_back(VectorXd::Constant(1, x));
      t.targets.push_back(kSlope[i] * x + kIntercept[i] + e);
    }
    tasks.push_back(std::move(t));
  }
  return MultiTaskDataset(std::move(tasks));
}

}  // namespace mtrl
