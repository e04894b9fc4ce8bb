#pragma once
#include <cstdint>

#include "mtrl/core_model.hpp"

namespace mtrl {

/*
 * Three one-dimensional tasks y = 3x + 10, y = -3x - 5 and y = 1, five points
 * each with x ~ U[0, 10] and Gaussian noise of the given variance. Task ids are
 * t1, t2, t3. Deterministic for a seed (mt19937_64).
 */
MultiTaskDataset generate_toy(std::uint64_t seed, double noise_variance = 0.1);

}  // namespace mtrl
