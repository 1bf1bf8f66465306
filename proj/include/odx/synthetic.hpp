#pragma once

#include <cstdint>

#include "odx/dataset.hpp"

namespace odx {

// n observations on a `factors`-dimensional linear latent structure embedded
// in d dimensions, plus isotropic Gaussian noise. Columns are named x1..xd,
// ids are 0-based row indices. Deterministic in the seed.
Dataset make_latent_factor_dataset(Eigen::Index n, Eigen::Index d, Eigen::Index factors,
                                   double noise_sigma, std::uint64_t seed);

}  // namespace odx
