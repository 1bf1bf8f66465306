#include "odx/synthetic.hpp"

#include <cmath>

#include "odx/errors.hpp"
#include "odx/rng.hpp"

namespace odx {

Dataset make_latent_factor_dataset(Eigen::Index n, Eigen::Index d, Eigen::Index factors,
                                   double noise_sigma, std::uint64_t seed) {
    if (n < 1 || d < 1 || factors < 1 || factors > d) {
        throw ConfigError("make_latent_factor_dataset: bad shape");
    }
    Rng rng(seed);

    Eigen::MatrixXd mixing(factors, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(factors));
    for (Eigen::Index i = 0; i < factors; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            mixing(i, j) = rng.normal() * scale;
        }
    }

    Eigen::MatrixXd latent(n, factors);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < factors; ++j) {
            latent(i, j) = rng.normal();
        }
    }

    Eigen::MatrixXd values = latent * mixing;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            values(i, j) += noise_sigma * rng.normal();
        }
    }

    std::vector<std::string> columns;
    for (Eigen::Index j = 0; j < d; ++j) columns.push_back("x" + std::to_string(j + 1));
    std::vector<std::string> ids;
    for (Eigen::Index i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    return make_dataset(std::move(columns), std::move(ids), std::move(values));
}

}  // namespace odx
