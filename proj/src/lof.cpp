#include "odx/lof.hpp"

#include <algorithm>
#include <cmath>

#include "odx/errors.hpp"

namespace odx {

int lof_default_k(Eigen::Index n) {
    const auto tenth = static_cast<Eigen::Index>(
        std::ceil(0.1 * static_cast<double>(n)));
    return static_cast<int>(std::min(std::max<Eigen::Index>(tenth, 50), n - 1));
}

NeighborhoodIndex knn_index(const Eigen::MatrixXd& points, int k) {
    const Eigen::Index n = points.rows();
    if (k < 1 || k > n - 1) {
        throw ConfigError("knn_index: k=" + std::to_string(k) +
                          " out of range for n=" + std::to_string(n));
    }

    NeighborhoodIndex index;
    index.k = k;
    index.neighbors.resize(static_cast<std::size_t>(n));
    index.k_distance.resize(static_cast<std::size_t>(n));

    std::vector<Neighbor> candidates;
    for (Eigen::Index p = 0; p < n; ++p) {
        candidates.clear();
        candidates.reserve(static_cast<std::size_t>(n - 1));
        for (Eigen::Index o = 0; o < n; ++o) {
            if (o == p) continue;
            candidates.push_back({(points.row(p) - points.row(o)).norm(), o});
        }
        std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end(),
                          [](const Neighbor& a, const Neighbor& b) {
                              if (a.distance != b.distance) return a.distance < b.distance;
                              return a.index < b.index;
                          });
        candidates.resize(static_cast<std::size_t>(k));
        index.k_distance[static_cast<std::size_t>(p)] = candidates.back().distance;
        index.neighbors[static_cast<std::size_t>(p)] = candidates;
    }
    return index;
}

double local_reachability_density(Eigen::Index p, const NeighborhoodIndex& index,
                                  bool* clamped) {
    const auto& nbrs = index.neighbors[static_cast<std::size_t>(p)];
    double sum = 0.0;
    for (const auto& nb : nbrs) {
        sum += std::max(index.k_distance[static_cast<std::size_t>(nb.index)], nb.distance);
    }
    const double mean = sum / static_cast<double>(nbrs.size());
    if (mean < kLofDensityEpsilon) {
        if (clamped) *clamped = true;
        return 1.0 / kLofDensityEpsilon;
    }
    if (clamped) *clamped = false;
    return 1.0 / mean;
}

LofResult lof_scores(const Eigen::MatrixXd& points, const LofConfig& config) {
    const Eigen::Index n = points.rows();
    if (n < 2) {
        throw DataError("lof_scores: need at least 2 observations");
    }
    const int k = config.k > 0 ? config.k : lof_default_k(n);
    const NeighborhoodIndex index = knn_index(points, k);

    LofResult result;
    result.lrd.resize(static_cast<std::size_t>(n));
    result.clamped.resize(static_cast<std::size_t>(n));
    for (Eigen::Index p = 0; p < n; ++p) {
        bool clamped = false;
        result.lrd[static_cast<std::size_t>(p)] =
            local_reachability_density(p, index, &clamped);
        result.clamped[static_cast<std::size_t>(p)] = clamped;
    }

    result.scores.resize(static_cast<std::size_t>(n));
    for (Eigen::Index p = 0; p < n; ++p) {
        double ratio_sum = 0.0;
        for (const auto& nb : index.neighbors[static_cast<std::size_t>(p)]) {
            ratio_sum += result.lrd[static_cast<std::size_t>(nb.index)] /
                         result.lrd[static_cast<std::size_t>(p)];
        }
        result.scores[static_cast<std::size_t>(p)] =
            ratio_sum / static_cast<double>(k);
    }
    return result;
}

}  // namespace odx
