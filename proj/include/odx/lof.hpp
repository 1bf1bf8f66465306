#pragma once

#include <Eigen/Core>
#include <vector>

namespace odx {

struct LofConfig {
    // k <= 0 selects the default: max(ceil(0.1 * n), 50), capped at n - 1.
    int k = 0;
};

int lof_default_k(Eigen::Index n);

struct Neighbor {
    double distance;
    Eigen::Index index;
};

// Exact Euclidean k nearest neighbors per observation, distances ascending,
// ties at equal distance broken by ascending observation index. A point is
// never its own neighbor.
struct NeighborhoodIndex {
    int k = 0;
    std::vector<std::vector<Neighbor>> neighbors;  // exactly k per observation
    std::vector<double> k_distance;                // distance to the k-th neighbor
};

// points: n x d, one observation per row. Requires n >= k + 1.
NeighborhoodIndex knn_index(const Eigen::MatrixXd& points, int k);

inline constexpr double kLofDensityEpsilon = 1e-12;

// Local reachability density: inverse mean reachability distance over the
// neighborhood, reach(p,o) = max(k_distance(o), d(p,o)). Means below the
// epsilon are clamped (coincident duplicates).
double local_reachability_density(Eigen::Index p, const NeighborhoodIndex& index,
                                  bool* clamped = nullptr);

struct LofResult {
    std::vector<double> scores;
    std::vector<double> lrd;
    std::vector<bool> clamped;  // lrd hit the epsilon clamp
};

LofResult lof_scores(const Eigen::MatrixXd& points, const LofConfig& config = {});

}  // namespace odx
