#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace odx {

struct ForestConfig {
    int tree_count = 100;
    int subsample = 256;  // psi; effective value is min(subsample, n)
    std::uint64_t seed = 0;
};

// Flat node array; internal nodes carry (split_dim, split_value), external
// nodes carry the residual sample size with split_dim = -1.
struct TreeNode {
    int split_dim = -1;
    double split_value = 0.0;
    int left = -1;
    int right = -1;
    int size = 0;
};

struct IsolationTree {
    std::vector<TreeNode> nodes;  // root at 0
};

struct IsolationForest {
    std::vector<IsolationTree> trees;
    int psi = 0;          // effective subsample size
    int height_limit = 0;  // ceil(log2(psi))
};

// Average unsuccessful-search path length c(m): 2 H(m-1) - 2 (m-1)/m with
// H(i) = ln(i) + Euler-Mascheroni; c(1) = 0, c(2) = 1.
double average_path_length(int m);

// Eq. s = 2^(-mean_h / c(psi)); for psi < 2 the denominator floors at c(2)=1.
double score_from_mean_path(double mean_h, int psi);

// tree_count trees each on an independent seeded subsample (without
// replacement). Requires n >= 2.
IsolationForest build_forest(const Eigen::MatrixXd& points, const ForestConfig& config);

// Edges from root to termination, plus c(size) when the external node holds
// more than one sample.
double path_length(const IsolationTree& tree, const Eigen::RowVectorXd& x);

std::vector<double> iforest_scores(const Eigen::MatrixXd& points,
                                   const IsolationForest& forest);

}  // namespace odx
