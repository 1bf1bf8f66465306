#include "odx/iforest.hpp"

#include <algorithm>
#include <cmath>

#include "odx/errors.hpp"
#include "odx/rng.hpp"

namespace odx {

namespace {

constexpr double kEulerMascheroni = 0.5772156649;

struct TreeBuilder {
    const Eigen::MatrixXd& points;
    Rng rng;
    int height_limit;
    std::vector<TreeNode> nodes;

    int build(std::vector<Eigen::Index>& sample, int begin, int end, int depth) {
        const int size = end - begin;
        const int node_id = static_cast<int>(nodes.size());
        nodes.push_back({});
        nodes[static_cast<std::size_t>(node_id)].size = size;
        if (size <= 1 || depth >= height_limit) {
            return node_id;
        }

        // Candidate dimensions: positive range over the node's sample.
        const Eigen::Index d = points.cols();
        std::vector<Eigen::Index> splittable;
        std::vector<double> lo(static_cast<std::size_t>(d));
        std::vector<double> hi(static_cast<std::size_t>(d));
        for (Eigen::Index j = 0; j < d; ++j) {
            double mn = points(sample[static_cast<std::size_t>(begin)], j);
            double mx = mn;
            for (int i = begin + 1; i < end; ++i) {
                const double v = points(sample[static_cast<std::size_t>(i)], j);
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
            lo[static_cast<std::size_t>(j)] = mn;
            hi[static_cast<std::size_t>(j)] = mx;
            if (mx > mn) splittable.push_back(j);
        }
        if (splittable.empty()) {
            return node_id;  // all points identical: external node
        }

        const Eigen::Index dim =
            splittable[static_cast<std::size_t>(rng.below(splittable.size()))];
        const double mn = lo[static_cast<std::size_t>(dim)];
        const double mx = hi[static_cast<std::size_t>(dim)];
        const double split = mn + (mx - mn) * rng.uniform_open();
        if (!(split > mn && split < mx)) {
            return node_id;  // range too narrow to split in double precision
        }

        auto mid_it = std::partition(sample.begin() + begin, sample.begin() + end,
                                     [&](Eigen::Index idx) {
                                         return points(idx, dim) < split;
                                     });
        const int mid = static_cast<int>(mid_it - sample.begin());

        nodes[static_cast<std::size_t>(node_id)].split_dim = static_cast<int>(dim);
        nodes[static_cast<std::size_t>(node_id)].split_value = split;
        const int left = build(sample, begin, mid, depth + 1);
        nodes[static_cast<std::size_t>(node_id)].left = left;
        const int right = build(sample, mid, end, depth + 1);
        nodes[static_cast<std::size_t>(node_id)].right = right;
        return node_id;
    }
};

}  // namespace

double average_path_length(int m) {
    if (m <= 1) return 0.0;
    if (m == 2) return 1.0;
    const double h = std::log(static_cast<double>(m - 1)) + kEulerMascheroni;
    return 2.0 * h - 2.0 * static_cast<double>(m - 1) / static_cast<double>(m);
}

double score_from_mean_path(double mean_h, int psi) {
    const double denom = psi >= 2 ? average_path_length(psi) : 1.0;
    return std::exp2(-mean_h / denom);
}

IsolationForest build_forest(const Eigen::MatrixXd& points, const ForestConfig& config) {
    const Eigen::Index n = points.rows();
    if (n < 2) {
        throw DataError("build_forest: need at least 2 observations");
    }
    if (config.tree_count < 1) throw ConfigError("tree_count must be >= 1");
    if (config.subsample < 1) throw ConfigError("subsample must be >= 1");

    IsolationForest forest;
    forest.psi = static_cast<int>(
        std::min<Eigen::Index>(config.subsample, n));
    forest.height_limit = static_cast<int>(
        std::ceil(std::log2(static_cast<double>(forest.psi))));

    for (int t = 0; t < config.tree_count; ++t) {
        Rng sampler(child_seed(config.seed, static_cast<std::uint64_t>(t) * 2));
        auto picked = sampler.sample_indices(static_cast<std::size_t>(n),
                                             static_cast<std::size_t>(forest.psi));
        std::vector<Eigen::Index> sample(picked.begin(), picked.end());

        TreeBuilder builder{points,
                            Rng(child_seed(config.seed, static_cast<std::uint64_t>(t) * 2 + 1)),
                            forest.height_limit,
                            {}};
        builder.build(sample, 0, static_cast<int>(sample.size()), 0);
        forest.trees.push_back({std::move(builder.nodes)});
    }
    return forest;
}

double path_length(const IsolationTree& tree, const Eigen::RowVectorXd& x) {
    int node = 0;
    int depth = 0;
    while (tree.nodes[static_cast<std::size_t>(node)].split_dim >= 0) {
        const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
        node = x(nd.split_dim) < nd.split_value ? nd.left : nd.right;
        ++depth;
    }
    const int size = tree.nodes[static_cast<std::size_t>(node)].size;
    return static_cast<double>(depth) + average_path_length(size);
}

std::vector<double> iforest_scores(const Eigen::MatrixXd& points,
                                   const IsolationForest& forest) {
    const Eigen::Index n = points.rows();
    std::vector<double> scores(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        double sum = 0.0;
        for (const auto& tree : forest.trees) {
            sum += path_length(tree, points.row(i));
        }
        const double mean_h = sum / static_cast<double>(forest.trees.size());
        scores[static_cast<std::size_t>(i)] = score_from_mean_path(mean_h, forest.psi);
    }
    return scores;
}

}  // namespace odx
