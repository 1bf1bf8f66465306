#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "odx/errors.hpp"
#include "odx/iforest.hpp"
#include "odx/rng.hpp"

using namespace odx;

namespace {

Eigen::MatrixXd gaussian_cluster(Eigen::Index n, Eigen::Index d, Rng& rng) {
    Eigen::MatrixXd pts(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) pts(i, j) = rng.normal();
    }
    return pts;
}

}  // namespace

TEST_CASE("average path length c(m)") {
    CHECK(average_path_length(1) == 0.0);
    CHECK(average_path_length(2) == 1.0);
    // c(3) = 2 (ln 2 + gamma) - 4/3, by hand
    const double expected = 2.0 * (std::log(2.0) + 0.5772156649) - 4.0 / 3.0;
    CHECK(average_path_length(3) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(average_path_length(3) == doctest::Approx(1.2073929).epsilon(1e-6));
}

TEST_CASE("score normalization forces the 0.5 fixed point") {
    for (int psi : {2, 16, 256}) {
        CHECK(score_from_mean_path(average_path_length(psi), psi) == 0.5);
    }
    // psi = 1 floors the denominator instead of dividing by c(1) = 0
    CHECK(score_from_mean_path(0.0, 1) == 1.0);
}

TEST_CASE("two distinct points isolate at depth 1") {
    Eigen::MatrixXd pts(2, 1);
    pts << 0.0, 1.0;
    const auto forest = build_forest(pts, {.tree_count = 1, .subsample = 2, .seed = 3});
    REQUIRE(forest.trees.size() == 1);
    const auto& nodes = forest.trees[0].nodes;
    REQUIRE(nodes[0].split_dim == 0);
    CHECK(nodes[nodes[0].left].split_dim == -1);
    CHECK(nodes[nodes[0].right].split_dim == -1);
    CHECK(path_length(forest.trees[0], pts.row(0)) == 1.0);
    CHECK(path_length(forest.trees[0], pts.row(1)) == 1.0);
}

TEST_CASE("identical points collapse to a single external node") {
    Eigen::MatrixXd pts = Eigen::MatrixXd::Constant(8, 2, 3.25);
    const auto forest = build_forest(pts, {.tree_count = 4, .subsample = 8, .seed = 1});
    for (const auto& tree : forest.trees) {
        REQUIRE(tree.nodes.size() == 1);
        CHECK(tree.nodes[0].split_dim == -1);
        CHECK(tree.nodes[0].size == 8);
    }
    // every observation then scores exactly 0.5
    for (double s : iforest_scores(pts, forest)) CHECK(s == 0.5);
}

TEST_CASE("path length adds c(size) at multi-sample external nodes") {
    IsolationTree tree;
    tree.nodes.push_back({0, 0.5, 1, 2, 5});
    tree.nodes.push_back({-1, 0.0, -1, -1, 1});  // left: single sample
    tree.nodes.push_back({-1, 0.0, -1, -1, 3});  // right: residual sample of 3
    Eigen::RowVectorXd left(1), right(1);
    left << 0.0;
    right << 1.0;
    CHECK(path_length(tree, left) == 1.0);
    CHECK(path_length(tree, right) == doctest::Approx(1.0 + average_path_length(3)));
}

TEST_CASE("forest construction is deterministic and respects invariants") {
    Rng rng(9);
    const Eigen::MatrixXd pts = gaussian_cluster(300, 4, rng);
    const ForestConfig config{.tree_count = 25, .subsample = 64, .seed = 42};
    const auto a = build_forest(pts, config);
    const auto b = build_forest(pts, config);
    REQUIRE(a.trees.size() == b.trees.size());
    CHECK(a.psi == 64);
    CHECK(a.height_limit == 6);
    for (std::size_t t = 0; t < a.trees.size(); ++t) {
        REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
        for (std::size_t i = 0; i < a.trees[t].nodes.size(); ++i) {
            CHECK(a.trees[t].nodes[i].split_dim == b.trees[t].nodes[i].split_dim);
            CHECK(a.trees[t].nodes[i].split_value == b.trees[t].nodes[i].split_value);
        }
    }
    const auto sa = iforest_scores(pts, a);
    const auto sb = iforest_scores(pts, b);
    CHECK(sa == sb);

    const auto c = build_forest(pts, {.tree_count = 25, .subsample = 64, .seed = 43});
    CHECK(iforest_scores(pts, c) != sa);

    CHECK_THROWS_AS(build_forest(pts.topRows(1), config), DataError);
}

TEST_CASE("scores stay in (0, 1] for every observation and seed") {
    Rng rng(5);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Eigen::MatrixXd pts = gaussian_cluster(120, 3, rng);
        const auto forest =
            build_forest(pts, {.tree_count = 50, .subsample = 32, .seed = seed});
        for (double s : iforest_scores(pts, forest)) {
            CHECK(s > 0.0);
            CHECK(s <= 1.0);
        }
    }
}

TEST_CASE("scores depend only on the observation, not evaluation order") {
    Rng rng(6);
    const Eigen::MatrixXd pts = gaussian_cluster(80, 3, rng);
    const auto forest = build_forest(pts, {.tree_count = 40, .subsample = 64, .seed = 7});
    const auto scores = iforest_scores(pts, forest);

    Eigen::MatrixXd reversed(pts.rows(), pts.cols());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        reversed.row(i) = pts.row(pts.rows() - 1 - i);
    }
    const auto reversed_scores = iforest_scores(reversed, forest);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        CHECK(reversed_scores[static_cast<std::size_t>(i)] ==
              scores[static_cast<std::size_t>(pts.rows() - 1 - i)]);
    }
}

TEST_CASE("a planted far outlier attains the top score") {
    int first_count = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed + 1000);
        Eigen::MatrixXd pts = gaussian_cluster(201, 5, rng);
        pts.row(200).setConstant(100.0);  // ~100 sigma away

        const auto forest =
            build_forest(pts, {.tree_count = 100, .subsample = 201, .seed = seed});
        const auto scores = iforest_scores(pts, forest);
        const auto top = std::max_element(scores.begin(), scores.end()) - scores.begin();
        if (top == 200) ++first_count;
        CHECK(scores[200] > 0.5);
    }
    CHECK(first_count >= 19);
}
