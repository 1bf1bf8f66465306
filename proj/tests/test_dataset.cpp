#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "odx/csv.hpp"
#include "odx/dataset.hpp"
#include "odx/errors.hpp"
#include "odx/rng.hpp"
#include "support.hpp"

using namespace odx;
using test::TempDir;
using test::write_text;

namespace {

Dataset column_dataset(const std::vector<double>& values) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < values.size(); ++i) {
        m(static_cast<Eigen::Index>(i), 0) = values[i];
        ids.push_back(std::to_string(i));
    }
    return make_dataset({"a"}, ids, m);
}

}  // namespace

TEST_CASE("load_csv basic contract") {
    TempDir tmp;
    write_text(tmp.file("d.csv"), "a,b\n1,2\n3,4\n5,6\n");
    const Dataset data = load_csv(tmp.file("d.csv"));
    CHECK(data.rows() == 3);
    CHECK(data.dims() == 2);
    CHECK(data.ids == std::vector<std::string>{"0", "1", "2"});
    CHECK(data.columns == std::vector<std::string>{"a", "b"});
    CHECK(data.values(2, 1) == 6.0);
}

TEST_CASE("load_csv reports bad cells with row and column") {
    TempDir tmp;
    write_text(tmp.file("d.csv"), "a,b\n1,2\nabc,4\n");
    try {
        load_csv(tmp.file("d.csv"));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string what = e.what();
        CHECK(what.find("row 2") != std::string::npos);
        CHECK(what.find("'a'") != std::string::npos);
    }
}

TEST_CASE("load_csv rejects non-finite and missing cells") {
    TempDir tmp;
    write_text(tmp.file("inf.csv"), "a\ninf\n");
    CHECK_THROWS_AS(load_csv(tmp.file("inf.csv")), DataError);
    write_text(tmp.file("empty.csv"), "a,b\n1,\n");
    CHECK_THROWS_AS(load_csv(tmp.file("empty.csv")), DataError);
    write_text(tmp.file("ragged.csv"), "a,b\n1,2\n3\n");
    CHECK_THROWS_AS(load_csv(tmp.file("ragged.csv")), DataError);
    CHECK_THROWS_AS(load_csv(tmp.file("missing.csv")), DataError);
}

TEST_CASE("load_csv id column and duplicate ids") {
    TempDir tmp;
    write_text(tmp.file("d.csv"), "id,x1,x2\nfoo,1,2\nbar,3,4\n");
    const Dataset data = load_csv(tmp.file("d.csv"), std::string("id"));
    CHECK(data.dims() == 2);
    CHECK(data.ids == std::vector<std::string>{"foo", "bar"});

    write_text(tmp.file("dup.csv"), "id,x\nfoo,1\nfoo,2\n");
    CHECK_THROWS_AS(load_csv(tmp.file("dup.csv"), std::string("id")), DataError);
    CHECK_THROWS_AS(load_csv(tmp.file("d.csv"), std::string("nope")), DataError);
}

TEST_CASE("eleven numeric columns survive the loader") {
    TempDir tmp;
    std::string header = "id";
    for (int j = 1; j <= 11; ++j) header += ",x" + std::to_string(j);
    std::string row1 = "e1", row2 = "e2";
    for (int j = 1; j <= 11; ++j) {
        row1 += "," + std::to_string(j);
        row2 += "," + std::to_string(2 * j);
    }
    write_text(tmp.file("d.csv"), header + "\n" + row1 + "\n" + row2 + "\n");
    const Dataset data = load_csv(tmp.file("d.csv"), std::string("id"));
    CHECK(data.dims() == 11);
}

TEST_CASE("csv round-trip preserves rows, ids and exact values") {
    TempDir tmp;
    Rng rng(7);
    Eigen::MatrixXd values(20, 3);
    std::vector<std::string> ids;
    for (Eigen::Index i = 0; i < 20; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) values(i, j) = rng.normal() * 1e3;
        ids.push_back("row-" + std::to_string(i));
    }
    const Dataset data = make_dataset({"a", "b", "c"}, ids, values);
    save_csv(data, tmp.file("d.csv"));
    const Dataset loaded = load_csv(tmp.file("d.csv"), std::string("id"));
    CHECK(loaded.ids == data.ids);
    CHECK(loaded.columns == data.columns);
    CHECK((loaded.values - data.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("standardizer handles constant and symmetric columns") {
    SUBCASE("constant column flagged with stddev 1") {
        const auto params = fit_standardizer(column_dataset({1, 1, 1}));
        CHECK(params.mean(0) == 1.0);
        CHECK(params.stddev(0) == 1.0);
        CHECK(params.constant[0]);
    }
    SUBCASE("population denominator") {
        // [0,2]: mean 1, population stddev sqrt(((0-1)^2+(2-1)^2)/2) = 1.
        const auto params = fit_standardizer(column_dataset({0, 2}));
        CHECK(params.mean(0) == doctest::Approx(1.0));
        CHECK(params.stddev(0) == doctest::Approx(1.0));
        CHECK_FALSE(params.constant[0]);
    }
    SUBCASE("symmetric column has mean zero") {
        const auto params = fit_standardizer(column_dataset({-3, 3}));
        CHECK(params.mean(0) == doctest::Approx(0.0));
    }
    SUBCASE("single row rejected") {
        CHECK_THROWS_AS(fit_standardizer(column_dataset({1})), DataError);
    }
}

TEST_CASE("standardize maps known values") {
    Eigen::MatrixXd m(2, 1);
    m << 5, 7;
    const Dataset data = make_dataset({"a"}, {"0", "1"}, m);
    StandardizationParams params;
    params.mean = Eigen::VectorXd::Constant(1, 5.0);
    params.stddev = Eigen::VectorXd::Constant(1, 2.0);
    params.constant = {false};
    const Dataset out = standardize(data, params);
    CHECK(out.values(0, 0) == doctest::Approx(0.0));
    CHECK(out.values(1, 0) == doctest::Approx(1.0));

    const Dataset back = destandardize(out, params);
    CHECK(back.values(0, 0) == doctest::Approx(5.0));
    CHECK(back.values(1, 0) == doctest::Approx(7.0));
}

TEST_CASE("standardize dimension mismatch") {
    Eigen::MatrixXd m(2, 2);
    m << 1, 2, 3, 4;
    const Dataset data = make_dataset({"a", "b"}, {"0", "1"}, m);
    StandardizationParams params;
    params.mean = Eigen::VectorXd::Zero(1);
    params.stddev = Eigen::VectorXd::Ones(1);
    params.constant = {false};
    CHECK_THROWS_AS(standardize(data, params), DataError);
}

TEST_CASE("property: standardize/destandardize round-trip and unit moments") {
    Rng rng(42);
    for (int trial = 0; trial < 25; ++trial) {
        const auto n = static_cast<Eigen::Index>(2 + rng.below(60));
        const auto d = static_cast<Eigen::Index>(1 + rng.below(11));
        Eigen::MatrixXd values(n, d);
        std::vector<std::string> ids;
        for (Eigen::Index i = 0; i < n; ++i) {
            ids.push_back(std::to_string(i));
            for (Eigen::Index j = 0; j < d; ++j) {
                values(i, j) = rng.normal() * (1.0 + static_cast<double>(j)) +
                               static_cast<double>(j) * 10.0;
            }
        }
        std::vector<std::string> columns;
        for (Eigen::Index j = 0; j < d; ++j) columns.push_back("c" + std::to_string(j));
        const Dataset data = make_dataset(columns, ids, values);

        const auto params = fit_standardizer(data);
        const Dataset z = standardize(data, params);
        const Dataset back = destandardize(z, params);

        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) {
                const double scale = std::max(1.0, std::abs(data.values(i, j)));
                CHECK(std::abs(back.values(i, j) - data.values(i, j)) / scale < 1e-9);
            }
        }
        for (Eigen::Index j = 0; j < d; ++j) {
            if (params.constant[static_cast<std::size_t>(j)]) continue;
            const double mean = z.values.col(j).mean();
            const double var =
                (z.values.col(j).array() - mean).square().sum() / static_cast<double>(n);
            CHECK(std::abs(mean) < 1e-9);
            CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
        }
    }
}
