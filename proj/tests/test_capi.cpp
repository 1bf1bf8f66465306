#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "odx.h"
#include "support.hpp"

using nlohmann::json;
using odx::test::TempDir;
using odx::test::write_text;

namespace {

// 40 x 3 with a blatant outlier in the last row.
odx_dataset* make_test_dataset() {
    std::vector<std::string> names = {"x1", "x2", "x3"};
    std::vector<const char*> columns;
    for (const auto& n : names) columns.push_back(n.c_str());

    std::vector<double> values;
    for (int i = 0; i < 39; ++i) {
        values.push_back(std::sin(i * 0.7));
        values.push_back(std::cos(i * 0.3));
        values.push_back(std::sin(i * 0.7) + std::cos(i * 0.3));
    }
    values.insert(values.end(), {50.0, -50.0, 80.0});

    odx_dataset* data = nullptr;
    REQUIRE(odx_dataset_create(columns.data(), 3, nullptr, 40, values.data(), &data) ==
            ODX_OK);
    return data;
}

}  // namespace

TEST_CASE("version and error state") {
    CHECK(std::strlen(odx_version()) > 0);
    CHECK(std::string(odx_last_error()).empty());
}

TEST_CASE("dataset creation and accessors") {
    odx_dataset* data = make_test_dataset();
    CHECK(odx_dataset_rows(data) == 40);
    CHECK(odx_dataset_cols(data) == 3);
    CHECK(std::string(odx_dataset_column_name(data, 0)) == "x1");
    CHECK(std::string(odx_dataset_id(data, 39)) == "39");
    CHECK(odx_dataset_column_name(data, 5) == nullptr);

    double value = 0.0;
    REQUIRE(odx_dataset_value(data, 39, 2, &value) == ODX_OK);
    CHECK(value == 80.0);
    CHECK(odx_dataset_value(data, 40, 0, &value) == ODX_ERROR_CONFIG);
    CHECK(std::string(odx_last_error()).find("out of range") != std::string::npos);

    odx_dataset_free(data);
}

TEST_CASE("csv loading through the C surface") {
    TempDir tmp;
    write_text(tmp.file("d.csv"), "id,a,b\nr1,1,2\nr2,3,4\n");
    odx_dataset* data = nullptr;
    REQUIRE(odx_dataset_load_csv(tmp.file("d.csv").c_str(), "id", &data) == ODX_OK);
    CHECK(odx_dataset_rows(data) == 2);
    CHECK(std::string(odx_dataset_id(data, 0)) == "r1");
    odx_dataset_free(data);

    CHECK(odx_dataset_load_csv(tmp.file("absent.csv").c_str(), nullptr, &data) ==
          ODX_ERROR_DATA);
    CHECK(std::string(odx_last_error()).find("absent.csv") != std::string::npos);
}

TEST_CASE("detector scores single out the planted outlier") {
    odx_dataset* data = make_test_dataset();
    std::vector<double> scores(40);

    SUBCASE("lof") {
        REQUIRE(odx_lof_scores(data, 5, scores.data()) == ODX_OK);
        const auto top =
            std::max_element(scores.begin(), scores.end()) - scores.begin();
        CHECK(top == 39);
    }
    SUBCASE("iforest") {
        REQUIRE(odx_iforest_scores(data, 100, 0, 7, scores.data()) == ODX_OK);
        const auto top =
            std::max_element(scores.begin(), scores.end()) - scores.begin();
        CHECK(top == 39);
        for (double s : scores) {
            CHECK(s > 0.0);
            CHECK(s <= 1.0);
        }
    }
    SUBCASE("autoencoder with deviations") {
        odx_autoencoder* model = nullptr;
        REQUIRE(odx_autoencoder_train(
                    data, R"({"epochs": 60, "seed": 5, "encoding_dim": 1})",
                    &model) == ODX_OK);
        REQUIRE(odx_autoencoder_scores(model, data, scores.data()) == ODX_OK);
        const auto top =
            std::max_element(scores.begin(), scores.end()) - scores.begin();
        CHECK(top == 39);

        std::vector<double> deviations(40 * 3);
        REQUIRE(odx_autoencoder_deviations(model, data, deviations.data()) == ODX_OK);
        double mse = 0.0;
        for (int j = 0; j < 3; ++j) {
            mse += deviations[39 * 3 + j] * deviations[39 * 3 + j];
        }
        CHECK(mse / 3.0 == doctest::Approx(scores[39]));
        odx_autoencoder_free(model);
    }
    SUBCASE("bad autoencoder config is a config error") {
        odx_autoencoder* model = nullptr;
        CHECK(odx_autoencoder_train(data, R"({"bogus": 1})", &model) ==
              ODX_ERROR_CONFIG);
        CHECK(odx_autoencoder_train(data, R"({"encoding_dim": 9})", &model) ==
              ODX_ERROR_CONFIG);
    }
    odx_dataset_free(data);
}

TEST_CASE("ranking through the C surface") {
    const double scores[4] = {0.1, 0.9, 0.5, 0.9};
    const char* ids[4] = {"d", "c", "b", "a"};
    int64_t ranks[4] = {0, 0, 0, 0};
    int64_t deciles[4] = {0, 0, 0, 0};
    REQUIRE(odx_rank_scores(scores, ids, 4, ranks, deciles) == ODX_OK);
    CHECK(ranks[0] == 4);
    CHECK(ranks[3] == 1);  // tie at 0.9 resolved by ascending id: "a" first
    CHECK(ranks[1] == 2);
    CHECK(deciles[3] == 1);
    CHECK(deciles[0] == 10);
}

TEST_CASE("pipeline runs and reports errors through status codes") {
    TempDir tmp;
    write_text(tmp.file("d.csv"),
               "a,b\n1,2\n2,3\n3,4\n4,5\n5,6\n6,7\n7,8\n8,9\n9,10\n10,11\n"
               "11,12\n12,13\n13,14\n14,15\n15,16\n16,17\n17,18\n18,19\n19,20\n20,100\n");

    json request = {{"command", "score"},
                    {"data", tmp.file("d.csv")},
                    {"out", tmp.file("out")},
                    {"method", "lof"},
                    {"seed", 1}};
    char* response_text = nullptr;
    REQUIRE(odx_pipeline_run(request.dump().c_str(), &response_text) == ODX_OK);
    REQUIRE(response_text != nullptr);
    const json response = json::parse(response_text);
    odx_string_free(response_text);
    CHECK(response["report"]["payload"]["tables"].contains("ranking_lof"));

    CHECK(odx_pipeline_run("{nonsense", nullptr) == ODX_ERROR_CONFIG);
    json bad = {{"command", "score"}, {"data", tmp.file("nope.csv")}};
    CHECK(odx_pipeline_run(bad.dump().c_str(), nullptr) == ODX_ERROR_DATA);
    json unknown = {{"command", "score"}, {"data", tmp.file("d.csv")}, {"x", 1}};
    CHECK(odx_pipeline_run(unknown.dump().c_str(), nullptr) == ODX_ERROR_CONFIG);
}
