#include "odx.h"

#include <algorithm>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "odx/autoencoder.hpp"
#include "odx/dataset.hpp"
#include "odx/errors.hpp"
#include "odx/iforest.hpp"
#include "odx/lof.hpp"
#include "odx/pipeline.hpp"
#include "odx/ranking.hpp"
#include "odx/rng.hpp"
#include "odx/version.hpp"

struct odx_dataset {
    odx::Dataset data;
};

struct odx_autoencoder {
    odx::NetworkParams params;
    odx::StandardizationParams standardizer;
};

namespace {

thread_local std::string g_last_error;

int set_error(const std::exception& e, int code) {
    g_last_error = e.what();
    return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return ODX_OK;
    } catch (const odx::Error& e) {
        return set_error(e, static_cast<int>(e.code()));
    } catch (const std::exception& e) {
        return set_error(e, ODX_ERROR_DATA);
    }
}

char* copy_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

odx::NetworkConfig parse_ae_config(const char* config_json, const odx::Dataset& data) {
    nlohmann::json parsed = nlohmann::json::object();
    if (config_json && *config_json) {
        parsed = nlohmann::json::parse(config_json, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object()) {
            throw odx::ConfigError("autoencoder config is not a JSON object");
        }
    }
    odx::NetworkConfig config;
    config.input_dim = static_cast<int>(data.dims());
    const auto d = data.dims();
    int default_m = d == 5 ? 4 : d == 11 ? 7
                                         : static_cast<int>(std::min<Eigen::Index>(
                                               d - 1, (2 * d + 2) / 3));
    config.encoding_dim = std::max(default_m, 1);
    config.hidden_layers = d == 5 ? 3 : d == 11 ? 8 : (d <= 6 ? 3 : 8);
    config.batch_size = static_cast<int>(std::min<Eigen::Index>(32, data.rows()));
    for (const auto& [key, value] : parsed.items()) {
        if (key == "encoding_dim") config.encoding_dim = value.get<int>();
        else if (key == "hidden_layers") config.hidden_layers = value.get<int>();
        else if (key == "learning_rate") config.learning_rate = value.get<double>();
        else if (key == "epochs") config.epochs = value.get<int>();
        else if (key == "batch_size") config.batch_size = value.get<int>();
        else if (key == "seed") config.seed = value.get<std::uint64_t>();
        else throw odx::ConfigError("autoencoder config: unknown key '" + key + "'");
    }
    config.validate();
    return config;
}

std::vector<odx::ReconstructionReport> model_reports(const odx_autoencoder* model,
                                                     const odx_dataset* dataset) {
    const odx::Dataset standardized =
        odx::standardize(dataset->data, model->standardizer);
    return odx::reconstruct_all(model->params, standardized);
}

}  // namespace

extern "C" {

const char* odx_version(void) { return odx::kVersion; }

const char* odx_last_error(void) { return g_last_error.c_str(); }

void odx_string_free(char* s) { delete[] s; }

int odx_dataset_load_csv(const char* path, const char* id_column, odx_dataset** out) {
    return guarded([&] {
        if (!path || !out) throw odx::ConfigError("path and out must not be null");
        std::optional<std::string> id;
        if (id_column && *id_column) id = id_column;
        *out = new odx_dataset{odx::load_csv(path, id)};
    });
}

int odx_dataset_create(const char* const* column_names, int64_t n_cols,
                       const char* const* ids, int64_t n_rows,
                       const double* values_row_major, odx_dataset** out) {
    return guarded([&] {
        if (!column_names || !values_row_major || !out) {
            throw odx::ConfigError("column_names, values and out must not be null");
        }
        std::vector<std::string> columns;
        for (int64_t j = 0; j < n_cols; ++j) columns.emplace_back(column_names[j]);
        std::vector<std::string> row_ids;
        for (int64_t i = 0; i < n_rows; ++i) {
            row_ids.push_back(ids ? std::string(ids[i]) : std::to_string(i));
        }
        Eigen::MatrixXd values(n_rows, n_cols);
        for (int64_t i = 0; i < n_rows; ++i) {
            for (int64_t j = 0; j < n_cols; ++j) {
                values(i, j) = values_row_major[i * n_cols + j];
            }
        }
        *out = new odx_dataset{odx::make_dataset(std::move(columns), std::move(row_ids),
                                                 std::move(values))};
    });
}

void odx_dataset_free(odx_dataset* dataset) { delete dataset; }

int64_t odx_dataset_rows(const odx_dataset* dataset) {
    return dataset ? dataset->data.rows() : 0;
}

int64_t odx_dataset_cols(const odx_dataset* dataset) {
    return dataset ? dataset->data.dims() : 0;
}

const char* odx_dataset_column_name(const odx_dataset* dataset, int64_t col) {
    if (!dataset || col < 0 || col >= dataset->data.dims()) return nullptr;
    return dataset->data.columns[static_cast<std::size_t>(col)].c_str();
}

const char* odx_dataset_id(const odx_dataset* dataset, int64_t row) {
    if (!dataset || row < 0 || row >= dataset->data.rows()) return nullptr;
    return dataset->data.ids[static_cast<std::size_t>(row)].c_str();
}

int odx_dataset_value(const odx_dataset* dataset, int64_t row, int64_t col, double* out) {
    return guarded([&] {
        if (!dataset || !out) throw odx::ConfigError("dataset and out must not be null");
        if (row < 0 || row >= dataset->data.rows() || col < 0 ||
            col >= dataset->data.dims()) {
            throw odx::ConfigError("odx_dataset_value: index out of range");
        }
        *out = dataset->data.values(row, col);
    });
}

int odx_autoencoder_train(const odx_dataset* dataset, const char* config_json,
                          odx_autoencoder** out) {
    return guarded([&] {
        if (!dataset || !out) throw odx::ConfigError("dataset and out must not be null");
        const odx::NetworkConfig config = parse_ae_config(config_json, dataset->data);
        auto standardizer = odx::fit_standardizer(dataset->data);
        const odx::Dataset standardized = odx::standardize(dataset->data, standardizer);
        auto trained = odx::train(standardized, config);
        *out = new odx_autoencoder{std::move(trained.params), std::move(standardizer)};
    });
}

void odx_autoencoder_free(odx_autoencoder* model) { delete model; }

int odx_autoencoder_scores(const odx_autoencoder* model, const odx_dataset* dataset,
                           double* scores) {
    return guarded([&] {
        if (!model || !dataset || !scores) {
            throw odx::ConfigError("model, dataset and scores must not be null");
        }
        const auto reports = model_reports(model, dataset);
        for (std::size_t i = 0; i < reports.size(); ++i) scores[i] = reports[i].score;
    });
}

int odx_autoencoder_deviations(const odx_autoencoder* model, const odx_dataset* dataset,
                               double* deviations_row_major) {
    return guarded([&] {
        if (!model || !dataset || !deviations_row_major) {
            throw odx::ConfigError("model, dataset and deviations must not be null");
        }
        const auto reports = model_reports(model, dataset);
        const auto d = dataset->data.dims();
        for (std::size_t i = 0; i < reports.size(); ++i) {
            for (Eigen::Index j = 0; j < d; ++j) {
                deviations_row_major[static_cast<int64_t>(i) * d + j] =
                    reports[i].deviations(j);
            }
        }
    });
}

int odx_lof_scores(const odx_dataset* dataset, int64_t k, double* scores) {
    return guarded([&] {
        if (!dataset || !scores) throw odx::ConfigError("dataset and scores must not be null");
        const auto params = odx::fit_standardizer(dataset->data);
        const odx::Dataset standardized = odx::standardize(dataset->data, params);
        odx::LofConfig config;
        config.k = static_cast<int>(k);
        const auto result = odx::lof_scores(standardized.values, config);
        std::copy(result.scores.begin(), result.scores.end(), scores);
    });
}

int odx_iforest_scores(const odx_dataset* dataset, int64_t trees, int64_t subsample,
                       uint64_t seed, double* scores) {
    return guarded([&] {
        if (!dataset || !scores) throw odx::ConfigError("dataset and scores must not be null");
        const auto params = odx::fit_standardizer(dataset->data);
        const odx::Dataset standardized = odx::standardize(dataset->data, params);
        odx::ForestConfig config;
        if (trees > 0) config.tree_count = static_cast<int>(trees);
        config.subsample = subsample > 0
                               ? static_cast<int>(subsample)
                               : static_cast<int>(std::min<Eigen::Index>(
                                     256, standardized.rows()));
        config.seed = seed;
        const auto forest = odx::build_forest(standardized.values, config);
        const auto result = odx::iforest_scores(standardized.values, forest);
        std::copy(result.begin(), result.end(), scores);
    });
}

int odx_rank_scores(const double* scores, const char* const* ids, int64_t n,
                    int64_t* ranks, int64_t* deciles) {
    return guarded([&] {
        if (!scores || !ids || n < 1) {
            throw odx::ConfigError("scores and ids must cover at least one observation");
        }
        std::vector<double> score_vec(scores, scores + n);
        std::vector<std::string> id_vec;
        id_vec.reserve(static_cast<std::size_t>(n));
        for (int64_t i = 0; i < n; ++i) id_vec.emplace_back(ids[i]);
        const auto ranking = odx::rank_scores(std::move(score_vec), std::move(id_vec), "capi");
        for (int64_t i = 0; i < n; ++i) {
            if (ranks) ranks[i] = ranking.ranks[static_cast<std::size_t>(i)];
            if (deciles) deciles[i] = ranking.deciles[static_cast<std::size_t>(i)];
        }
    });
}

int odx_pipeline_run(const char* request_json, char** response_json) {
    return guarded([&] {
        if (!request_json) throw odx::ConfigError("request must not be null");
        nlohmann::json request = nlohmann::json::parse(request_json, nullptr, false);
        if (request.is_discarded()) {
            throw odx::ConfigError("request is not valid JSON");
        }
        const nlohmann::json response = odx::run_command(request);
        if (response_json) *response_json = copy_string(response.dump());
    });
}

}  // extern "C"
