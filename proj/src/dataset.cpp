#include "odx/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "odx/csv.hpp"
#include "odx/errors.hpp"

namespace odx {

Eigen::Index Dataset::column_index(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) {
        throw DataError("unknown column: " + name);
    }
    return static_cast<Eigen::Index>(it - columns.begin());
}

Eigen::Index Dataset::row_index(const std::string& id) const {
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) {
        throw DataError("unknown observation id: " + id);
    }
    return static_cast<Eigen::Index>(it - ids.begin());
}

Dataset make_dataset(std::vector<std::string> columns, std::vector<std::string> ids,
                     Eigen::MatrixXd values) {
    if (values.rows() < 1 || values.cols() < 1) {
        throw DataError("dataset requires at least 1 row and 1 column");
    }
    if (static_cast<Eigen::Index>(columns.size()) != values.cols()) {
        throw DataError("column name count does not match value columns");
    }
    if (static_cast<Eigen::Index>(ids.size()) != values.rows()) {
        throw DataError("id count does not match value rows");
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) {
            throw DataError("duplicate observation id: " + id);
        }
    }
    if (!values.allFinite()) {
        throw DataError("dataset contains non-finite values");
    }
    return Dataset{std::move(columns), std::move(ids), std::move(values)};
}

Dataset load_csv(const std::string& path, const std::optional<std::string>& id_column) {
    csv::Table table = csv::read_file(path);
    if (table.rows.empty()) {
        throw DataError(path + ": no data rows");
    }

    std::ptrdiff_t id_col = -1;
    if (id_column) {
        auto it = std::find(table.header.begin(), table.header.end(), *id_column);
        if (it == table.header.end()) {
            throw DataError(path + ": id column '" + *id_column + "' not found");
        }
        id_col = it - table.header.begin();
    }

    std::vector<std::string> columns;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        if (static_cast<std::ptrdiff_t>(j) != id_col) columns.push_back(table.header[j]);
    }
    if (columns.empty()) {
        throw DataError(path + ": no numeric columns");
    }

    const auto n = static_cast<Eigen::Index>(table.rows.size());
    const auto d = static_cast<Eigen::Index>(columns.size());
    Eigen::MatrixXd values(n, d);
    std::vector<std::string> ids;
    ids.reserve(n);

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[static_cast<std::size_t>(i)];
        Eigen::Index out_j = 0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (static_cast<std::ptrdiff_t>(j) == id_col) continue;
            double v;
            if (!csv::parse_finite_double(row[j], v)) {
                throw DataError(path + ": row " + std::to_string(i + 1) + ", column '" +
                                table.header[j] + "': cannot parse '" + row[j] +
                                "' as a finite number");
            }
            values(i, out_j++) = v;
        }
        ids.push_back(id_col >= 0 ? row[static_cast<std::size_t>(id_col)]
                                  : std::to_string(i));
    }
    return make_dataset(std::move(columns), std::move(ids), std::move(values));
}

void save_csv(const Dataset& data, const std::string& path, const std::string& id_column) {
    csv::Table table;
    table.header.push_back(id_column);
    for (const auto& c : data.columns) table.header.push_back(c);
    table.rows.reserve(static_cast<std::size_t>(data.rows()));
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        std::vector<std::string> row;
        row.reserve(static_cast<std::size_t>(data.dims()) + 1);
        row.push_back(data.ids[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < data.dims(); ++j) {
            row.push_back(csv::format_double(data.values(i, j)));
        }
        table.rows.push_back(std::move(row));
    }
    csv::write_file(path, table);
}

StandardizationParams fit_standardizer(const Dataset& data) {
    const auto n = data.rows();
    if (n < 2) {
        throw DataError("standardizer requires at least 2 rows");
    }
    const auto d = data.dims();
    StandardizationParams params;
    params.mean = data.values.colwise().mean();
    params.stddev.resize(d);
    params.constant.assign(static_cast<std::size_t>(d), false);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double var =
            (data.values.col(j).array() - params.mean(j)).square().sum() /
            static_cast<double>(n);
        const double sd = std::sqrt(var);
        if (sd < 1e-12) {
            params.stddev(j) = 1.0;
            params.constant[static_cast<std::size_t>(j)] = true;
        } else {
            params.stddev(j) = sd;
        }
    }
    return params;
}

Dataset standardize(const Dataset& data, const StandardizationParams& params) {
    if (params.mean.size() != data.dims()) {
        throw DataError("standardizer dimension mismatch");
    }
    Dataset out = data;
    out.values = (data.values.rowwise() - params.mean.transpose()).array().rowwise() /
                 params.stddev.transpose().array();
    return out;
}

Dataset destandardize(const Dataset& data, const StandardizationParams& params) {
    if (params.mean.size() != data.dims()) {
        throw DataError("standardizer dimension mismatch");
    }
    Dataset out = data;
    out.values = (data.values.array().rowwise() * params.stddev.transpose().array())
                     .rowwise() +
                 params.mean.transpose().array();
    return out;
}

}  // namespace odx
