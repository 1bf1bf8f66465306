#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace odx {

// Immutable after construction; safe to share read-only across threads.
struct Dataset {
    std::vector<std::string> columns;  // d named numeric dimensions
    std::vector<std::string> ids;      // n stable per-row identifiers, unique
    Eigen::MatrixXd values;            // n x d

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index dims() const { return values.cols(); }

    // Index of a named column; throws DataError when unknown.
    Eigen::Index column_index(const std::string& name) const;

    // Row index of an id; throws DataError when unknown.
    Eigen::Index row_index(const std::string& id) const;
};

// Validates shape, id uniqueness and finiteness. Throws DataError.
Dataset make_dataset(std::vector<std::string> columns, std::vector<std::string> ids,
                     Eigen::MatrixXd values);

// CSV loader: header row required, every non-id cell must parse as a finite
// real. Ids come from `id_column` when given, otherwise the 0-based row
// index. Row order is preserved. Throws DataError with the offending
// row/column on bad cells.
Dataset load_csv(const std::string& path,
                 const std::optional<std::string>& id_column = std::nullopt);

// Writes id + numeric columns; load_csv(save_csv(d)) round-trips exactly.
void save_csv(const Dataset& data, const std::string& path,
              const std::string& id_column = "id");

struct StandardizationParams {
    Eigen::VectorXd mean;         // per column
    Eigen::VectorXd stddev;       // per column, >= epsilon; 1 for constant columns
    std::vector<bool> constant;   // flag: stddev was forced to 1
};

// Population (1/n) standard deviation; constant columns get stddev 1 and a
// flag. Requires n >= 2.
StandardizationParams fit_standardizer(const Dataset& data);

// value -> (value - mean) / stddev, per column.
Dataset standardize(const Dataset& data, const StandardizationParams& params);

// Inverse of standardize.
Dataset destandardize(const Dataset& data, const StandardizationParams& params);

}  // namespace odx
