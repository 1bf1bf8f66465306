#pragma once

#include <string>
#include <vector>

namespace odx::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Strict reader: UTF-8, comma separated, double-quote quoting with ""
// escapes, first row is the header. Ragged rows and unterminated quotes are
// rejected. Throws DataError.
Table read_file(const std::string& path);

void write_file(const std::string& path, const Table& table);

// %.17g — exactly round-trips any finite double.
std::string format_double(double v);

// Strict parse of a whole cell (surrounding whitespace allowed) into a finite
// double. Returns false on anything else, including inf/nan.
bool parse_finite_double(const std::string& cell, double& out);

std::string escape_field(const std::string& field);

// Splits a semicolon-separated list, trimming surrounding whitespace and
// dropping empty entries.
std::vector<std::string> split_list(const std::string& value, char sep = ';');

}  // namespace odx::csv
