#include "odx/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "odx/errors.hpp"

namespace odx::csv {

namespace {

// Parses one record starting at `pos`; advances `pos` past the trailing
// newline. Returns false at end of input.
bool parse_record(const std::string& text, std::size_t& pos,
                  std::vector<std::string>& fields, const std::string& path) {
    fields.clear();
    if (pos >= text.size()) return false;

    std::string field;
    bool in_quotes = false;
    bool saw_any = false;
    while (pos < text.size()) {
        char c = text[pos];
        if (in_quotes) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    field.push_back('"');
                    pos += 2;
                } else {
                    in_quotes = false;
                    ++pos;
                }
            } else {
                field.push_back(c);
                ++pos;
            }
            continue;
        }
        if (c == '"' && field.empty()) {
            in_quotes = true;
            saw_any = true;
            ++pos;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            saw_any = true;
            ++pos;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
            ++pos;
            break;
        } else {
            field.push_back(c);
            saw_any = true;
            ++pos;
        }
    }
    if (in_quotes) {
        throw DataError(path + ": unterminated quoted field");
    }
    if (!saw_any && fields.empty() && field.empty()) {
        // blank line (e.g. trailing newline at end of file)
        return pos < text.size() ? parse_record(text, pos, fields, path) : false;
    }
    fields.push_back(std::move(field));
    return true;
}

}  // namespace

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    Table table;
    std::size_t pos = 0;
    if (!parse_record(text, pos, table.header, path)) {
        throw DataError(path + ": empty file, header row required");
    }
    std::vector<std::string> fields;
    std::size_t record = 0;
    while (parse_record(text, pos, fields, path)) {
        ++record;
        if (fields.size() != table.header.size()) {
            throw DataError(path + ": row " + std::to_string(record) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(table.header.size()));
        }
        table.rows.push_back(fields);
    }
    return table;
}

void write_file(const std::string& path, const Table& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write file: " + path);
    }
    auto emit_row = [&out](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << escape_field(row[i]);
        }
        out << '\n';
    };
    emit_row(table.header);
    for (const auto& row : table.rows) emit_row(row);
    if (!out) {
        throw DataError("write failed: " + path);
    }
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool parse_finite_double(const std::string& cell, double& out) {
    std::size_t b = cell.find_first_not_of(" \t");
    if (b == std::string::npos) return false;
    std::size_t e = cell.find_last_not_of(" \t");
    const char* first = cell.data() + b;
    const char* last = cell.data() + e + 1;
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) return false;
    return std::isfinite(out);
}

std::string escape_field(const std::string& field) {
    bool needs_quotes = field.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::vector<std::string> split_list(const std::string& value, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, sep)) {
        std::size_t b = item.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        std::size_t e = item.find_last_not_of(" \t");
        out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

}  // namespace odx::csv
