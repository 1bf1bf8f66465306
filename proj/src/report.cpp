#include "odx/report.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "odx/csv.hpp"
#include "odx/errors.hpp"
#include "odx/version.hpp"

namespace odx {

Report make_report(const std::string& command, const Json& effective_config,
                   std::uint64_t seed) {
    Report report;
    report.meta = {
        {"tool", kToolName},
        {"version", kVersion},
        {"command", command},
        {"timestamp", utc_timestamp()},
        {"config_hash", config_hash(effective_config)},
        {"seed", seed},
    };
    report.payload = {
        {"command", command},
        {"config", effective_config},
        {"seed", seed},
        {"tables", Json::object()},
    };
    return report;
}

void add_table(Report& report, const std::string& name,
               const std::vector<std::string>& columns, Json rows) {
    report.payload["tables"][name] = {{"columns", columns}, {"rows", std::move(rows)}};
}

void add_extra(Report& report, const std::string& key, Json value) {
    report.payload["extra"][key] = std::move(value);
}

void mark_skipped(Report& report, const std::string& section, const std::string& reason) {
    report.payload["skipped"][section] = reason;
}

namespace {

std::string render_cell(const Json& cell) {
    switch (cell.type()) {
        case Json::value_t::string:
            return cell.get<std::string>();
        case Json::value_t::number_integer:
            return std::to_string(cell.get<std::int64_t>());
        case Json::value_t::number_unsigned:
            return std::to_string(cell.get<std::uint64_t>());
        case Json::value_t::number_float:
            return csv::format_double(cell.get<double>());
        case Json::value_t::boolean:
            return cell.get<bool>() ? "1" : "0";
        case Json::value_t::null:
            return "";
        default:
            throw DataError("report table cell is not a scalar");
    }
}

}  // namespace

std::vector<std::string> emit_report(const Report& report, const std::string& out_dir,
                                     bool json_format, bool csv_format) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;

    if (json_format) {
        const auto path = (std::filesystem::path(out_dir) / "report.json").string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write " + path);
        Json doc = {{"meta", report.meta}, {"payload", report.payload}};
        out << doc.dump(2) << '\n';
        written.push_back(path);
    }

    if (csv_format && report.payload.contains("tables")) {
        for (const auto& [name, table] : report.payload["tables"].items()) {
            csv::Table out_table;
            for (const auto& col : table["columns"]) {
                out_table.header.push_back(col.get<std::string>());
            }
            for (const auto& row : table["rows"]) {
                std::vector<std::string> cells;
                cells.reserve(row.size());
                for (const auto& cell : row) cells.push_back(render_cell(cell));
                if (cells.size() != out_table.header.size()) {
                    throw DataError("report table '" + name + "' has a ragged row");
                }
                out_table.rows.push_back(std::move(cells));
            }
            const auto path = (std::filesystem::path(out_dir) / (name + ".csv")).string();
            csv::write_file(path, out_table);
            written.push_back(path);
        }
    }
    return written;
}

std::string config_hash(const Json& config) {
    const std::string text = config.dump();
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace odx
