#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace odx {

using Json = nlohmann::json;

// A run report: `meta` holds identification (tool, version, command,
// timestamp, config hash, seed); `payload` holds everything reproducible —
// the effective configuration and the tabular sections. Re-running with the
// same config and seed yields byte-identical payloads; only meta.timestamp
// varies.
struct Report {
    Json meta;
    Json payload;
};

Report make_report(const std::string& command, const Json& effective_config,
                   std::uint64_t seed);

// payload["tables"][name] = {"columns": [...], "rows": [[...]]}; one CSV per
// table on emission.
void add_table(Report& report, const std::string& name,
               const std::vector<std::string>& columns, Json rows);

// Non-tabular extras (e.g. statistic tags) land in payload["extra"].
void add_extra(Report& report, const std::string& key, Json value);

// Explicit marker for a section that produced nothing.
void mark_skipped(Report& report, const std::string& section, const std::string& reason);

// Writes <out_dir>/report.json and/or one <name>.csv per table. Returns the
// paths written.
std::vector<std::string> emit_report(const Report& report, const std::string& out_dir,
                                     bool json_format, bool csv_format);

// FNV-1a over the canonical dump of the effective config.
std::string config_hash(const Json& config);

std::string utc_timestamp();

}  // namespace odx
