#pragma once

#include <json.hpp>
#include <string>

namespace odx {

// Executes one pipeline request and returns the response document. The
// request carries {"command": <name>, ...config keys...}; unknown keys are
// rejected. Commands: score, rank, inject, evaluate, vote, consistency,
// correlate, report, collect-plan, write-sheet.
//
// Commands that write files return {"files": [...], "report": {...}};
// collect-plan returns {"plan": {...}}. Errors surface as odx::Error
// subclasses whose codes match the CLI exit codes.
nlohmann::json run_command(const nlohmann::json& request);

}  // namespace odx
