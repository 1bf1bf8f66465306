// odx command line. All work happens behind the C API (odx.h); this binary
// only parses arguments, merges config files and drives the interactive
// label-collection loop.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "odx.h"

namespace {

using Json = nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> method;
    std::optional<std::string> cutoffs;
    std::optional<std::string> id_column;
};

void add_common_options(CLI::App* cmd, CommonOptions& opts, bool with_methods = true) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--seed", opts.seed, "master seed (u64)");
    cmd->add_option("--out", opts.out, "output directory");
    if (with_methods) {
        cmd->add_option("--method", opts.method, "ae|lof|iforest|all");
        cmd->add_option("--cutoffs", opts.cutoffs, "comma list, e.g. 5,10,15");
        cmd->add_option("--id-column", opts.id_column, "name of the id column");
    }
}

Json load_config_file(const std::string& path) {
    if (path.empty()) return Json::object();
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "odx: cannot open config file: " << path << "\n";
        std::exit(kExitConfig);
    }
    Json config = Json::parse(in, nullptr, false);
    if (config.is_discarded() || !config.is_object()) {
        std::cerr << "odx: config file is not a JSON object: " << path << "\n";
        std::exit(kExitConfig);
    }
    return config;
}

Json parse_cutoff_list(const std::string& text) {
    Json list = Json::array();
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
        try {
            list.push_back(std::stod(part));
        } catch (const std::exception&) {
            std::cerr << "odx: bad cutoff value '" << part << "'\n";
            std::exit(kExitConfig);
        }
    }
    return list;
}

// Config file first, then flags on top.
Json build_request(const std::string& command, const CommonOptions& opts) {
    Json request = load_config_file(opts.config_path);
    request["command"] = command;
    if (opts.seed) request["seed"] = *opts.seed;
    if (opts.out) request["out"] = *opts.out;
    if (opts.method) request["method"] = *opts.method;
    if (opts.cutoffs) request["cutoffs"] = parse_cutoff_list(*opts.cutoffs);
    if (opts.id_column) request["id_column"] = *opts.id_column;
    return request;
}

int run_request(const Json& request, Json* response_out = nullptr) {
    char* response_text = nullptr;
    const int status = odx_pipeline_run(request.dump().c_str(), &response_text);
    if (status != ODX_OK) {
        std::cerr << "odx: " << odx_last_error() << "\n";
        return status;
    }
    Json response = Json::parse(response_text);
    odx_string_free(response_text);
    if (response.contains("files")) {
        for (const auto& file : response["files"]) {
            std::cout << "wrote " << file.get<std::string>() << "\n";
        }
    }
    if (response_out) *response_out = std::move(response);
    return 0;
}

std::string prompt_line(const std::string& message) {
    std::cout << message << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) {
        std::cerr << "\nodx: input closed, aborting\n";
        std::exit(kExitData);
    }
    return line;
}

int prompt_int(const std::string& message, int lo, int hi) {
    for (;;) {
        const std::string line = prompt_line(message);
        try {
            const int value = std::stoi(line);
            if (value >= lo && value <= hi) return value;
        } catch (const std::exception&) {
        }
        std::cout << "  enter a number in " << lo << ".." << hi << "\n";
    }
}

// Presents items one at a time, blind: values only, no ranks, no scores, no
// duplicate markers.
int collect_labels(const Json& request, const std::string& sheet_path,
                   const std::string& expert_id) {
    Json plan_request = request;
    plan_request["command"] = "collect-plan";
    plan_request.erase("out");

    Json plan_response;
    if (int status = run_request(plan_request, &plan_response); status != 0) return status;
    const Json& plan = plan_response["plan"];
    const Json& columns = plan["columns"];
    const Json& items = plan["items"];

    std::cout << "Labeling " << items.size() << " observations, " << columns.size()
              << " dimensions each. Labels: 0 = normal, 1 = outlier, 2 = undecided.\n";
    const int relevance = prompt_int(
        "How relevant is your professional experience to this task (1-10)? ", 1, 10);

    Json answers = Json::array();
    std::size_t shown = 0;
    for (const auto& item : items) {
        ++shown;
        std::cout << "\n[" << shown << "/" << items.size() << "]\n";
        for (std::size_t j = 0; j < columns.size(); ++j) {
            std::cout << "  " << columns[j].get<std::string>() << " = "
                      << item["values"][j].get<double>() << "\n";
        }
        const int label = prompt_int("label (0/1/2)? ", 0, 2);
        const std::string dims =
            prompt_line("main dimensions used (semicolon list, empty to skip)? ");

        Json answer = {{"item_id", item["item_id"]}, {"label", label}};
        if (!dims.empty()) {
            Json used = Json::array();
            std::istringstream in(dims);
            std::string part;
            while (std::getline(in, part, ';')) {
                const auto b = part.find_first_not_of(" \t");
                if (b == std::string::npos) continue;
                const auto e = part.find_last_not_of(" \t");
                used.push_back(part.substr(b, e - b + 1));
            }
            answer["dims_used"] = used;
        }
        answers.push_back(std::move(answer));
    }
    const int difficulty =
        prompt_int("How difficult was this labeling task (1-10)? ", 1, 10);

    Json items_out = Json::array();
    for (const auto& item : items) {
        items_out.push_back({{"item_id", item["item_id"]},
                             {"observation_id", item["observation_id"]},
                             {"dup_group", item["dup_group"]}});
    }
    Json write_request = {{"command", "write-sheet"},
                          {"out", sheet_path},
                          {"columns", columns},
                          {"items", items_out},
                          {"answers", answers},
                          {"expert", Json{{"expert_id", expert_id},
                                          {"relevance", relevance},
                                          {"difficulty", difficulty}}}};
    return run_request(write_request);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string("odx ") + odx_version() +
                 " — outlier scoring and dimension-level deviation reports"};
    app.require_subcommand(1);

    // score
    CommonOptions score_opts;
    std::string score_data;
    auto* score = app.add_subcommand("score", "train/score methods and rank a dataset");
    score->add_option("--data", score_data, "input CSV");
    add_common_options(score, score_opts);

    // rank
    CommonOptions rank_opts;
    std::string rank_scores_path, rank_method;
    auto* rank = app.add_subcommand("rank", "rank an externally scored id,score CSV");
    rank->add_option("--scores", rank_scores_path, "scores CSV (id,score)");
    rank->add_option("--method", rank_method, "tag for the ranking (default: external)");
    add_common_options(rank, rank_opts, false);
    rank->add_option("--cutoffs", rank_opts.cutoffs, "comma list, e.g. 5,10,15");

    // inject
    CommonOptions inject_opts;
    std::string inject_data, inject_specs;
    auto* inject = app.add_subcommand(
        "inject", "append synthetic perturbed copies of non-outlying observations");
    inject->add_option("--data", inject_data, "input CSV");
    inject->add_option("--specs", inject_specs, "perturbation specs JSON");
    add_common_options(inject, inject_opts);

    // evaluate
    CommonOptions eval_opts;
    std::string eval_pre, eval_post, eval_data, eval_specs, eval_mode;
    double eval_tolerance = -1.0;
    auto* evaluate = app.add_subcommand(
        "evaluate", "detection + granular-feedback metrics against ground truth");
    evaluate->add_option("--pre", eval_pre, "uncorrected dataset CSV (diff mode)");
    evaluate->add_option("--post", eval_post, "corrected dataset CSV (diff mode)");
    evaluate->add_option("--tolerance", eval_tolerance, "diff tolerance (natural units)");
    evaluate->add_option("--data", eval_data, "base dataset CSV (synthetic mode)");
    evaluate->add_option("--specs", eval_specs, "perturbation specs JSON (synthetic mode)");
    evaluate->add_option("--mode", eval_mode, "diff|synthetic (inferred when omitted)");
    add_common_options(evaluate, eval_opts);

    // collect-labels
    CommonOptions collect_opts;
    std::string collect_data, collect_sheet, collect_expert;
    long long collect_size = 0, collect_duplicates = 0;
    auto* collect = app.add_subcommand(
        "collect-labels", "interactively label a validation subset (blind)");
    collect->add_option("--data", collect_data, "input CSV");
    collect->add_option("--sheet", collect_sheet, "label sheet CSV to create/append")
        ->required();
    collect->add_option("--expert", collect_expert, "expert id")->required();
    collect->add_option("--size", collect_size, "subset size")->required();
    collect->add_option("--duplicates", collect_duplicates,
                        "number of duplicated observations");
    add_common_options(collect, collect_opts);

    // vote
    CommonOptions vote_opts;
    std::string vote_sheet, vote_data, vote_difficulty;
    auto* vote = app.add_subcommand(
        "vote", "expert majority voting vs method labelings");
    vote->add_option("--sheet", vote_sheet, "label sheet CSV");
    vote->add_option("--data", vote_data, "dataset CSV the sheet refers to");
    vote->add_option("--difficulty-weighting", vote_difficulty, "inverse|reversed");
    add_common_options(vote, vote_opts);

    // consistency
    CommonOptions consistency_opts;
    std::string consistency_sheet, consistency_data;
    auto* consistency = app.add_subcommand(
        "consistency", "duplicate-label consistency and expert agreement");
    consistency->add_option("--sheet", consistency_sheet, "label sheet CSV");
    consistency->add_option("--data", consistency_data,
                            "dataset CSV (validates dimension names)");
    add_common_options(consistency, consistency_opts, false);
    consistency->add_option("--id-column", consistency_opts.id_column,
                            "name of the id column");

    // correlate
    CommonOptions correlate_opts;
    std::string correlate_data;
    auto* correlate = app.add_subcommand(
        "correlate", "phi correlations between method/cutoff labelings");
    correlate->add_option("--data", correlate_data, "input CSV");
    add_common_options(correlate, correlate_opts);

    // report
    CommonOptions report_opts;
    std::string report_in, report_formats;
    auto* report = app.add_subcommand("report", "re-emit CSV/JSON from a report.json");
    report->add_option("--in", report_in, "existing report.json")->required();
    report->add_option("--formats", report_formats, "comma list: json,csv");
    add_common_options(report, report_opts, false);

    CLI11_PARSE(app, argc, argv);

    auto with_optional = [](Json& request, const char* key, const std::string& value) {
        if (!value.empty()) request[key] = value;
    };

    if (score->parsed()) {
        Json request = build_request("score", score_opts);
        with_optional(request, "data", score_data);
        return run_request(request);
    }
    if (rank->parsed()) {
        Json request = build_request("rank", rank_opts);
        with_optional(request, "scores", rank_scores_path);
        with_optional(request, "method", rank_method);
        return run_request(request);
    }
    if (inject->parsed()) {
        Json request = build_request("inject", inject_opts);
        with_optional(request, "data", inject_data);
        with_optional(request, "specs", inject_specs);
        return run_request(request);
    }
    if (evaluate->parsed()) {
        Json request = build_request("evaluate", eval_opts);
        with_optional(request, "pre", eval_pre);
        with_optional(request, "post", eval_post);
        with_optional(request, "data", eval_data);
        with_optional(request, "specs", eval_specs);
        with_optional(request, "mode", eval_mode);
        if (eval_tolerance >= 0) request["tolerance"] = eval_tolerance;
        return run_request(request);
    }
    if (collect->parsed()) {
        Json request = build_request("collect-labels", collect_opts);
        with_optional(request, "data", collect_data);
        request["size"] = collect_size;
        request["duplicates"] = collect_duplicates;
        return collect_labels(request, collect_sheet, collect_expert);
    }
    if (vote->parsed()) {
        Json request = build_request("vote", vote_opts);
        with_optional(request, "sheet", vote_sheet);
        with_optional(request, "data", vote_data);
        if (!vote_difficulty.empty()) request["difficulty_weighting"] = vote_difficulty;
        return run_request(request);
    }
    if (consistency->parsed()) {
        Json request = build_request("consistency", consistency_opts);
        with_optional(request, "sheet", consistency_sheet);
        with_optional(request, "data", consistency_data);
        return run_request(request);
    }
    if (correlate->parsed()) {
        Json request = build_request("correlate", correlate_opts);
        with_optional(request, "data", correlate_data);
        return run_request(request);
    }
    if (report->parsed()) {
        Json request = build_request("report", report_opts);
        request["in"] = report_in;
        if (!report_formats.empty()) {
            Json formats = Json::array();
            std::istringstream in(report_formats);
            std::string part;
            while (std::getline(in, part, ',')) formats.push_back(part);
            request["formats"] = formats;
        }
        return run_request(request);
    }
    return kExitConfig;
}
