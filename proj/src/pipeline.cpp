#include "odx/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "odx/autoencoder.hpp"
#include "odx/csv.hpp"
#include "odx/dataset.hpp"
#include "odx/errors.hpp"
#include "odx/experts.hpp"
#include "odx/iforest.hpp"
#include "odx/lof.hpp"
#include "odx/perturbation.hpp"
#include "odx/ranking.hpp"
#include "odx/report.hpp"
#include "odx/rng.hpp"

namespace odx {

namespace {

// ---------------------------------------------------------------------------
// request parsing

class ConfigView {
public:
    ConfigView(const Json& json, std::string context)
        : json_(json), context_(std::move(context)) {
        if (!json_.is_object()) {
            throw ConfigError(context_ + ": expected a JSON object");
        }
    }

    bool has(const std::string& key) {
        allowed_.insert(key);
        return json_.contains(key) && !json_[key].is_null();
    }

    const Json& raw(const std::string& key) {
        if (!has(key)) throw ConfigError(context_ + ": missing key '" + key + "'");
        return json_[key];
    }

    std::string str(const std::string& key) {
        const Json& v = raw(key);
        if (!v.is_string()) throw ConfigError(context_ + ": '" + key + "' must be a string");
        return v.get<std::string>();
    }

    std::string str_or(const std::string& key, const std::string& fallback) {
        return has(key) ? str(key) : fallback;
    }

    std::optional<std::string> opt_str(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return str(key);
    }

    double num(const std::string& key) {
        const Json& v = raw(key);
        if (!v.is_number()) throw ConfigError(context_ + ": '" + key + "' must be a number");
        return v.get<double>();
    }

    double num_or(const std::string& key, double fallback) {
        return has(key) ? num(key) : fallback;
    }

    long long integer(const std::string& key) {
        const Json& v = raw(key);
        if (!v.is_number_integer() && !v.is_number_unsigned()) {
            throw ConfigError(context_ + ": '" + key + "' must be an integer");
        }
        return v.get<long long>();
    }

    long long int_or(const std::string& key, long long fallback) {
        return has(key) ? integer(key) : fallback;
    }

    std::uint64_t uint_or(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const Json& v = raw(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            throw ConfigError(context_ + ": '" + key + "' must be a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    bool bool_or(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const Json& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(context_ + ": '" + key + "' must be a boolean");
        return v.get<bool>();
    }

    // Rejects any key that was never queried.
    void finish() const {
        for (const auto& [key, value] : json_.items()) {
            if (!allowed_.count(key)) {
                throw ConfigError(context_ + ": unknown key '" + key + "'");
            }
        }
    }

    const Json& json() const { return json_; }

private:
    const Json& json_;
    std::string context_;
    std::set<std::string> allowed_;
};

const Json kEmptyObject = Json::object();

std::vector<std::string> parse_methods(ConfigView& cfg) {
    static const std::vector<std::string> all = {"ae", "lof", "iforest"};
    if (!cfg.has("method")) return all;
    const Json& v = cfg.raw("method");
    std::vector<std::string> methods;
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "all") return all;
        methods.push_back(s);
    } else if (v.is_array()) {
        for (const auto& m : v) methods.push_back(m.get<std::string>());
    } else {
        throw ConfigError("'method' must be a string or array");
    }
    for (const auto& m : methods) {
        if (std::find(all.begin(), all.end(), m) == all.end()) {
            throw ConfigError("unknown method '" + m + "' (expected ae|lof|iforest|all)");
        }
    }
    if (methods.empty()) throw ConfigError("'method' selects no methods");
    return methods;
}

std::vector<double> parse_cutoffs(ConfigView& cfg) {
    if (!cfg.has("cutoffs")) return {5.0, 10.0, 15.0};
    const Json& v = cfg.raw("cutoffs");
    if (!v.is_array() || v.empty()) {
        throw ConfigError("'cutoffs' must be a non-empty array of percentages");
    }
    std::vector<double> cutoffs;
    for (const auto& c : v) {
        if (!c.is_number()) throw ConfigError("'cutoffs' entries must be numbers");
        cutoffs.push_back(c.get<double>());
    }
    return cutoffs;
}

std::vector<std::string> parse_formats(ConfigView& cfg) {
    if (!cfg.has("formats")) return {"json", "csv"};
    std::vector<std::string> formats;
    for (const auto& f : cfg.raw("formats")) {
        const auto s = f.get<std::string>();
        if (s != "json" && s != "csv") {
            throw ConfigError("unknown report format '" + s + "'");
        }
        formats.push_back(s);
    }
    if (formats.empty()) throw ConfigError("'formats' selects no formats");
    return formats;
}

std::string cutoff_key(double cutoff) {
    if (cutoff == std::floor(cutoff)) {
        return std::to_string(static_cast<long long>(cutoff));
    }
    std::ostringstream out;
    out << cutoff;
    return out.str();
}

// ---------------------------------------------------------------------------
// method execution

struct MethodOutput {
    OutlierRanking ranking;
    std::map<double, CutoffLabels> labels;
    // autoencoder extras
    std::vector<ReconstructionReport> reports;
    std::vector<double> loss_curve;
};

struct MethodConfigs {
    NetworkConfig ae;
    LofConfig lof;
    ForestConfig iforest;
};

NetworkConfig resolve_ae_config(const Json& section, Eigen::Index n, Eigen::Index d,
                                std::uint64_t root_seed) {
    ConfigView cfg(section, "ae");
    NetworkConfig net;
    net.input_dim = static_cast<int>(d);

    // Published defaults for the 5- and 11-dimension shapes; elsewhere fall
    // back to a ceil(2d/3) bottleneck.
    int default_m = d == 5 ? 4 : d == 11 ? 7
                                         : static_cast<int>(std::min<Eigen::Index>(
                                               d - 1, (2 * d + 2) / 3));
    default_m = std::max(default_m, 1);
    int default_hidden = d == 5 ? 3 : d == 11 ? 8 : (d <= 6 ? 3 : 8);

    net.encoding_dim = static_cast<int>(cfg.int_or("encoding_dim", default_m));
    net.hidden_layers = static_cast<int>(cfg.int_or("hidden_layers", default_hidden));
    net.learning_rate = cfg.num_or("learning_rate", 9.5e-3);
    net.epochs = static_cast<int>(cfg.int_or("epochs", 500));
    const long long default_batch = std::min<long long>(32, n);
    net.batch_size = static_cast<int>(cfg.int_or("batch_size", default_batch));
    net.seed = cfg.uint_or("seed", child_seed(root_seed, 1));
    cfg.finish();
    net.validate();
    return net;
}

LofConfig resolve_lof_config(const Json& section, Eigen::Index n) {
    ConfigView cfg(section, "lof");
    LofConfig lof;
    lof.k = static_cast<int>(cfg.int_or("k", 0));
    cfg.finish();
    if (lof.k == 0) lof.k = lof_default_k(n);
    return lof;
}

ForestConfig resolve_iforest_config(const Json& section, Eigen::Index n,
                                    std::uint64_t root_seed) {
    ConfigView cfg(section, "iforest");
    ForestConfig forest;
    forest.tree_count = static_cast<int>(cfg.int_or("trees", 100));
    forest.subsample = static_cast<int>(
        cfg.int_or("subsample", std::min<Eigen::Index>(256, n)));
    forest.seed = cfg.uint_or("seed", child_seed(root_seed, 2));
    cfg.finish();
    return forest;
}

Json ae_config_json(const NetworkConfig& net) {
    return {{"encoding_dim", net.encoding_dim},
            {"hidden_layers", net.hidden_layers},
            {"learning_rate", net.learning_rate},
            {"epochs", net.epochs},
            {"batch_size", net.batch_size},
            {"seed", net.seed}};
}

// Runs the selected methods on one dataset (standardizing internally) and
// ranks the scores.
std::map<std::string, MethodOutput> run_methods(
    const Dataset& data, const std::vector<std::string>& methods,
    const MethodConfigs& configs, const std::vector<double>& cutoffs) {
    const StandardizationParams params = fit_standardizer(data);
    const Dataset standardized = standardize(data, params);

    std::map<std::string, MethodOutput> outputs;
    for (const auto& method : methods) {
        MethodOutput out;
        std::vector<double> scores;
        if (method == "ae") {
            TrainResult trained = train(standardized, configs.ae);
            out.reports = reconstruct_all(trained.params, standardized);
            out.loss_curve = std::move(trained.epoch_loss);
            scores.reserve(out.reports.size());
            for (const auto& rep : out.reports) scores.push_back(rep.score);
        } else if (method == "lof") {
            scores = lof_scores(standardized.values, configs.lof).scores;
        } else {
            const IsolationForest forest =
                build_forest(standardized.values, configs.iforest);
            scores = iforest_scores(standardized.values, forest);
        }
        out.ranking = rank_scores(std::move(scores), data.ids, method);
        for (const double cutoff : cutoffs) {
            out.labels.emplace(cutoff, top_percent_labels(out.ranking, cutoff));
        }
        outputs.emplace(method, std::move(out));
    }
    return outputs;
}

// ---------------------------------------------------------------------------
// table builders

void add_ranking_tables(Report& report, const std::map<std::string, MethodOutput>& outputs,
                        const std::vector<double>& cutoffs) {
    for (const auto& [method, out] : outputs) {
        Json rows = Json::array();
        for (std::size_t pos = 0; pos < out.ranking.size(); ++pos) {
            const std::size_t obs = out.ranking.order[pos];
            rows.push_back({out.ranking.ids[obs], out.ranking.scores[obs],
                            out.ranking.ranks[obs], out.ranking.deciles[obs]});
        }
        add_table(report, "ranking_" + method, {"id", "score", "rank", "decile"},
                  std::move(rows));

        std::vector<std::string> columns = {"id"};
        for (const double cutoff : cutoffs) columns.push_back("label_" + cutoff_key(cutoff));
        Json label_rows = Json::array();
        for (std::size_t i = 0; i < out.ranking.size(); ++i) {
            Json row = Json::array();
            row.push_back(out.ranking.ids[i]);
            for (const double cutoff : cutoffs) row.push_back(out.labels.at(cutoff).labels[i]);
            label_rows.push_back(std::move(row));
        }
        add_table(report, "labels_" + method, columns, std::move(label_rows));
    }
}

void add_deviation_tables(Report& report, const Dataset& data, const MethodOutput& ae) {
    std::vector<std::string> columns = {"id", "score"};
    for (const auto& c : data.columns) columns.push_back(c);
    Json rows = Json::array();
    for (const auto& rep : ae.reports) {
        Json row = Json::array();
        row.push_back(rep.id);
        row.push_back(rep.score);
        for (Eigen::Index j = 0; j < rep.deviations.size(); ++j) {
            row.push_back(rep.deviations(j));
        }
        rows.push_back(std::move(row));
    }
    add_table(report, "deviations", columns, std::move(rows));

    Json loss_rows = Json::array();
    for (std::size_t e = 0; e < ae.loss_curve.size(); ++e) {
        loss_rows.push_back({static_cast<long long>(e), ae.loss_curve[e]});
    }
    add_table(report, "loss_ae", {"epoch", "loss"}, std::move(loss_rows));
}

void add_ground_truth_extra(Report& report, const Dataset& data, const GroundTruth& truth) {
    Json affected = Json::array();
    for (const auto& obs : truth.affected) {
        Json dims = Json::array();
        Json signs = Json::array();
        for (std::size_t k = 0; k < obs.dims.size(); ++k) {
            dims.push_back(data.columns[static_cast<std::size_t>(obs.dims[k])]);
            signs.push_back(obs.signs[k]);
        }
        affected.push_back({{"id", obs.id}, {"dims", dims}, {"signs", signs}});
    }
    add_extra(report, "ground_truth", Json{{"affected", affected}});
}

std::string write_ground_truth(const Report& report, const std::string& out_dir) {
    const auto path = (std::filesystem::path(out_dir) / "ground_truth.json").string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << report.payload["extra"]["ground_truth"].dump(2) << '\n';
    return path;
}

void add_granular_tables(Report& report, const Dataset& data,
                         const std::vector<ReconstructionReport>& reports,
                         const GroundTruth& truth) {
    const GranularResult rank_acc = dimension_rank_accuracy(reports, truth);
    const GranularResult dir_acc = direction_accuracy(reports, truth);

    std::unordered_map<std::string, const ReconstructionReport*> report_of;
    for (const auto& rep : reports) report_of[rep.id] = &rep;

    Json obs_rows = Json::array();
    for (std::size_t i = 0; i < truth.affected.size(); ++i) {
        const auto& obs = truth.affected[i];
        std::string dims;
        for (std::size_t k = 0; k < obs.dims.size(); ++k) {
            if (k) dims += ";";
            dims += data.columns[static_cast<std::size_t>(obs.dims[k])];
        }
        obs_rows.push_back({obs.id, dims, static_cast<int>(rank_acc.per_observation[i].hit),
                            static_cast<int>(dir_acc.per_observation[i].hit),
                            static_cast<int>(dir_acc.per_observation[i].zero_deviation)});
    }
    add_table(report, "granular_observations",
              {"id", "affected_dims", "dimension_rank_hit", "direction_hit",
               "zero_deviation"},
              std::move(obs_rows));

    // Per-dimension view; rows may overlap when observations are affected in
    // several dimensions.
    Json dim_rows = Json::array();
    for (Eigen::Index j = 0; j < data.dims(); ++j) {
        int count = 0;
        int correct = 0;
        for (const auto& obs : truth.affected) {
            auto it = std::find(obs.dims.begin(), obs.dims.end(), j);
            if (it == obs.dims.end()) continue;
            ++count;
            const auto k = static_cast<std::size_t>(it - obs.dims.begin());
            const double dev = report_of.at(obs.id)->deviations(obs.dims[k]);
            if (dev != 0.0 && (dev > 0 ? +1 : -1) == obs.signs[k]) ++correct;
        }
        if (count == 0) continue;
        dim_rows.push_back({data.columns[static_cast<std::size_t>(j)], count,
                            100.0 * correct / count});
    }
    add_table(report, "granular_dimensions",
              {"dimension", "affected_count", "direction_pct"}, std::move(dim_rows));

    Json summary = Json::array();
    summary.push_back({"affected_count", static_cast<long long>(truth.affected.size())});
    summary.push_back({"dimension_rank_accuracy", rank_acc.mean});
    summary.push_back({"direction_accuracy", dir_acc.mean});
    add_table(report, "granular_summary", {"measure", "value"}, std::move(summary));
}

void add_detection_table(Report& report,
                         const std::map<std::string, MethodOutput>& outputs,
                         const GroundTruth& truth, const std::vector<double>& cutoffs) {
    std::vector<std::string> columns = {"method"};
    for (const double c : cutoffs) columns.push_back("rate_" + cutoff_key(c));
    Json rows = Json::array();
    for (const auto& [method, out] : outputs) {
        const auto rates = detection_rate(out.ranking, truth, cutoffs);
        Json row = Json::array();
        row.push_back(method);
        for (const double c : cutoffs) row.push_back(100.0 * rates.at(c));
        rows.push_back(std::move(row));
    }
    add_table(report, "detection_rates", columns, std::move(rows));
}

// ---------------------------------------------------------------------------
// shared command scaffolding

struct CommonArgs {
    std::uint64_t seed = 0;
    std::string out_dir;
    std::vector<std::string> formats;
};

CommonArgs common_args(ConfigView& cfg) {
    CommonArgs args;
    args.seed = cfg.uint_or("seed", 0);
    args.out_dir = cfg.str_or("out", "odx-out");
    args.formats = parse_formats(cfg);
    return args;
}

bool wants(const std::vector<std::string>& formats, const std::string& format) {
    return std::find(formats.begin(), formats.end(), format) != formats.end();
}

Json finish_report(Report& report, const CommonArgs& args,
                   std::vector<std::string> extra_files = {}) {
    auto files = emit_report(report, args.out_dir, wants(args.formats, "json"),
                             wants(args.formats, "csv"));
    files.insert(files.end(), extra_files.begin(), extra_files.end());
    return {{"files", files},
            {"report", Json{{"meta", report.meta}, {"payload", report.payload}}}};
}

struct LoadedMethods {
    Dataset data;
    std::vector<std::string> methods;
    MethodConfigs configs;
    std::map<std::string, MethodOutput> outputs;
    Json effective;  // method configuration echo
};

// Loads `data`, resolves method configs and scores the requested methods.
LoadedMethods load_and_score(ConfigView& cfg, const std::vector<double>& cutoffs,
                             std::uint64_t seed,
                             const std::vector<std::string>& forced_methods = {}) {
    LoadedMethods result;
    result.data = load_csv(cfg.str("data"), cfg.opt_str("id_column"));
    result.methods = forced_methods.empty() ? parse_methods(cfg) : forced_methods;

    const Json& ae_section = cfg.has("ae") ? cfg.raw("ae") : kEmptyObject;
    const Json& lof_section = cfg.has("lof") ? cfg.raw("lof") : kEmptyObject;
    const Json& iforest_section = cfg.has("iforest") ? cfg.raw("iforest") : kEmptyObject;

    const Eigen::Index n = result.data.rows();
    const Eigen::Index d = result.data.dims();
    result.effective = Json::object();
    for (const auto& method : result.methods) {
        if (method == "ae") {
            result.configs.ae = resolve_ae_config(ae_section, n, d, seed);
            result.effective["ae"] = ae_config_json(result.configs.ae);
        } else if (method == "lof") {
            result.configs.lof = resolve_lof_config(lof_section, n);
            result.effective["lof"] = {{"k", result.configs.lof.k}};
        } else {
            result.configs.iforest = resolve_iforest_config(iforest_section, n, seed);
            result.effective["iforest"] = {{"trees", result.configs.iforest.tree_count},
                                           {"subsample", result.configs.iforest.subsample},
                                           {"seed", result.configs.iforest.seed}};
        }
    }
    result.outputs = run_methods(result.data, result.methods, result.configs, cutoffs);
    return result;
}

Json cutoffs_json(const std::vector<double>& cutoffs) {
    Json arr = Json::array();
    for (double c : cutoffs) arr.push_back(c);
    return arr;
}

Json methods_json(const std::vector<std::string>& methods) {
    Json arr = Json::array();
    for (const auto& m : methods) arr.push_back(m);
    return arr;
}

// ---------------------------------------------------------------------------
// commands

Json cmd_score(ConfigView& cfg) {
    const CommonArgs args = common_args(cfg);
    const auto cutoffs = parse_cutoffs(cfg);
    LoadedMethods run = load_and_score(cfg, cutoffs, args.seed);
    cfg.finish();

    Json effective = {{"command", "score"},
                      {"data", cfg.json()["data"]},
                      {"methods", methods_json(run.methods)},
                      {"cutoffs", cutoffs_json(cutoffs)},
                      {"seed", args.seed},
                      {"out", args.out_dir}};
    effective.update(run.effective);
    if (cfg.json().contains("id_column")) effective["id_column"] = cfg.json()["id_column"];

    Report report = make_report("score", effective, args.seed);
    add_ranking_tables(report, run.outputs, cutoffs);
    if (run.outputs.count("ae")) {
        add_deviation_tables(report, run.data, run.outputs.at("ae"));
    }
    return finish_report(report, args);
}

Json cmd_rank(ConfigView& cfg) {
    const CommonArgs args = common_args(cfg);
    const auto cutoffs = parse_cutoffs(cfg);
    const std::string scores_path = cfg.str("scores");
    const std::string method = cfg.str_or("method", "external");
    cfg.finish();

    const csv::Table table = csv::read_file(scores_path);
    if (table.header.size() != 2 || table.header[0] != "id" || table.header[1] != "score") {
        throw DataError(scores_path + ": expected header 'id,score'");
    }
    std::vector<std::string> ids;
    std::vector<double> scores;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        ids.push_back(table.rows[i][0]);
        double score;
        if (!csv::parse_finite_double(table.rows[i][1], score)) {
            throw DataError(scores_path + ": row " + std::to_string(i + 1) +
                            ": cannot parse score '" + table.rows[i][1] + "'");
        }
        scores.push_back(score);
    }

    Json effective = {{"command", "rank"},
                      {"scores", scores_path},
                      {"method", method},
                      {"cutoffs", cutoffs_json(cutoffs)},
                      {"seed", args.seed},
                      {"out", args.out_dir}};
    Report report = make_report("rank", effective, args.seed);

    std::map<std::string, MethodOutput> outputs;
    MethodOutput out;
    out.ranking = rank_scores(std::move(scores), std::move(ids), method);
    for (const double cutoff : cutoffs) {
        out.labels.emplace(cutoff, top_percent_labels(out.ranking, cutoff));
    }
    outputs.emplace(method, std::move(out));
    add_ranking_tables(report, outputs, cutoffs);
    return finish_report(report, args);
}

Json cmd_correlate(ConfigView& cfg) {
    const CommonArgs args = common_args(cfg);
    const auto cutoffs = parse_cutoffs(cfg);
    LoadedMethods run = load_and_score(cfg, cutoffs, args.seed);
    cfg.finish();

    Json effective = {{"command", "correlate"},
                      {"data", cfg.json()["data"]},
                      {"methods", methods_json(run.methods)},
                      {"cutoffs", cutoffs_json(cutoffs)},
                      {"seed", args.seed},
                      {"out", args.out_dir}};
    effective.update(run.effective);

    Report report = make_report("correlate", effective, args.seed);
    add_ranking_tables(report, run.outputs, cutoffs);

    std::vector<std::pair<std::string, const CutoffLabels*>> labelings;
    for (const auto& method : run.methods) {
        for (const double cutoff : cutoffs) {
            labelings.emplace_back(method + "_" + cutoff_key(cutoff),
                                   &run.outputs.at(method).labels.at(cutoff));
        }
    }

    std::vector<std::string> columns = {"labeling"};
    for (const auto& [key, labels] : labelings) columns.push_back(key);
    Json rows = Json::array();
    for (const auto& [key_a, labels_a] : labelings) {
        Json row = Json::array();
        row.push_back(key_a);
        for (const auto& [key_b, labels_b] : labelings) {
            const auto phi = phi_correlation(*labels_a, *labels_b);
            if (phi) {
                row.push_back(*phi);
            } else {
                row.push_back(nullptr);
            }
        }
        rows.push_back(std::move(row));
    }
    add_table(report, "correlation_methods", columns, std::move(rows));
    add_extra(report, "statistic", "phi");
    return finish_report(report, args);
}

Json cmd_inject(ConfigView& cfg) {
    const CommonArgs args = common_args(cfg);
    const auto cutoffs = parse_cutoffs(cfg);
    const std::string specs_path = cfg.str("specs");
    LoadedMethods run = load_and_score(cfg, cutoffs, args.seed);
    cfg.finish();

    std::ifstream in(specs_path, std::ios::binary);
    if (!in) throw DataError("cannot open perturbation specs: " + specs_path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const auto specs = parse_perturbation_specs(buffer.str(), run.data);

    std::vector<OutlierRanking> rankings;
    for (const auto& method : run.methods) rankings.push_back(run.outputs.at(method).ranking);
    const InjectionResult injection = inject_synthetic(run.data, specs, rankings);

    Json effective = {{"command", "inject"},
                      {"data", cfg.json()["data"]},
                      {"specs", specs_path},
                      {"methods", methods_json(run.methods)},
                      {"seed", args.seed},
                      {"out", args.out_dir}};
    effective.update(run.effective);

    Report report = make_report("inject", effective, args.seed);
    Json rows = Json::array();
    for (std::size_t k = 0; k < specs.size(); ++k) {
        for (const auto& [dim, delta] : specs[k].deltas) {
            rows.push_back({injection.truth.affected[k].id, specs[k].source_id,
                            run.data.columns[static_cast<std::size_t>(dim)], delta,
                            delta > 0 ? "+" : "-"});
        }
    }
    add_table(report, "injection", {"id", "source_id", "dimension", "delta_std", "sign"},
              std::move(rows));
    add_ground_truth_extra(report, run.data, injection.truth);

    std::filesystem::create_directories(args.out_dir);
    const auto augmented_path =
        (std::filesystem::path(args.out_dir) / "augmented.csv").string();
    save_csv(injection.augmented, augmented_path);
    const auto truth_path = write_ground_truth(report, args.out_dir);
    return finish_report(report, args, {augmented_path, truth_path});
}

Json cmd_evaluate(ConfigView& cfg) {
    const CommonArgs args = common_args(cfg);
    const auto cutoffs = parse_cutoffs(cfg);

    const bool has_pre = cfg.has("pre") || cfg.has("post");
    const bool has_specs = cfg.has("specs") || cfg.has("data");
    const std::string mode = cfg.str_or("mode", has_pre ? "diff" : "synthetic");
    if (mode != "diff" && mode != "synthetic") {
        throw ConfigError("evaluate: mode must be 'diff' or 'synthetic'");
    }
    if (mode == "diff" && has_specs) {
        throw ConfigError("evaluate: 'data'/'specs' are not allowed in diff mode");
    }
    if (mode == "synthetic" && has_pre) {
        throw ConfigError("evaluate: 'pre'/'post' are not allowed in synthetic mode");
    }

    if (mode == "diff") {
        const std::string pre_path = cfg.str("pre");
        const std::string post_path = cfg.str("post");
        const double tolerance = cfg.num_or("tolerance", 1e-9);
        const auto id_column = cfg.opt_str("id_column");
        const auto methods = parse_methods(cfg);

        const Dataset pre = load_csv(pre_path, id_column);
        const Dataset post = load_csv(post_path, id_column);
        const GroundTruth truth = diff_datasets(pre, post, tolerance);

        const Json& ae_section = cfg.has("ae") ? cfg.raw("ae") : kEmptyObject;
        const Json& lof_section = cfg.has("lof") ? cfg.raw("lof") : kEmptyObject;
        const Json& iforest_section = cfg.has("iforest") ? cfg.raw("iforest") : kEmptyObject;
        cfg.finish();

        MethodConfigs configs;
        Json method_cfg = Json::object();
        for (const auto& method : methods) {
            if (method == "ae") {
                configs.ae = resolve_ae_config(ae_section, pre.rows(), pre.dims(), args.seed);
                method_cfg["ae"] = ae_config_json(configs.ae);
            } else if (method == "lof") {
                configs.lof = resolve_lof_config(lof_section, pre.rows());
                method_cfg["lof"] = {{"k", configs.lof.k}};
            } else {
                configs.iforest = resolve_iforest_config(iforest_section, pre.rows(), args.seed);
                method_cfg["iforest"] = {{"trees", configs.iforest.tree_count},
                                         {"subsample", configs.iforest.subsample},
                                         {"seed", configs.iforest.seed}};
            }
        }

        Json effective = {{"command", "evaluate"},
                          {"mode", "diff"},
                          {"pre", pre_path},
                          {"post", post_path},
                          {"tolerance", tolerance},
                          {"methods", methods_json(methods)},
                          {"cutoffs", cutoffs_json(cutoffs)},
                          {"seed", args.seed},
                          {"out", args.out_dir}};
        effective.update(method_cfg);

        Report report = make_report("evaluate", effective, args.seed);
        if (truth.empty()) {
            mark_skipped(report, "evaluation", "datasets are identical within tolerance");
            return finish_report(report, args);
        }

        // Detectors run on the PRE (uncorrected) dataset, where the affected
        // rows are the outliers.
        const auto outputs = run_methods(pre, methods, configs, cutoffs);
        add_detection_table(report, outputs, truth, cutoffs);
        add_ground_truth_extra(report, pre, truth);
        if (outputs.count("ae")) {
            add_granular_tables(report, pre, outputs.at("ae").reports, truth);
        }
        const auto truth_path = write_ground_truth(report, args.out_dir);
        return finish_report(report, args, {truth_path});
    }

    // synthetic mode: inject into the base data, retrain everything on the
    // augmented dataset, then evaluate against the injected truth.
    const std::string specs_path = cfg.str("specs");
    LoadedMethods base = load_and_score(cfg, cutoffs, args.seed);
    cfg.finish();

    std::ifstream in(specs_path, std::ios::binary);
    if (!in) throw DataError("cannot open perturbation specs: " + specs_path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const auto specs = parse_perturbation_specs(buffer.str(), base.data);

    std::vector<OutlierRanking> rankings;
    for (const auto& method : base.methods) rankings.push_back(base.outputs.at(method).ranking);
    const InjectionResult injection = inject_synthetic(base.data, specs, rankings);

    Json effective = {{"command", "evaluate"},
                      {"mode", "synthetic"},
                      {"data", cfg.json()["data"]},
                      {"specs", specs_path},
                      {"methods", methods_json(base.methods)},
                      {"cutoffs", cutoffs_json(cutoffs)},
                      {"seed", args.seed},
                      {"out", args.out_dir}};
    effective.update(base.effective);

    Report report = make_report("evaluate", effective, args.seed);
    if (injection.truth.empty()) {
        mark_skipped(report, "evaluation", "no perturbations specified");
        return finish_report(report, args);
    }

    MethodConfigs retrain_configs = base.configs;
    const auto outputs =
        run_methods(injection.augmented, base.methods, retrain_configs, cutoffs);
    add_detection_table(report, outputs, injection.truth, cutoffs);
    add_ground_truth_extra(report, injection.augmented, injection.truth);
    if (outputs.count("ae")) {
        add_granular_tables(report, injection.augmented, outputs.at("ae").reports,
                            injection.truth);
    }
    const auto truth_path = write_ground_truth(report, args.out_dir);
    return finish_report(report, args, {truth_path});
}

Json cmd_vote(ConfigView& cfg) {
    const CommonArgs args = common_args(cfg);
    const auto cutoffs = parse_cutoffs(cfg);
    const std::string sheet_path = cfg.str("sheet");
    const std::string difficulty_weighting = cfg.str_or("difficulty_weighting", "inverse");
    if (difficulty_weighting != "inverse" && difficulty_weighting != "reversed") {
        throw ConfigError("difficulty_weighting must be 'inverse' or 'reversed'");
    }
    LoadedMethods run = load_and_score(cfg, cutoffs, args.seed);
    cfg.finish();

    const ExpertLabelSheet sheet = load_sheet_csv(sheet_path);
    const Weighting difficulty_scheme = difficulty_weighting == "inverse"
                                            ? Weighting::inverse_difficulty
                                            : Weighting::reversed_difficulty;

    Json effective = {{"command", "vote"},
                      {"sheet", sheet_path},
                      {"data", cfg.json()["data"]},
                      {"methods", methods_json(run.methods)},
                      {"cutoffs", cutoffs_json(cutoffs)},
                      {"difficulty_weighting", difficulty_weighting},
                      {"seed", args.seed},
                      {"out", args.out_dir}};
    effective.update(run.effective);
    Report report = make_report("vote", effective, args.seed);

    const auto votes = collect_observation_votes(sheet);
    const std::vector<double> unit_weights(sheet.experts.size(), 1.0);
    const auto relevance_weights = expert_weights(sheet, Weighting::job_relevance);
    const auto difficulty_weights = expert_weights(sheet, difficulty_scheme);

    std::vector<std::pair<std::string, VoteResult>> unweighted, by_relevance, by_difficulty;
    Json vote_rows = Json::array();
    for (const auto& obs : votes) {
        const VoteResult u = tally_votes(obs.labels, unit_weights);
        const VoteResult r = tally_votes(obs.labels, relevance_weights);
        const VoteResult d = tally_votes(obs.labels, difficulty_weights);
        unweighted.emplace_back(obs.observation_id, u);
        by_relevance.emplace_back(obs.observation_id, r);
        by_difficulty.emplace_back(obs.observation_id, d);
        vote_rows.push_back({obs.observation_id, u.label, static_cast<int>(u.tie),
                             r.label, static_cast<int>(r.tie), d.label,
                             static_cast<int>(d.tie), u.tallies[0], u.tallies[1],
                             u.tallies[2]});
    }
    add_table(report, "votes",
              {"observation_id", "unweighted", "unweighted_tie", "relevance_weighted",
               "relevance_tie", "difficulty_weighted", "difficulty_tie", "votes_normal",
               "votes_outlier", "votes_undecided"},
              std::move(vote_rows));

    // Ensemble accuracy per method x cutoff, plus the gain from weighting.
    std::vector<std::string> columns = {"measure"};
    for (const auto& method : run.methods) {
        for (const double cutoff : cutoffs) {
            columns.push_back(method + "_" + cutoff_key(cutoff));
        }
    }
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, VoteResult>>*>>
        schemes = {{"unweighted", &unweighted},
                   {"relevance_weighted", &by_relevance},
                   {"difficulty_weighted", &by_difficulty}};

    std::map<std::string, std::vector<double>> accuracy_rows;
    std::map<std::string, std::vector<double>> coverage_rows;
    for (auto& [name, scheme_votes] : schemes) {
        for (const auto& method : run.methods) {
            for (const double cutoff : cutoffs) {
                const auto acc =
                    ensemble_accuracy(*scheme_votes, run.outputs.at(method).labels.at(cutoff),
                                      run.outputs.at(method).ranking.ids);
                accuracy_rows[name].push_back(acc.accuracy);
                coverage_rows[name].push_back(acc.coverage);
            }
        }
    }

    Json acc_rows = Json::array();
    auto push_row = [&acc_rows](const std::string& name, const std::vector<double>& values) {
        Json row = Json::array();
        row.push_back(name);
        for (double v : values) row.push_back(v);
        acc_rows.push_back(std::move(row));
    };
    push_row("unweighted", accuracy_rows["unweighted"]);
    for (const std::string scheme : {"relevance_weighted", "difficulty_weighted"}) {
        push_row(scheme, accuracy_rows[scheme]);
        std::vector<double> diff, pct;
        for (std::size_t i = 0; i < accuracy_rows[scheme].size(); ++i) {
            const double base_acc = accuracy_rows["unweighted"][i];
            diff.push_back(accuracy_rows[scheme][i] - base_acc);
            pct.push_back(base_acc > 0
                              ? 100.0 * (accuracy_rows[scheme][i] - base_acc) / base_acc
                              : 0.0);
        }
        push_row(scheme + "_difference", diff);
        push_row(scheme + "_pct_increase", pct);
    }
    push_row("unweighted_coverage", coverage_rows["unweighted"]);
    push_row("relevance_coverage", coverage_rows["relevance_weighted"]);
    push_row("difficulty_coverage", coverage_rows["difficulty_weighted"]);
    add_table(report, "ensemble_accuracy", columns, std::move(acc_rows));

    // Individual accuracy grid (experts x methods x cutoffs).
    Json individual_rows = Json::array();
    for (const auto& expert : sheet.experts) {
        for (const auto& method : run.methods) {
            for (const double cutoff : cutoffs) {
                const auto acc = individual_accuracy(
                    sheet, expert.expert_id, run.outputs.at(method).labels.at(cutoff),
                    run.outputs.at(method).ranking.ids);
                if (acc) {
                    individual_rows.push_back({expert.expert_id, method, cutoff,
                                               acc->accuracy, acc->coverage, acc->decided,
                                               acc->evaluated});
                } else {
                    mark_skipped(report, "individual_accuracy:" + expert.expert_id,
                                 "expert decided no labels");
                }
            }
        }
    }
    add_table(report, "individual_accuracy",
              {"expert_id", "method", "cutoff", "accuracy", "coverage", "decided",
               "evaluated"},
              std::move(individual_rows));
    return finish_report(report, args);
}

Json cmd_consistency(ConfigView& cfg) {
    const CommonArgs args = common_args(cfg);
    const std::string sheet_path = cfg.str("sheet");
    const auto data_path = cfg.opt_str("data");
    const auto id_column = cfg.opt_str("id_column");
    cfg.finish();

    const ExpertLabelSheet sheet = load_sheet_csv(sheet_path);

    Json effective = {{"command", "consistency"},
                      {"sheet", sheet_path},
                      {"seed", args.seed},
                      {"out", args.out_dir}};
    if (data_path) effective["data"] = *data_path;
    Report report = make_report("consistency", effective, args.seed);

    std::vector<double> consistencies, difficulties, relevances;
    Json expert_rows = Json::array();
    for (const auto& expert : sheet.experts) {
        const double c = consistency(sheet, expert.expert_id);
        consistencies.push_back(c);
        difficulties.push_back(expert.difficulty);
        relevances.push_back(expert.job_relevance);
        expert_rows.push_back({expert.expert_id, c, expert.job_relevance, expert.difficulty});
    }
    add_table(report, "consistency_per_expert",
              {"expert_id", "consistency", "relevance", "difficulty"},
              std::move(expert_rows));

    auto stats_row = [](const std::string& name, const std::vector<double>& v) {
        const double n = static_cast<double>(v.size());
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= n;
        return Json{name, mean, std::sqrt(var), *std::min_element(v.begin(), v.end()),
                    *std::max_element(v.begin(), v.end())};
    };
    Json summary_rows = Json::array();
    summary_rows.push_back(stats_row("consistency", consistencies));
    summary_rows.push_back(stats_row("difficulty", difficulties));
    summary_rows.push_back(stats_row("job_relevance", relevances));
    add_table(report, "consistency_summary",
              {"measure", "average", "stddev", "min", "max"}, std::move(summary_rows));

    const std::vector<std::pair<std::string, const std::vector<double>*>> measures = {
        {"consistency", &consistencies},
        {"difficulty", &difficulties},
        {"job_relevance", &relevances}};
    Json corr_rows = Json::array();
    for (const auto& [name_a, values_a] : measures) {
        Json row = Json::array();
        row.push_back(name_a);
        for (const auto& [name_b, values_b] : measures) {
            const auto r = pearson(*values_a, *values_b);
            if (r) {
                row.push_back(*r);
            } else {
                row.push_back(nullptr);
            }
        }
        corr_rows.push_back(std::move(row));
    }
    add_table(report, "aptitude_correlations",
              {"measure", "consistency", "difficulty", "job_relevance"},
              std::move(corr_rows));

    // Pairwise inter-expert Spearman over jointly decided items.
    std::vector<std::string> spearman_columns = {"expert_id"};
    for (const auto& expert : sheet.experts) spearman_columns.push_back(expert.expert_id);
    Json spearman_rows = Json::array();
    for (const auto& row_expert : sheet.experts) {
        Json row = Json::array();
        row.push_back(row_expert.expert_id);
        for (const auto& col_expert : sheet.experts) {
            try {
                const auto rho =
                    expert_spearman(sheet, row_expert.expert_id, col_expert.expert_id);
                if (rho) {
                    row.push_back(*rho);
                } else {
                    row.push_back(nullptr);
                }
            } catch (const DataError&) {
                row.push_back(nullptr);  // fewer than 3 jointly decided items
            }
        }
        spearman_rows.push_back(std::move(row));
    }
    add_table(report, "spearman_experts", spearman_columns, std::move(spearman_rows));

    // Dimension usage; validated against the dataset columns when given,
    // otherwise tallied over the names the experts cited.
    std::vector<std::string> columns;
    if (data_path) {
        columns = load_csv(*data_path, id_column).columns;
    } else {
        std::set<std::string> seen;
        for (const auto& per_expert : sheet.dims_used) {
            for (const auto& per_item : per_expert) {
                seen.insert(per_item.begin(), per_item.end());
            }
        }
        columns.assign(seen.begin(), seen.end());
    }
    if (!columns.empty()) {
        const auto usage = dimension_usage(sheet, columns);
        std::vector<std::string> usage_columns = {"expert_id"};
        for (const auto& c : columns) usage_columns.push_back(c);
        Json usage_rows = Json::array();
        for (std::size_t e = 0; e < sheet.experts.size(); ++e) {
            Json row = Json::array();
            row.push_back(sheet.experts[e].expert_id);
            for (std::size_t j = 0; j < columns.size(); ++j) row.push_back(usage[e][j]);
            usage_rows.push_back(std::move(row));
        }
        add_table(report, "dimension_usage", usage_columns, std::move(usage_rows));

        Json universal = Json::array();
        for (std::size_t j = 0; j < columns.size(); ++j) {
            bool by_all = true;
            for (std::size_t e = 0; e < sheet.experts.size(); ++e) {
                if (usage[e][j] == 0) {
                    by_all = false;
                    break;
                }
            }
            if (by_all) universal.push_back(columns[j]);
        }
        add_extra(report, "dimensions_used_by_every_expert", universal);
    } else {
        mark_skipped(report, "dimension_usage", "no dimension annotations in the sheet");
    }
    return finish_report(report, args);
}

Json cmd_collect_plan(ConfigView& cfg) {
    const std::uint64_t seed = cfg.uint_or("seed", 0);
    const long long size_arg = cfg.integer("size");
    const long long dup_arg = cfg.int_or("duplicates", 0);
    if (size_arg < 1) throw ConfigError("'size' must be >= 1");
    if (dup_arg < 0) throw ConfigError("'duplicates' must be >= 0");
    const auto size = static_cast<std::size_t>(size_arg);
    const auto duplicates = static_cast<std::size_t>(dup_arg);
    const auto cutoffs = parse_cutoffs(cfg);
    LoadedMethods run = load_and_score(cfg, cutoffs, seed);
    cfg.has("out");
    cfg.has("formats");
    cfg.finish();

    std::vector<OutlierRanking> rankings;
    for (const auto& method : run.methods) rankings.push_back(run.outputs.at(method).ranking);
    const auto subset = select_validation_subset(rankings, size, child_seed(seed, 3));
    const auto items = inject_duplicates(subset, duplicates, child_seed(seed, 4));

    Json plan_items = Json::array();
    for (const auto& item : items) {
        const Eigen::Index row = run.data.row_index(item.observation_id);
        Json values = Json::array();
        for (Eigen::Index j = 0; j < run.data.dims(); ++j) {
            values.push_back(run.data.values(row, j));
        }
        plan_items.push_back({{"item_id", item.item_id},
                              {"observation_id", item.observation_id},
                              {"dup_group", item.dup_group},
                              {"values", values}});
    }
    return {{"plan", Json{{"columns", run.data.columns},
                          {"items", plan_items},
                          {"size", size},
                          {"duplicates", duplicates},
                          {"seed", seed}}}};
}

Json cmd_write_sheet(ConfigView& cfg) {
    const std::string out_path = cfg.str("out");
    const Json& columns_json = cfg.raw("columns");
    const Json& items_json = cfg.raw("items");
    const Json& answers_json = cfg.raw("answers");
    ConfigView expert_cfg(cfg.raw("expert"), "expert");
    ExpertProfile profile;
    profile.expert_id = expert_cfg.str("expert_id");
    profile.job_relevance = static_cast<int>(expert_cfg.integer("relevance"));
    profile.difficulty = static_cast<int>(expert_cfg.integer("difficulty"));
    expert_cfg.finish();
    cfg.finish();

    if (profile.job_relevance < 1 || profile.job_relevance > 10 ||
        profile.difficulty < 1 || profile.difficulty > 10) {
        throw ConfigError("expert relevance/difficulty must lie in 1..10");
    }

    std::vector<std::string> columns;
    for (const auto& c : columns_json) columns.push_back(c.get<std::string>());
    std::unordered_set<std::string> known(columns.begin(), columns.end());

    std::vector<PresentedItem> items;
    for (const auto& item : items_json) {
        items.push_back({item.at("item_id").get<std::string>(),
                         item.at("observation_id").get<std::string>(),
                         item.contains("dup_group") ? item.at("dup_group").get<int>() : -1});
    }

    ExpertLabelSheet sheet;
    if (std::filesystem::exists(out_path)) {
        sheet = load_sheet_csv(out_path);
        if (sheet.items.size() != items.size()) {
            throw DataError(out_path + ": existing sheet presents a different item list");
        }
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (sheet.items[i].item_id != items[i].item_id ||
                sheet.items[i].observation_id != items[i].observation_id ||
                sheet.items[i].dup_group != items[i].dup_group) {
                throw DataError(out_path + ": existing sheet presents a different item list");
            }
        }
        for (const auto& existing : sheet.experts) {
            if (existing.expert_id == profile.expert_id) {
                throw DataError(out_path + ": expert '" + profile.expert_id +
                                "' already labeled this sheet");
            }
        }
    } else {
        sheet.items = items;
    }

    sheet.experts.push_back(profile);
    sheet.labels.emplace_back(sheet.items.size(), kUnlabeled);
    sheet.dims_used.emplace_back(sheet.items.size());
    const std::size_t e = sheet.experts.size() - 1;

    std::size_t answered = 0;
    for (const auto& answer : answers_json) {
        const auto item_id = answer.at("item_id").get<std::string>();
        const std::size_t i = sheet.item_index(item_id);
        const int label = answer.at("label").get<int>();
        if (label < 0 || label > 2) {
            throw ConfigError("label for item '" + item_id + "' must be 0, 1 or 2");
        }
        if (sheet.labels[e][i] != kUnlabeled) {
            throw ConfigError("item '" + item_id + "' answered twice");
        }
        sheet.labels[e][i] = label;
        if (answer.contains("dims_used")) {
            for (const auto& dim : answer.at("dims_used")) {
                const auto name = dim.get<std::string>();
                if (!known.count(name)) {
                    throw DataError("unknown dimension name '" + name + "'");
                }
                sheet.dims_used[e][i].push_back(name);
            }
        }
        ++answered;
    }
    if (answered != sheet.items.size()) {
        throw ConfigError("expected " + std::to_string(sheet.items.size()) +
                          " answers, got " + std::to_string(answered));
    }

    if (const auto parent = std::filesystem::path(out_path).parent_path(); !parent.empty()) {
        std::filesystem::create_directories(parent);
    }
    save_sheet_csv(sheet, out_path);
    return {{"files", Json::array({out_path})},
            {"rows_written", answered},
            {"experts_total", sheet.experts.size()}};
}

Json cmd_report(ConfigView& cfg) {
    const std::string in_path = cfg.str("in");
    const std::string out_dir = cfg.str_or("out", "odx-out");
    const auto formats = parse_formats(cfg);
    cfg.finish();

    std::ifstream in(in_path, std::ios::binary);
    if (!in) throw DataError("cannot open report: " + in_path);
    Json doc;
    try {
        in >> doc;
    } catch (const Json::parse_error& e) {
        throw DataError(in_path + ": invalid report JSON: " + e.what());
    }
    if (!doc.contains("meta") || !doc.contains("payload")) {
        throw DataError(in_path + ": not a report file (missing meta/payload)");
    }
    Report report{doc["meta"], doc["payload"]};
    auto files = emit_report(report, out_dir, wants(formats, "json"), wants(formats, "csv"));
    return {{"files", files}, {"report", doc}};
}

}  // namespace

Json run_command(const Json& request) {
    ConfigView cfg(request, "request");
    const std::string command = cfg.str("command");

    if (command == "score") return cmd_score(cfg);
    if (command == "rank") return cmd_rank(cfg);
    if (command == "inject") return cmd_inject(cfg);
    if (command == "evaluate") return cmd_evaluate(cfg);
    if (command == "vote") return cmd_vote(cfg);
    if (command == "consistency") return cmd_consistency(cfg);
    if (command == "correlate") return cmd_correlate(cfg);
    if (command == "collect-plan") return cmd_collect_plan(cfg);
    if (command == "write-sheet") return cmd_write_sheet(cfg);
    if (command == "report") return cmd_report(cfg);
    throw ConfigError("unknown command '" + command + "'");
}

}  // namespace odx
