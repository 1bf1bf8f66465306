#include "odx/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "odx/errors.hpp"

namespace odx {

GroundTruth diff_datasets(const Dataset& pre, const Dataset& post, double tolerance) {
    if (pre.columns != post.columns || pre.ids != post.ids) {
        throw DataError("diff_datasets: datasets differ in ids or columns");
    }
    GroundTruth truth;
    for (Eigen::Index i = 0; i < pre.rows(); ++i) {
        AffectedObservation obs;
        for (Eigen::Index j = 0; j < pre.dims(); ++j) {
            const double delta = pre.values(i, j) - post.values(i, j);
            if (std::abs(delta) > tolerance) {
                obs.dims.push_back(j);
                obs.signs.push_back(delta > 0 ? +1 : -1);
            }
        }
        if (!obs.dims.empty()) {
            obs.id = pre.ids[static_cast<std::size_t>(i)];
            truth.affected.push_back(std::move(obs));
        }
    }
    return truth;
}

std::vector<PerturbationSpec> parse_perturbation_specs(const std::string& json_text,
                                                       const Dataset& data) {
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("perturbation specs: invalid JSON: ") + e.what());
    }
    if (!parsed.is_array()) {
        throw ConfigError("perturbation specs: expected a JSON array");
    }

    std::vector<PerturbationSpec> specs;
    for (const auto& entry : parsed) {
        if (!entry.is_object() || !entry.contains("source_id") ||
            !entry.contains("deltas") || !entry["deltas"].is_object()) {
            throw ConfigError("perturbation specs: each entry needs source_id and deltas");
        }
        for (const auto& [key, value] : entry.items()) {
            if (key != "source_id" && key != "deltas") {
                throw ConfigError("perturbation specs: unknown key '" + key + "'");
            }
        }
        PerturbationSpec spec;
        spec.source_id = entry["source_id"].get<std::string>();
        for (const auto& [dim, delta] : entry["deltas"].items()) {
            if (!delta.is_number()) {
                throw ConfigError("perturbation specs: delta for '" + dim +
                                  "' is not a number");
            }
            spec.deltas[data.column_index(dim)] = delta.get<double>();
        }
        if (spec.deltas.empty() || spec.deltas.size() > 3) {
            throw ConfigError("perturbation specs: 1 to 3 perturbed dimensions required");
        }
        for (const auto& [dim, delta] : spec.deltas) {
            if (delta == 0.0) {
                throw ConfigError("perturbation specs: zero delta for dimension '" +
                                  data.columns[static_cast<std::size_t>(dim)] + "'");
            }
        }
        specs.push_back(std::move(spec));
    }
    return specs;
}

InjectionResult inject_synthetic(const Dataset& data,
                                 std::span<const PerturbationSpec> specs,
                                 std::span<const OutlierRanking> rankings) {
    for (const auto& ranking : rankings) {
        if (ranking.ids != data.ids) {
            throw DataError("inject_synthetic: ranking does not cover the dataset");
        }
    }

    const StandardizationParams params = fit_standardizer(data);
    const double median_rank = (static_cast<double>(data.rows()) + 1.0) / 2.0;

    InjectionResult result;
    result.augmented = data;
    result.augmented.values.conservativeResize(
        data.rows() + static_cast<Eigen::Index>(specs.size()), Eigen::NoChange);

    std::unordered_set<std::string> taken(data.ids.begin(), data.ids.end());
    for (std::size_t k = 0; k < specs.size(); ++k) {
        const auto& spec = specs[k];
        const Eigen::Index src = data.row_index(spec.source_id);

        for (const auto& ranking : rankings) {
            if (ranking.ranks[static_cast<std::size_t>(src)] <= median_rank) {
                throw DataError("inject_synthetic: source '" + spec.source_id +
                                "' is not non-outlying; it sits in decile " +
                                std::to_string(ranking.deciles[static_cast<std::size_t>(src)]) +
                                " of the " + ranking.method + " ranking");
            }
        }

        Eigen::RowVectorXd row = data.values.row(src);
        for (const auto& [dim, delta] : spec.deltas) {
            row(dim) += delta * params.stddev(dim);
        }
        result.augmented.values.row(data.rows() + static_cast<Eigen::Index>(k)) = row;

        const std::string new_id = "syn" + std::to_string(k + 1);
        if (!taken.insert(new_id).second) {
            throw DataError("inject_synthetic: generated id '" + new_id +
                            "' collides with an existing observation");
        }
        result.augmented.ids.push_back(new_id);

        AffectedObservation obs;
        obs.id = new_id;
        for (const auto& [dim, delta] : spec.deltas) {
            obs.dims.push_back(dim);
            obs.signs.push_back(delta > 0 ? +1 : -1);
        }
        result.truth.affected.push_back(std::move(obs));
    }
    return result;
}

std::map<double, double> detection_rate(const OutlierRanking& ranking,
                                        const GroundTruth& truth,
                                        std::span<const double> cutoffs) {
    if (truth.empty()) {
        throw DataError("detection_rate: ground truth is empty");
    }
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < ranking.ids.size(); ++i) row_of[ranking.ids[i]] = i;

    std::map<double, double> rates;
    for (const double cutoff : cutoffs) {
        const CutoffLabels labels = top_percent_labels(ranking, cutoff);
        int hits = 0;
        for (const auto& obs : truth.affected) {
            auto it = row_of.find(obs.id);
            if (it == row_of.end()) {
                throw DataError("detection_rate: affected id '" + obs.id +
                                "' missing from the ranking");
            }
            hits += labels.labels[it->second];
        }
        rates[cutoff] = static_cast<double>(hits) /
                        static_cast<double>(truth.affected.size());
    }
    return rates;
}

namespace {

const ReconstructionReport& report_for(std::span<const ReconstructionReport> reports,
                                       const std::string& id) {
    for (const auto& report : reports) {
        if (report.id == id) return report;
    }
    throw DataError("missing reconstruction report for observation '" + id + "'");
}

}  // namespace

GranularResult dimension_rank_accuracy(std::span<const ReconstructionReport> reports,
                                       const GroundTruth& truth) {
    GranularResult result;
    int hits = 0;
    for (const auto& obs : truth.affected) {
        const auto& report = report_for(reports, obs.id);
        const std::size_t d = static_cast<std::size_t>(report.deviations.size());

        std::vector<Eigen::Index> order(d);
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            const double da = std::abs(report.deviations(a));
            const double db = std::abs(report.deviations(b));
            if (da != db) return da > db;
            return a < b;  // deterministic tie-break
        });
        order.resize(obs.dims.size());
        std::sort(order.begin(), order.end());

        const bool hit = order == obs.dims;
        hits += hit;
        result.per_observation.push_back({obs.id, hit, false});
    }
    result.mean = truth.affected.empty()
                      ? 0.0
                      : static_cast<double>(hits) / static_cast<double>(truth.affected.size());
    return result;
}

GranularResult direction_accuracy(std::span<const ReconstructionReport> reports,
                                  const GroundTruth& truth) {
    GranularResult result;
    int hits = 0;
    for (const auto& obs : truth.affected) {
        const auto& report = report_for(reports, obs.id);
        bool hit = true;
        bool zero = false;
        for (std::size_t k = 0; k < obs.dims.size(); ++k) {
            const double dev = report.deviations(obs.dims[k]);
            if (dev == 0.0) {
                zero = true;
                hit = false;
            } else if ((dev > 0 ? +1 : -1) != obs.signs[k]) {
                hit = false;
            }
        }
        hits += hit;
        result.per_observation.push_back({obs.id, hit, zero});
    }
    result.mean = truth.affected.empty()
                      ? 0.0
                      : static_cast<double>(hits) / static_cast<double>(truth.affected.size());
    return result;
}

}  // namespace odx
