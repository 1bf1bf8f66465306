#include "odx/experts.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "odx/csv.hpp"
#include "odx/errors.hpp"
#include "odx/rng.hpp"

namespace odx {

namespace {

int parse_int_field(const std::string& field, const std::string& what, int lo, int hi) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || value < lo ||
        value > hi) {
        throw DataError(what + ": expected integer in [" + std::to_string(lo) + "," +
                        std::to_string(hi) + "], got '" + field + "'");
    }
    return value;
}

}  // namespace

std::size_t ExpertLabelSheet::expert_index(const std::string& expert_id) const {
    for (std::size_t e = 0; e < experts.size(); ++e) {
        if (experts[e].expert_id == expert_id) return e;
    }
    throw DataError("unknown expert: " + expert_id);
}

std::size_t ExpertLabelSheet::item_index(const std::string& item_id) const {
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].item_id == item_id) return i;
    }
    throw DataError("unknown item: " + item_id);
}

bool ExpertLabelSheet::has_duplicate_groups() const {
    std::unordered_map<int, int> counts;
    for (const auto& item : items) {
        if (item.dup_group >= 0 && ++counts[item.dup_group] >= 2) return true;
    }
    return false;
}

ExpertLabelSheet load_sheet_csv(const std::string& path) {
    const csv::Table table = csv::read_file(path);
    const std::vector<std::string> expected = {
        "expert_id", "item_id", "observation_id", "dup_group",
        "label",     "dims_used", "relevance",    "difficulty"};
    if (table.header != expected) {
        throw DataError(path + ": unexpected label-sheet header");
    }

    ExpertLabelSheet sheet;
    std::unordered_map<std::string, std::size_t> expert_idx;
    std::unordered_map<std::string, std::size_t> item_idx;
    std::unordered_set<std::string> seen_pairs;

    for (const auto& row : table.rows) {
        const std::string& expert_id = row[0];
        const std::string& item_id = row[1];
        const std::string& observation_id = row[2];
        const int dup_group = row[3].empty()
                                  ? -1
                                  : parse_int_field(row[3], path + ": dup_group", 0,
                                                    1 << 30);
        const int label = parse_int_field(row[4], path + ": label", 0, 2);
        const int relevance = parse_int_field(row[6], path + ": relevance", 1, 10);
        const int difficulty = parse_int_field(row[7], path + ": difficulty", 1, 10);

        if (!seen_pairs.insert(expert_id + "\x1f" + item_id).second) {
            throw DataError(path + ": duplicate row for expert '" + expert_id +
                            "', item '" + item_id + "'");
        }

        auto [eit, new_expert] = expert_idx.try_emplace(expert_id, sheet.experts.size());
        if (new_expert) {
            sheet.experts.push_back({expert_id, relevance, difficulty});
            sheet.labels.emplace_back();
            sheet.dims_used.emplace_back();
        } else {
            const auto& profile = sheet.experts[eit->second];
            if (profile.job_relevance != relevance || profile.difficulty != difficulty) {
                throw DataError(path + ": inconsistent relevance/difficulty for expert '" +
                                expert_id + "'");
            }
        }

        auto [iit, new_item] = item_idx.try_emplace(item_id, sheet.items.size());
        if (new_item) {
            sheet.items.push_back({item_id, observation_id, dup_group});
        } else {
            const auto& item = sheet.items[iit->second];
            if (item.observation_id != observation_id || item.dup_group != dup_group) {
                throw DataError(path + ": item '" + item_id +
                                "' maps to conflicting observations");
            }
        }

        const std::size_t e = eit->second;
        const std::size_t i = iit->second;
        if (sheet.labels[e].size() <= i) {
            sheet.labels[e].resize(sheet.items.size(), kUnlabeled);
            sheet.dims_used[e].resize(sheet.items.size());
        }
        sheet.labels[e][i] = label;
        sheet.dims_used[e][i] = csv::split_list(row[5]);
    }

    for (std::size_t e = 0; e < sheet.experts.size(); ++e) {
        sheet.labels[e].resize(sheet.items.size(), kUnlabeled);
        sheet.dims_used[e].resize(sheet.items.size());
    }

    // Duplicate groups need at least two presented copies.
    std::unordered_map<int, int> group_sizes;
    for (const auto& item : sheet.items) {
        if (item.dup_group >= 0) ++group_sizes[item.dup_group];
    }
    for (const auto& [group, count] : group_sizes) {
        if (count < 2) {
            throw DataError(path + ": duplicate group " + std::to_string(group) +
                            " has a single item");
        }
    }
    return sheet;
}

void save_sheet_csv(const ExpertLabelSheet& sheet, const std::string& path) {
    csv::Table table;
    table.header = {"expert_id", "item_id", "observation_id", "dup_group",
                    "label",     "dims_used", "relevance",    "difficulty"};
    for (std::size_t e = 0; e < sheet.experts.size(); ++e) {
        for (std::size_t i = 0; i < sheet.items.size(); ++i) {
            if (sheet.labels[e][i] == kUnlabeled) continue;
            std::string dims;
            for (std::size_t k = 0; k < sheet.dims_used[e][i].size(); ++k) {
                if (k) dims += ";";
                dims += sheet.dims_used[e][i][k];
            }
            table.rows.push_back({sheet.experts[e].expert_id,
                                  sheet.items[i].item_id,
                                  sheet.items[i].observation_id,
                                  sheet.items[i].dup_group < 0
                                      ? ""
                                      : std::to_string(sheet.items[i].dup_group),
                                  std::to_string(sheet.labels[e][i]),
                                  dims,
                                  std::to_string(sheet.experts[e].job_relevance),
                                  std::to_string(sheet.experts[e].difficulty)});
        }
    }
    csv::write_file(path, table);
}

std::vector<PresentedItem> inject_duplicates(const std::vector<std::string>& observation_ids,
                                             std::size_t dup_count, std::uint64_t seed) {
    if (dup_count > observation_ids.size()) {
        throw ConfigError("inject_duplicates: more duplicates than observations");
    }

    std::vector<PresentedItem> items;
    for (const auto& id : observation_ids) {
        items.push_back({"", id, -1});
    }
    if (dup_count > 0) {
        Rng rng(seed);
        auto picks = rng.sample_indices(observation_ids.size(), dup_count);
        for (std::size_t g = 0; g < picks.size(); ++g) {
            items[picks[g]].dup_group = static_cast<int>(g);
            items.push_back({"", observation_ids[picks[g]], static_cast<int>(g)});
        }
        rng.shuffle(items);
    }

    int width = 1;
    for (std::size_t v = items.size(); v >= 10; v /= 10) ++width;
    for (std::size_t i = 0; i < items.size(); ++i) {
        std::string num = std::to_string(i + 1);
        items[i].item_id = "it" + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num;
    }
    return items;
}

double consistency(const ExpertLabelSheet& sheet, const std::string& expert_id) {
    if (!sheet.has_duplicate_groups()) {
        throw DataError("consistency: sheet has no duplicate groups");
    }
    const std::size_t e = sheet.expert_index(expert_id);

    std::map<int, std::vector<int>> group_labels;
    for (std::size_t i = 0; i < sheet.items.size(); ++i) {
        const int g = sheet.items[i].dup_group;
        if (g >= 0 && sheet.labels[e][i] != kUnlabeled) {
            group_labels[g].push_back(sheet.labels[e][i]);
        }
    }

    int groups = 0;
    int uniform = 0;
    for (const auto& [g, labels] : group_labels) {
        if (labels.size() < 2) continue;
        ++groups;
        if (std::all_of(labels.begin(), labels.end(),
                        [&](int l) { return l == labels.front(); })) {
            ++uniform;
        }
    }
    if (groups == 0) {
        throw DataError("consistency: expert '" + expert_id +
                        "' labeled no complete duplicate group");
    }
    return static_cast<double>(uniform) / static_cast<double>(groups);
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw DataError("pearson: length mismatch");
    }
    const auto n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return std::nullopt;
    return cov / std::sqrt(va * vb);
}

std::vector<double> midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });

    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DataError("spearman: length mismatch");
    }
    if (a.size() < 3) {
        throw DataError("spearman: need at least 3 jointly observed items");
    }
    return pearson(midranks(a), midranks(b));
}

std::optional<double> expert_spearman(const ExpertLabelSheet& sheet,
                                      const std::string& expert_a,
                                      const std::string& expert_b) {
    const std::size_t ea = sheet.expert_index(expert_a);
    const std::size_t eb = sheet.expert_index(expert_b);
    std::vector<double> va, vb;
    for (std::size_t i = 0; i < sheet.items.size(); ++i) {
        const int la = sheet.labels[ea][i];
        const int lb = sheet.labels[eb][i];
        if ((la == kLabelNormal || la == kLabelOutlier) &&
            (lb == kLabelNormal || lb == kLabelOutlier)) {
            va.push_back(la);
            vb.push_back(lb);
        }
    }
    return spearman(va, vb);
}

std::vector<std::vector<int>> dimension_usage(const ExpertLabelSheet& sheet,
                                              const std::vector<std::string>& columns) {
    std::unordered_map<std::string, std::size_t> column_idx;
    for (std::size_t j = 0; j < columns.size(); ++j) column_idx[columns[j]] = j;

    std::vector<std::vector<int>> counts(sheet.experts.size(),
                                         std::vector<int>(columns.size(), 0));
    for (std::size_t e = 0; e < sheet.experts.size(); ++e) {
        for (std::size_t i = 0; i < sheet.items.size(); ++i) {
            for (const auto& dim : sheet.dims_used[e][i]) {
                auto it = column_idx.find(dim);
                if (it == column_idx.end()) {
                    throw DataError("dimension_usage: unknown dimension name '" + dim + "'");
                }
                ++counts[e][it->second];
            }
        }
    }
    return counts;
}

VoteResult tally_votes(std::span<const int> labels, std::span<const double> weights) {
    if (labels.size() != weights.size()) {
        throw DataError("tally_votes: weights do not cover all voters");
    }
    VoteResult result;
    int voters = 0;
    for (std::size_t s = 0; s < labels.size(); ++s) {
        if (labels[s] == kUnlabeled) continue;
        result.tallies[static_cast<std::size_t>(labels[s])] += weights[s];
        ++voters;
    }
    if (voters == 0) {
        throw DataError("tally_votes: no votes for observation");
    }
    const double top = *std::max_element(result.tallies.begin(), result.tallies.end());
    int argmax = -1;
    int winners = 0;
    for (int j = 0; j < 3; ++j) {
        if (result.tallies[static_cast<std::size_t>(j)] == top) {
            ++winners;
            if (argmax < 0) argmax = j;
        }
    }
    if (winners > 1) {
        result.label = kLabelUndecided;
        result.tie = true;
    } else {
        result.label = argmax;
    }
    return result;
}

std::vector<double> expert_weights(const ExpertLabelSheet& sheet, Weighting weighting) {
    std::vector<double> weights;
    weights.reserve(sheet.experts.size());
    for (const auto& expert : sheet.experts) {
        if (expert.job_relevance < 1 || expert.difficulty < 1) {
            throw DataError("missing profile for expert '" + expert.expert_id + "'");
        }
        switch (weighting) {
            case Weighting::job_relevance:
                weights.push_back(expert.job_relevance);
                break;
            case Weighting::inverse_difficulty:
                weights.push_back(1.0 / expert.difficulty);
                break;
            case Weighting::reversed_difficulty:
                weights.push_back(11.0 - expert.difficulty);
                break;
        }
    }
    return weights;
}

std::vector<ObservationVotes> collect_observation_votes(const ExpertLabelSheet& sheet) {
    std::vector<ObservationVotes> votes;
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < sheet.items.size(); ++i) {
        const auto& obs = sheet.items[i].observation_id;
        auto [it, fresh] = seen.try_emplace(obs, votes.size());
        if (fresh) {
            votes.push_back({obs, std::vector<int>(sheet.experts.size(), kUnlabeled)});
        }
        auto& slot = votes[it->second];
        for (std::size_t e = 0; e < sheet.experts.size(); ++e) {
            // First presented copy wins; later copies do not add extra votes.
            if (slot.labels[e] == kUnlabeled) slot.labels[e] = sheet.labels[e][i];
        }
    }
    return votes;
}

namespace {

VoteResult vote_for_observation(const ExpertLabelSheet& sheet,
                                const std::string& observation_id,
                                const std::vector<double>& weights) {
    for (const auto& votes : collect_observation_votes(sheet)) {
        if (votes.observation_id == observation_id) {
            return tally_votes(votes.labels, weights);
        }
    }
    throw DataError("no expert labeled observation '" + observation_id + "'");
}

}  // namespace

VoteResult majority_vote_unweighted(const ExpertLabelSheet& sheet,
                                    const std::string& observation_id) {
    return vote_for_observation(sheet, observation_id,
                                std::vector<double>(sheet.experts.size(), 1.0));
}

VoteResult majority_vote_weighted(const ExpertLabelSheet& sheet,
                                  const std::string& observation_id, Weighting weighting) {
    return vote_for_observation(sheet, observation_id, expert_weights(sheet, weighting));
}

namespace {

std::unordered_map<std::string, int> label_lookup(const CutoffLabels& labels,
                                                  const std::vector<std::string>& ids) {
    if (labels.labels.size() != ids.size()) {
        throw DataError("labeling does not cover the ranked observations");
    }
    std::unordered_map<std::string, int> map;
    for (std::size_t i = 0; i < ids.size(); ++i) map[ids[i]] = labels.labels[i];
    return map;
}

}  // namespace

AccuracyResult ensemble_accuracy(
    std::span<const std::pair<std::string, VoteResult>> votes,
    const CutoffLabels& labels, const std::vector<std::string>& ranking_ids) {
    const auto truth = label_lookup(labels, ranking_ids);
    AccuracyResult result;
    for (const auto& [obs, vote] : votes) {
        auto it = truth.find(obs);
        if (it == truth.end()) {
            throw DataError("observation '" + obs + "' missing from the ranking");
        }
        ++result.evaluated;
        if (vote.label == kLabelUndecided) continue;
        ++result.decided;
        if (vote.label == it->second) ++result.correct;
    }
    if (result.decided == 0) {
        throw DataError("ensemble_accuracy: every ensemble vote is undecided");
    }
    result.accuracy = static_cast<double>(result.correct) / result.decided;
    result.coverage = static_cast<double>(result.decided) / result.evaluated;
    return result;
}

std::optional<AccuracyResult> individual_accuracy(const ExpertLabelSheet& sheet,
                                                  const std::string& expert_id,
                                                  const CutoffLabels& labels,
                                                  const std::vector<std::string>& ranking_ids) {
    const auto truth = label_lookup(labels, ranking_ids);
    const std::size_t e = sheet.expert_index(expert_id);

    AccuracyResult result;
    for (const auto& votes : collect_observation_votes(sheet)) {
        auto it = truth.find(votes.observation_id);
        if (it == truth.end()) {
            throw DataError("observation '" + votes.observation_id +
                            "' missing from the ranking");
        }
        const int label = votes.labels[e];
        if (label == kUnlabeled) continue;
        ++result.evaluated;
        if (label == kLabelUndecided) continue;
        ++result.decided;
        if (label == it->second) ++result.correct;
    }
    if (result.decided == 0) return std::nullopt;
    result.accuracy = static_cast<double>(result.correct) / result.decided;
    result.coverage = static_cast<double>(result.decided) / result.evaluated;
    return result;
}

}  // namespace odx
