#include "odx/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include "odx/errors.hpp"
#include "odx/rng.hpp"

namespace odx {

bool id_less(const std::string& a, const std::string& b) {
    auto all_digits = [](const std::string& s) {
        return !s.empty() &&
               std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
    };
    if (all_digits(a) && all_digits(b)) {
        if (a.size() != b.size()) return a.size() < b.size();
    }
    return a < b;
}

OutlierRanking rank_scores(std::vector<double> scores, std::vector<std::string> ids,
                           std::string method) {
    if (scores.size() != ids.size() || scores.empty()) {
        throw DataError("rank_scores: need one score per observation");
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw NumericError("rank_scores: non-finite score for id " + ids[i]);
        }
    }

    OutlierRanking ranking;
    ranking.method = std::move(method);
    const std::size_t n = scores.size();
    ranking.order.resize(n);
    std::iota(ranking.order.begin(), ranking.order.end(), std::size_t{0});
    std::sort(ranking.order.begin(), ranking.order.end(),
              [&](std::size_t a, std::size_t b) {
                  if (scores[a] != scores[b]) return scores[a] > scores[b];
                  return id_less(ids[a], ids[b]);
              });

    ranking.ranks.resize(n);
    ranking.deciles.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const int rank = static_cast<int>(pos) + 1;
        const std::size_t obs = ranking.order[pos];
        ranking.ranks[obs] = rank;
        const int decile = static_cast<int>(
            (10 * static_cast<std::size_t>(rank) + n - 1) / n);
        ranking.deciles[obs] = std::clamp(decile, 1, 10);
    }
    ranking.ids = std::move(ids);
    ranking.scores = std::move(scores);
    return ranking;
}

CutoffLabels top_percent_labels(const OutlierRanking& ranking, double cutoff_percent) {
    if (!(cutoff_percent > 0.0 && cutoff_percent < 100.0)) {
        throw ConfigError("cutoff must lie in (0, 100), got " +
                          std::to_string(cutoff_percent));
    }
    const std::size_t n = ranking.size();
    auto count = static_cast<long long>(
        std::llround(cutoff_percent * static_cast<double>(n) / 100.0));
    count = std::clamp<long long>(count, 1, static_cast<long long>(n));

    CutoffLabels labels;
    labels.cutoff_percent = cutoff_percent;
    labels.positives = static_cast<int>(count);
    labels.labels.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (ranking.ranks[i] <= count) labels.labels[i] = 1;
    }
    return labels;
}

std::optional<double> phi_correlation(const CutoffLabels& a, const CutoffLabels& b) {
    if (a.labels.size() != b.labels.size() || a.labels.empty()) {
        throw DataError("phi_correlation: label vectors differ in length");
    }
    const auto n = static_cast<long long>(a.labels.size());
    long long sa = 0, sb = 0, sab = 0;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        sa += a.labels[i];
        sb += b.labels[i];
        sab += a.labels[i] & b.labels[i];
    }
    const long long var_a = n * sa - sa * sa;
    const long long var_b = n * sb - sb * sb;
    if (var_a == 0 || var_b == 0) return std::nullopt;
    const double num = static_cast<double>(n * sab - sa * sb);
    return num / std::sqrt(static_cast<double>(var_a) * static_cast<double>(var_b));
}

namespace {

int decile_band(double mean_decile) {
    const auto rounded = static_cast<int>(std::llround(mean_decile));
    if (rounded <= 3) return 0;
    if (rounded <= 7) return 1;
    return 2;
}

}  // namespace

std::vector<std::string> select_validation_subset(
    std::span<const OutlierRanking> rankings, std::size_t size, std::uint64_t seed) {
    if (rankings.empty()) {
        throw ConfigError("select_validation_subset: no rankings given");
    }
    const std::size_t n = rankings.front().size();
    for (const auto& r : rankings) {
        if (r.size() != n || r.ids != rankings.front().ids) {
            throw DataError("select_validation_subset: rankings cover different ids");
        }
    }
    if (size > n) {
        throw ConfigError("select_validation_subset: size exceeds observation count");
    }

    const auto& ids = rankings.front().ids;

    // Work in id order so the result is invariant to input row order.
    std::vector<std::size_t> by_id(n);
    std::iota(by_id.begin(), by_id.end(), std::size_t{0});
    std::sort(by_id.begin(), by_id.end(),
              [&](std::size_t a, std::size_t b) { return id_less(ids[a], ids[b]); });

    std::vector<int> gap(n, 0);
    std::vector<double> mean_decile(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        int lo = 11, hi = 0;
        for (const auto& r : rankings) {
            const int d = r.deciles[i];
            sum += d;
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        mean_decile[i] = sum / static_cast<double>(rankings.size());
        gap[i] = hi - lo;
    }

    const std::size_t disagreement_quota = size / 2;
    std::vector<std::size_t> disagreeing;
    for (std::size_t obs : by_id) {
        if (gap[obs] > 0) disagreeing.push_back(obs);
    }
    std::stable_sort(disagreeing.begin(), disagreeing.end(),
                     [&](std::size_t a, std::size_t b) { return gap[a] > gap[b]; });

    std::unordered_set<std::size_t> chosen;
    for (std::size_t obs : disagreeing) {
        if (chosen.size() >= disagreement_quota) break;
        chosen.insert(obs);
    }

    // The stratified half also absorbs any unmet disagreement quota.
    std::size_t strat_quota = size - chosen.size();
    std::vector<std::vector<std::size_t>> bands(3);
    for (std::size_t obs : by_id) {
        if (!chosen.count(obs)) bands[static_cast<std::size_t>(decile_band(mean_decile[obs]))].push_back(obs);
    }
    for (std::size_t band = 0; band < 3 && strat_quota > 0; ++band) {
        const std::size_t want =
            std::min(bands[band].size(), strat_quota / (3 - band) +
                                             (strat_quota % (3 - band) ? 1u : 0u));
        Rng rng(child_seed(seed, band));
        for (std::size_t pick : rng.sample_indices(bands[band].size(), want)) {
            chosen.insert(bands[band][pick]);
        }
        strat_quota -= want;
    }
    if (strat_quota > 0) {
        // Bands ran dry; fill from the remaining pool by largest gap, id order.
        std::vector<std::size_t> rest;
        for (std::size_t obs : by_id) {
            if (!chosen.count(obs)) rest.push_back(obs);
        }
        std::stable_sort(rest.begin(), rest.end(),
                         [&](std::size_t a, std::size_t b) { return gap[a] > gap[b]; });
        for (std::size_t obs : rest) {
            if (strat_quota == 0) break;
            chosen.insert(obs);
            --strat_quota;
        }
    }

    std::vector<std::string> out;
    out.reserve(chosen.size());
    for (std::size_t obs : by_id) {
        if (chosen.count(obs)) out.push_back(ids[obs]);
    }
    return out;
}

}  // namespace odx
