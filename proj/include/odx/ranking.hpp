#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace odx {

// Ordering used everywhere an "ascending observation id" tie-break is needed:
// ids that are pure digit strings compare numerically (by length, then
// lexicographically), anything else compares as a plain string.
bool id_less(const std::string& a, const std::string& b);

struct OutlierRanking {
    std::string method;             // ae | lof | iforest | free tag
    std::vector<std::string> ids;   // row order of the scored dataset
    std::vector<double> scores;     // per observation
    std::vector<int> ranks;         // per observation, 1 = most outlying
    std::vector<int> deciles;       // per observation, 1..10
    std::vector<std::size_t> order; // observation index per rank position

    std::size_t size() const { return ids.size(); }
};

// Descending score, ties broken by ascending id. Deciles follow
// ceil(10 * rank / n), clamped to [1, 10]. Throws NumericError on non-finite
// scores.
OutlierRanking rank_scores(std::vector<double> scores, std::vector<std::string> ids,
                           std::string method);

struct CutoffLabels {
    double cutoff_percent = 0.0;
    std::vector<int> labels;  // 0/1 per observation, in ranking row order
    int positives = 0;        // round(cutoff * n / 100), floor 1
};

// Labels the top round(cutoff * n / 100) ranks as outliers (half rounds up,
// minimum one positive). Requires 0 < cutoff < 100.
CutoffLabels top_percent_labels(const OutlierRanking& ranking, double cutoff_percent);

// Pearson correlation of two binary labelings (the phi coefficient). Empty
// when either vector has zero variance.
std::optional<double> phi_correlation(const CutoffLabels& a, const CutoffLabels& b);

// Deterministic validation subset: ceil(size/2) ids by stratified sampling of
// the rounded mean decile (bands 1-3, 4-7, 8-10), floor(size/2) ids with the
// largest pairwise decile gap across methods (gap > 0 only; shortfall returns
// to the stratified half). Result is sorted by id.
std::vector<std::string> select_validation_subset(
    std::span<const OutlierRanking> rankings, std::size_t size, std::uint64_t seed);

}  // namespace odx
