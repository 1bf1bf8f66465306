#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "odx/autoencoder.hpp"
#include "odx/dataset.hpp"
#include "odx/ranking.hpp"

namespace odx {

struct AffectedObservation {
    std::string id;
    std::vector<Eigen::Index> dims;  // ascending
    std::vector<int> signs;          // +1/-1, aligned with dims
};

struct GroundTruth {
    std::vector<AffectedObservation> affected;
    bool empty() const { return affected.empty(); }
};

// Rows whose values differ by more than `tolerance` in any dimension;
// deviation sign is sign(pre - post), i.e. how the uncorrected value deviates
// from the corrected one. Requires identical ids and columns.
GroundTruth diff_datasets(const Dataset& pre, const Dataset& post,
                          double tolerance = 1e-9);

struct PerturbationSpec {
    std::string source_id;
    // dimension index -> signed delta in standardized units; 1..3 entries,
    // all non-zero.
    std::map<Eigen::Index, double> deltas;
};

// Parses [{"source_id": ..., "deltas": {"<column>": <signed real>}}].
std::vector<PerturbationSpec> parse_perturbation_specs(const std::string& json_text,
                                                       const Dataset& data);

struct InjectionResult {
    Dataset augmented;  // n + |specs| rows; new rows appended with fresh ids
    GroundTruth truth;
};

// Copies each source row, shifts it by the spec deltas (applied in
// standardized units, stored back in natural units) and appends it under a
// new id. When rankings are given, every source must rank below the median in
// all of them. All models must be retrained on the augmented dataset.
InjectionResult inject_synthetic(const Dataset& data,
                                 std::span<const PerturbationSpec> specs,
                                 std::span<const OutlierRanking> rankings = {});

// Fraction of affected observations inside the top cutoff% of the ranking.
std::map<double, double> detection_rate(const OutlierRanking& ranking,
                                        const GroundTruth& truth,
                                        std::span<const double> cutoffs);

struct GranularScore {
    std::string id;
    bool hit = false;
    bool zero_deviation = false;  // an affected dimension had deviation exactly 0
};

struct GranularResult {
    std::vector<GranularScore> per_observation;
    double mean = 0.0;
};

// 1 iff the |A| dimensions with the largest absolute deviations are exactly
// the affected set A (ties broken by ascending dimension index). Computed for
// every affected observation whether or not any method detected it.
GranularResult dimension_rank_accuracy(
    std::span<const ReconstructionReport> reports, const GroundTruth& truth);

// 1 iff the deviation sign matches the ground-truth sign on every affected
// dimension; a deviation of exactly zero counts as a miss and is flagged.
GranularResult direction_accuracy(std::span<const ReconstructionReport> reports,
                                  const GroundTruth& truth);

}  // namespace odx
