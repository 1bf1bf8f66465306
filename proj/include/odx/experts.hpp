#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odx/ranking.hpp"

namespace odx {

// Expert labels: 0 normal, 1 outlier, 2 undecided; -1 marks "not labeled"
// inside a sheet and never appears on disk.
inline constexpr int kLabelNormal = 0;
inline constexpr int kLabelOutlier = 1;
inline constexpr int kLabelUndecided = 2;
inline constexpr int kUnlabeled = -1;

struct ExpertProfile {
    std::string expert_id;
    int job_relevance = 0;  // 1..10
    int difficulty = 0;     // 1..10
};

struct PresentedItem {
    std::string item_id;
    std::string observation_id;
    int dup_group = -1;  // >= 0 links copies of the same observation
};

// One labeling study: every expert saw the same presented items (some of
// which are duplicates) without any method output.
struct ExpertLabelSheet {
    std::vector<PresentedItem> items;    // presentation order
    std::vector<ExpertProfile> experts;  // encounter order
    std::vector<std::vector<int>> labels;  // experts x items, kUnlabeled allowed
    std::vector<std::vector<std::vector<std::string>>> dims_used;  // experts x items

    std::size_t expert_index(const std::string& expert_id) const;
    std::size_t item_index(const std::string& item_id) const;
    bool has_duplicate_groups() const;
};

// CSV schema: expert_id,item_id,observation_id,dup_group,label,dims_used,
// relevance,difficulty. dims_used is a semicolon-separated list of column
// names; dup_group is empty for non-duplicated items.
ExpertLabelSheet load_sheet_csv(const std::string& path);
void save_sheet_csv(const ExpertLabelSheet& sheet, const std::string& path);

// Duplicates dup_count randomly chosen observations, shuffles the
// presentation order and assigns duplicate-group ids. dup_count = 0 returns
// the input order untouched. Item ids are assigned in presentation order.
std::vector<PresentedItem> inject_duplicates(const std::vector<std::string>& observation_ids,
                                             std::size_t dup_count, std::uint64_t seed);

// Fraction of this expert's duplicate groups labeled identically across all
// copies. Throws DataError when the sheet (or this expert) has no duplicate
// groups with at least two labeled copies.
double consistency(const ExpertLabelSheet& sheet, const std::string& expert_id);

// Pearson correlation; empty when either side has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

// Mid-rank (average ties) ranks of a vector.
std::vector<double> midranks(std::span<const double> values);

// Spearman rho with mid-rank ties. Throws DataError for fewer than 3 pairs;
// empty when either side has zero variance.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

// Spearman over the items both experts labeled 0 or 1 (undecided excluded
// pairwise).
std::optional<double> expert_spearman(const ExpertLabelSheet& sheet,
                                      const std::string& expert_a,
                                      const std::string& expert_b);

// Count matrix experts x columns of reported dimension usage. Throws
// DataError on a dimension name outside `columns`.
std::vector<std::vector<int>> dimension_usage(const ExpertLabelSheet& sheet,
                                              const std::vector<std::string>& columns);

struct VoteResult {
    int label = kLabelUndecided;
    std::array<double, 3> tallies{};  // votes (or weight sums) per class
    bool tie = false;                 // argmax was shared; label forced to 2
};

enum class Weighting {
    job_relevance,       // w = relevance
    inverse_difficulty,  // w = 1 / difficulty
    reversed_difficulty, // w = 11 - difficulty
};

// Tallies one vote per expert (kUnlabeled entries skipped) and takes the
// argmax over classes {0,1,2}; a shared maximum yields label 2 with the tie
// flag set. Throws DataError when nobody voted.
VoteResult tally_votes(std::span<const int> labels, std::span<const double> weights);

std::vector<double> expert_weights(const ExpertLabelSheet& sheet, Weighting weighting);

// Per-observation expert labels, one per expert, taken from the first
// presented copy of each observation; aligned with sheet.experts.
struct ObservationVotes {
    std::string observation_id;
    std::vector<int> labels;
};
std::vector<ObservationVotes> collect_observation_votes(const ExpertLabelSheet& sheet);

VoteResult majority_vote_unweighted(const ExpertLabelSheet& sheet,
                                    const std::string& observation_id);
VoteResult majority_vote_weighted(const ExpertLabelSheet& sheet,
                                  const std::string& observation_id, Weighting weighting);

struct AccuracyResult {
    double accuracy = 0.0;  // over decided observations
    double coverage = 0.0;  // decided / evaluated
    int decided = 0;
    int correct = 0;
    int evaluated = 0;
};

// Accuracy of ensemble votes against a method labeling, skipping undecided
// ensemble outputs. `votes` pairs observation ids with vote results. Throws
// DataError when no observation is decided.
AccuracyResult ensemble_accuracy(
    std::span<const std::pair<std::string, VoteResult>> votes,
    const CutoffLabels& labels, const std::vector<std::string>& ranking_ids);

// Accuracy of one expert against a method labeling over that expert's
// decided items; empty when the expert decided nothing.
std::optional<AccuracyResult> individual_accuracy(const ExpertLabelSheet& sheet,
                                                  const std::string& expert_id,
                                                  const CutoffLabels& labels,
                                                  const std::vector<std::string>& ranking_ids);

}  // namespace odx
