#pragma once

#include <map>
#include <vector>

#include "medrec/pipeline.hpp"

namespace medrec {

/// Per-model statistics mined from historical task records. All grade
/// statistics come from explicit peer-review cells only; implicit
/// self-grades are excluded. Latency and failure rate cover generation
/// attempts, successful or not.
struct ModelProfile {
    ModelId model;
    double mean_received_grade = 0.0;
    double grade_variance_across_tasks = 0.0;
    std::chrono::milliseconds mean_elapsed{0};
    double failure_rate = 0.0;
    /// Number of task records the model generated in.
    int observations = 0;
    /// Met the min_obs bar and received at least one peer grade.
    bool eligible = false;
};

struct AgreementEntry {
    double mean_squared_diff = 0.0;
    int shared_items = 0;
};

/// Symmetric pairwise disagreement: mean squared difference of two models'
/// explicit grades over the items both reviewed. Pairs that never shared an
/// item are absent.
struct AgreementMatrix {
    /// Keyed by the name pair in sorted order.
    std::map<std::pair<std::string, std::string>, AgreementEntry> entries;

    const AgreementEntry* find(const std::string& a, const std::string& b) const;
    /// Mean over all present entries; 0 when empty.
    double global_mean() const;
};

struct ChemistryWeights {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 0.25;
};

/// score = alpha * quality - beta * disagreement - gamma * latency_penalty.
struct ChemistryScore {
    std::vector<ModelId> members;
    double score = 0.0;
    double quality = 0.0;
    double disagreement = 0.0;
    double latency_penalty = 0.0;
    /// Member pairs whose disagreement was imputed from the global mean
    /// because they never co-reviewed an item.
    int imputed_pairs = 0;
};

struct ChemistryRecommendation {
    ChemistryScore best;
    /// Every candidate subset, best first (ties broken by member names).
    std::vector<ChemistryScore> ranked;
    ChemistryWeights weights;
    /// Documents what the surrogate scored: explicit peer grades and
    /// generation-attempt latency/failure statistics.
    std::string stats_basis;
};

/// Aggregates per-model profiles across records. Models below min_obs are
/// reported but ineligible. Throws Error(no_eligible_models) when nothing
/// qualifies.
std::map<std::string, ModelProfile> build_profiles(const std::vector<TaskRecord>& records,
                                                   int min_obs = 3);

AgreementMatrix build_agreement(const std::vector<TaskRecord>& records);

/// Exhaustively scores every n-subset of the eligible models. Quality is
/// the mean member received grade; disagreement the mean pairwise
/// agreement entry (global mean when a pair is missing); latency_penalty
/// the subset's mean latency normalized by the slowest eligible model.
/// Throws Error(too_few_eligible) when fewer than n models qualify.
ChemistryRecommendation recommend_ensemble(const std::map<std::string, ModelProfile>& profiles,
                                           const AgreementMatrix& agreement, std::size_t n,
                                           const ChemistryWeights& weights = {});

} // namespace medrec
