#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medrec/pipeline.hpp"
#include "medrec/scoring.hpp"

namespace medrec {

/// Ground truth: note id -> expected medication entries.
using GroundTruth = std::map<std::string, std::vector<MedicationEntry>>;

struct EfficiencyReport {
    std::chrono::milliseconds mean{0};
    int attempts = 0;
    std::map<std::string, std::chrono::milliseconds> per_model_mean;
    std::map<std::string, int> per_model_attempts;
};

/// Mean generation latency over every attempt, ok or failed (time was
/// spent either way), with a per-model breakdown.
/// Throws Error(no_data) when there were no generation attempts.
EfficiencyReport efficiency(const std::vector<TaskRecord>& records);

/// Mean f1-accuracy of each task's selected answer against ground truth;
/// tasks without a selected answer contribute 0.
/// Throws Error(missing_ground_truth) for an unresolvable note id.
double effectiveness(const std::vector<TaskRecord>& records, const GroundTruth& truth,
                     const ScoringParams& scoring = {});

/// 1 - sample standard deviation of per-task quality (consensus grade of
/// the selected answer, 0 for failed tasks), floored at 0.
/// Throws Error(too_few_tasks) with fewer than two tasks.
double stability(const std::vector<TaskRecord>& records);

/// Mean population variance of each response's explicit review grades,
/// over all responses with at least two of them. Lower is better.
/// Throws Error(no_multiply_graded_responses) when nothing qualifies.
double calibration(const std::vector<TaskRecord>& records);

/// "H hours, M minutes and S seconds" with zero leading units omitted;
/// seconds rounded to nearest before decomposition.
std::string format_duration(std::chrono::milliseconds d);

struct PerTaskRow {
    Strategy strategy = Strategy::random;
    int trial = 0;
    std::string note_id;
    int ok_responses = 0;
    int failures = 0;
    std::optional<std::string> selected_label;
    std::optional<double> selected_consensus;
    std::optional<double> f1;
};

/// The four metrics plus counts for one strategy's records.
struct StrategyReport {
    Strategy strategy = Strategy::random;
    int trials = 0;
    int tasks = 0;
    int answers = 0;
    int failures = 0;
    std::optional<std::chrono::milliseconds> mean_elapsed;
    std::optional<double> effectiveness;
    std::optional<double> stability;
    std::optional<double> calibration;
    std::vector<PerTaskRow> rows;
};

/// Aggregates one strategy. Metrics whose preconditions are unmet (too few
/// tasks, no graded responses) come back null; a missing ground-truth id
/// still throws.
StrategyReport build_strategy_report(Strategy strategy,
                                     const std::vector<TaskRecord>& records,
                                     const GroundTruth& truth,
                                     const ScoringParams& scoring = {});

std::string report_to_text(const std::vector<StrategyReport>& reports);
std::string report_rows_to_csv(const std::vector<StrategyReport>& reports);
nlohmann::json report_to_json(const std::vector<StrategyReport>& reports);

} // namespace medrec
