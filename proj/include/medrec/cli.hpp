#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "medrec/chemistry.hpp"
#include "medrec/metrics.hpp"
#include "medrec/store.hpp"

namespace medrec {

/// Everything a reproducible experiment run needs. Secrets stay in
/// environment variables; all behavior lives here.
struct RunPlan {
    std::string dataset_path;
    std::string registry_path;
    std::vector<Strategy> strategies;
    int n = 3;
    int trials = 1;
    std::uint64_t seed = 0;
    /// Number of dataset records per trial (the experiment subset).
    int records_limit = 10;
    std::chrono::milliseconds timeout{300'000};
    /// Scripted backend mode when set; live providers otherwise.
    std::optional<std::string> script_path;
    /// Run logs the CHEMISTRY strategy mines for its recommendation.
    std::vector<std::string> chemistry_from;
    std::string out_dir = "runs";
    std::optional<std::string> prompts_dir;
    /// Run a trial's tasks concurrently; per-task wall timing then
    /// overlaps, which the run summary calls out.
    bool parallel_tasks = false;
    bool implicit_self_grade = true;
    double self_grade_value = 1.0;
};

struct StrategyRunSummary {
    Strategy strategy = Strategy::random;
    std::string log_path;
    int tasks = 0;
    int answers = 0;
    int failures = 0;
};

struct RunSummary {
    std::vector<StrategyRunSummary> strategies;

    int total_answers() const;
    int total_failures() const;
};

/// Executes the plan: per strategy and trial, sample an ensemble, run every
/// record through the pipeline, append each TaskRecord to a fresh JSONL
/// log. Task failures are data and never abort the run. The transport
/// override replaces the plan's backend (used by tests to inject faults or
/// capture prompts).
RunSummary run_experiment(const RunPlan& plan,
                          std::shared_ptr<ModelTransport> transport_override = nullptr);

struct RecommendOptions {
    std::size_t n = 3;
    ChemistryWeights weights;
    int min_obs = 3;
    std::size_t top_k = 10;
};

ChemistryRecommendation cmd_recommend(const std::vector<std::string>& log_paths,
                                      const RecommendOptions& options);

nlohmann::json chemistry_report_to_json(const ChemistryRecommendation& recommendation,
                                        std::size_t top_k);

enum class ReportFormat { text, json, csv };

/// Merges the logs per strategy and renders the four-metric report.
std::string cmd_report(const std::vector<std::string>& log_paths,
                       const std::string& dataset_path, ReportFormat format);

struct SynthesizeOptions {
    std::string model_name;
    std::string registry_path;
    std::optional<std::string> script_path;
    std::chrono::milliseconds timeout{300'000};
};

/// Reverse synthesis: one vignette request per medication set; the output
/// dataset is marked unvalidated. Per-set backend failures drop the record
/// with a warning instead of aborting.
Dataset cmd_synthesize(const std::string& medication_sets_path,
                       const SynthesizeOptions& options);

/// Flag parsing + dispatch; returns the process exit code
/// (0 ok, 2 configuration error, 3 data error).
int run_cli(int argc, char** argv);

} // namespace medrec
