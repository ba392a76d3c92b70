#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "medrec/backend.hpp"
#include "medrec/consensus.hpp"
#include "medrec/prompts.hpp"

namespace medrec {

/// Per-task knobs. The trial seed plus the note id derive all per-task
/// randomness (label shuffle), so trials replay record-by-record.
struct TaskParams {
    VancouverParams consensus;
    /// Insert an implicit self-grade for each ok response.
    bool implicit_self_grade = true;
    /// Value of that self-grade; 1.0 is the maximal-endorsement reading.
    double self_grade_value = 1.0;
    std::chrono::milliseconds timeout{300'000};
    PromptTemplates templates = PromptTemplates::defaults();
    std::uint64_t trial_seed = 0;
};

struct GenerationMember {
    ModelId model;
    CompletionResult result;
    /// Anonymized label ("Response A", ...); present iff the result is ok.
    std::optional<std::string> label;
};

struct GenerationOutput {
    std::vector<GenerationMember> members;

    int ok_count() const;
    const GenerationMember* by_label(const std::string& label) const;
};

struct TaskFailure {
    enum class Phase { generation, review };
    Phase phase = Phase::generation;
    ModelId model;
    /// Reviewed item label; absent for generation failures.
    std::optional<std::string> item;
    Outcome outcome = Outcome::transport_failed;
};

const char* to_string(TaskFailure::Phase p);

struct SelectedAnswer {
    std::string label;
    Recommendation recommendation;
};

/// Wall-clock measurements. Everything here varies run to run; reproducing
/// a scripted run compares records with this block masked.
struct TaskTiming {
    std::string started_at;
    std::string finished_at;
    std::int64_t generation_wall_ms = 0;
    std::int64_t evaluation_wall_ms = 0;
    std::int64_t consensus_wall_ms = 0;
};

/// One full pipeline execution for one clinical note.
struct TaskRecord {
    int schema_version = 1;
    Strategy strategy = Strategy::random;
    int trial = 0;
    std::string note_id;
    EnsembleConfig ensemble;
    std::vector<GenerationMember> generations;
    GradeMatrix matrix;
    std::optional<ConsensusResult> consensus;
    std::optional<SelectedAnswer> selected;
    std::vector<TaskFailure> failures;
    TaskTiming timing;
    bool all_generations_failed = false;
    /// Unknown top-level JSON fields, preserved across log rewrites.
    nlohmann::json extra = nlohmann::json::object();
};

/// Canonical JSON of a recommendation as shown to reviewers; carries no
/// model identity.
std::string recommendation_to_prompt_json(const Recommendation& rec);

/// Concurrent fan-out of the generation prompt to every ensemble member.
/// Labels are assigned to ok responses in seeded-shuffled order.
GenerationOutput generation_stage(const ClinicalNote& note, const EnsembleConfig& ensemble,
                                  const CompletionService& service,
                                  const TaskParams& params);

/// One review call to issue: reviewer grades the item authored by someone
/// else. Only members with ok responses review.
struct ReviewAssignment {
    ModelId reviewer;
    std::string item;
    std::string response_json;
};

/// The full bipartite review plan in deterministic (item, reviewer) order.
std::vector<ReviewAssignment> review_assignments(const GenerationOutput& gen);

struct EvaluationOutput {
    GradeMatrix matrix;
    std::vector<TaskFailure> failures;
};

/// Issues the given review calls (concurrently, each fresh and stateless)
/// and assembles the grade matrix; cells are keyed by (grader, item) so
/// issue order cannot affect the result. Implicit self-grades are inserted
/// for every ok response when enabled.
EvaluationOutput collect_reviews(const ClinicalNote& note,
                                 const std::vector<ReviewAssignment>& assignments,
                                 const GenerationOutput& gen,
                                 const CompletionService& service,
                                 const TaskParams& params);

EvaluationOutput evaluation_stage(const ClinicalNote& note, const GenerationOutput& gen,
                                  const CompletionService& service,
                                  const TaskParams& params);

/// Argmax of consensus grade over labels; ties break toward the lower
/// author generation elapsed, then the lexicographically smaller label.
/// Labels missing from the consensus map score 0.
std::optional<SelectedAnswer> select_best(const ConsensusResult& consensus,
                                          const GenerationOutput& gen);

/// Generation, evaluation, consensus and selection for one note. A task
/// where every generation fails is recorded, not thrown.
TaskRecord run_task(const ClinicalNote& note, const EnsembleConfig& ensemble,
                    const CompletionService& service, const TaskParams& params);

} // namespace medrec
