#include "medrec/pipeline.hpp"

#include <algorithm>
#include <future>

#include "medrec/rng.hpp"
#include "medrec/timeutil.hpp"

namespace medrec {

int GenerationOutput::ok_count() const {
    int count = 0;
    for (const auto& member : members) {
        if (member.result.ok()) ++count;
    }
    return count;
}

const GenerationMember* GenerationOutput::by_label(const std::string& label) const {
    for (const auto& member : members) {
        if (member.label && *member.label == label) return &member;
    }
    return nullptr;
}

const char* to_string(TaskFailure::Phase p) {
    return p == TaskFailure::Phase::generation ? "generation" : "review";
}

std::string recommendation_to_prompt_json(const Recommendation& rec) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& entry : rec.entries) {
        entries.push_back({{"name", entry.name},
                           {"dosage", entry.dosage},
                           {"route", entry.route},
                           {"frequency", entry.frequency},
                           {"timing", entry.timing},
                           {"indication", entry.indication}});
    }
    nlohmann::json doc{{"entries", std::move(entries)}};
    if (!rec.rationale.empty()) doc["rationale"] = rec.rationale;
    return doc.dump(2);
}

namespace {

std::string label_for(std::size_t index) {
    // Ensembles are bounded by the registry size, far below 26.
    return std::string("Response ") + static_cast<char>('A' + index);
}

} // namespace

GenerationOutput generation_stage(const ClinicalNote& note, const EnsembleConfig& ensemble,
                                  const CompletionService& service,
                                  const TaskParams& params) {
    const std::string system_prompt = render_template(
        params.templates.generation_system, {{"schema", recommendation_schema_text()}});
    const std::string user_prompt = render_template(
        params.templates.generation_user, {{"vignette", note.vignette}});

    std::vector<std::future<CompletionResult>> futures;
    futures.reserve(ensemble.members.size());
    for (const auto& member : ensemble.members) {
        CompletionRequest request;
        request.model = member;
        request.system_prompt = system_prompt;
        request.user_prompt = user_prompt;
        request.response_schema = ResponseSchema::recommendation;
        request.timeout = params.timeout;
        futures.push_back(std::async(std::launch::async, [&service, request] {
            return service.complete(request);
        }));
    }

    GenerationOutput output;
    output.members.reserve(ensemble.members.size());
    for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
        GenerationMember member;
        member.model = ensemble.members[i];
        member.result = futures[i].get();
        output.members.push_back(std::move(member));
    }

    // Seeded shuffle of the ok responses before labeling anonymizes
    // authorship even against position.
    std::vector<std::size_t> ok_indices;
    for (std::size_t i = 0; i < output.members.size(); ++i) {
        if (output.members[i].result.ok()) ok_indices.push_back(i);
    }
    auto rng = seeded_rng(derive_seed(params.trial_seed, "labels:" + note.id));
    fisher_yates(ok_indices, rng);
    for (std::size_t pos = 0; pos < ok_indices.size(); ++pos) {
        output.members[ok_indices[pos]].label = label_for(pos);
    }
    return output;
}

std::vector<ReviewAssignment> review_assignments(const GenerationOutput& gen) {
    std::vector<const GenerationMember*> graded;
    for (const auto& member : gen.members) {
        if (member.result.ok() && member.label) graded.push_back(&member);
    }
    std::sort(graded.begin(), graded.end(),
              [](const GenerationMember* a, const GenerationMember* b) {
                  return *a->label < *b->label;
              });

    std::vector<ReviewAssignment> assignments;
    for (const auto* item : graded) {
        const std::string response_json =
            recommendation_to_prompt_json(*item->result.recommendation);
        for (const auto* reviewer : graded) {
            if (reviewer == item) continue;
            assignments.push_back(
                ReviewAssignment{reviewer->model, *item->label, response_json});
        }
    }
    return assignments;
}

EvaluationOutput collect_reviews(const ClinicalNote& note,
                                 const std::vector<ReviewAssignment>& assignments,
                                 const GenerationOutput& gen,
                                 const CompletionService& service,
                                 const TaskParams& params) {
    const std::string system_prompt = render_template(
        params.templates.review_system, {{"schema", review_schema_text()}});

    std::vector<std::future<CompletionResult>> futures;
    futures.reserve(assignments.size());
    for (const auto& assignment : assignments) {
        CompletionRequest request;
        request.model = assignment.reviewer;
        request.system_prompt = system_prompt;
        // Fresh, stateless call: the note and the anonymized response only.
        request.user_prompt = render_template(params.templates.review_user,
                                              {{"response", assignment.response_json},
                                               {"vignette", note.vignette}});
        request.response_schema = ResponseSchema::review;
        request.timeout = params.timeout;
        futures.push_back(std::async(std::launch::async, [&service, request] {
            return service.complete(request);
        }));
    }

    EvaluationOutput output;
    for (const auto& member : gen.members) {
        if (!member.result.ok() || !member.label) continue;
        output.matrix.graders.push_back(member.model.name);
        output.matrix.items.push_back(*member.label);
        if (params.implicit_self_grade) {
            output.matrix.cells.push_back(
                GradeCell{member.model.name, *member.label,
                          Grade{clamp_grade(params.self_grade_value),
                                GradeKind::implicit_self}});
        }
    }
    std::sort(output.matrix.items.begin(), output.matrix.items.end());
    std::sort(output.matrix.graders.begin(), output.matrix.graders.end());

    for (std::size_t i = 0; i < assignments.size(); ++i) {
        CompletionResult result = futures[i].get();
        if (result.ok() && result.review) {
            output.matrix.cells.push_back(GradeCell{assignments[i].reviewer.name,
                                                    assignments[i].item,
                                                    result.review->grade});
        } else {
            output.failures.push_back(TaskFailure{TaskFailure::Phase::review,
                                                  assignments[i].reviewer,
                                                  assignments[i].item, result.outcome});
        }
    }

    // Key order, never arrival order.
    std::sort(output.matrix.cells.begin(), output.matrix.cells.end(),
              [](const GradeCell& a, const GradeCell& b) {
                  return std::tie(a.grader, a.item) < std::tie(b.grader, b.item);
              });
    return output;
}

EvaluationOutput evaluation_stage(const ClinicalNote& note, const GenerationOutput& gen,
                                  const CompletionService& service,
                                  const TaskParams& params) {
    return collect_reviews(note, review_assignments(gen), gen, service, params);
}

std::optional<SelectedAnswer> select_best(const ConsensusResult& consensus,
                                          const GenerationOutput& gen) {
    const GenerationMember* best = nullptr;
    double best_score = -1.0;
    for (const auto& member : gen.members) {
        if (!member.result.ok() || !member.label) continue;
        auto it = consensus.consensus_grade.find(*member.label);
        double score = it == consensus.consensus_grade.end() ? 0.0 : it->second;
        if (best == nullptr) {
            best = &member;
            best_score = score;
            continue;
        }
        if (score > best_score) {
            best = &member;
            best_score = score;
        } else if (score == best_score) {
            if (member.result.elapsed < best->result.elapsed ||
                (member.result.elapsed == best->result.elapsed &&
                 *member.label < *best->label)) {
                best = &member;
            }
        }
    }
    if (best == nullptr) return std::nullopt;
    return SelectedAnswer{*best->label, *best->result.recommendation};
}

TaskRecord run_task(const ClinicalNote& note, const EnsembleConfig& ensemble,
                    const CompletionService& service, const TaskParams& params) {
    TaskRecord record;
    record.strategy = ensemble.strategy;
    record.note_id = note.id;
    record.ensemble = ensemble;
    record.timing.started_at = iso8601_utc_now();

    auto stage_start = std::chrono::steady_clock::now();
    auto wall_ms = [&stage_start] {
        auto now = std::chrono::steady_clock::now();
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now - stage_start)
                      .count();
        stage_start = now;
        return ms;
    };

    GenerationOutput gen = generation_stage(note, ensemble, service, params);
    record.timing.generation_wall_ms = wall_ms();
    for (const auto& member : gen.members) {
        if (!member.result.ok()) {
            record.failures.push_back(TaskFailure{TaskFailure::Phase::generation,
                                                  member.model, std::nullopt,
                                                  member.result.outcome});
        }
    }
    record.generations = gen.members;

    if (gen.ok_count() == 0) {
        record.all_generations_failed = true;
        record.timing.finished_at = iso8601_utc_now();
        return record;
    }

    EvaluationOutput eval = collect_reviews(note, review_assignments(gen), gen, service, params);
    record.timing.evaluation_wall_ms = wall_ms();
    record.matrix = eval.matrix;
    record.failures.insert(record.failures.end(), eval.failures.begin(),
                           eval.failures.end());

    ConsensusResult consensus;
    if (!record.matrix.cells.empty()) {
        consensus = vancouver(record.matrix, params.consensus);
        record.consensus = consensus;
    }
    record.timing.consensus_wall_ms = wall_ms();

    record.selected = select_best(consensus, gen);
    record.timing.finished_at = iso8601_utc_now();
    return record;
}

} // namespace medrec
