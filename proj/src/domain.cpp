#include "medrec/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace medrec {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_grade: return "InvalidGrade";
        case ErrorCode::invalid_config: return "InvalidConfig";
        case ErrorCode::unknown_model: return "UnknownModel";
        case ErrorCode::insufficient_models: return "InsufficientModels";
        case ErrorCode::missing_chemistry_hint: return "MissingChemistryHint";
        case ErrorCode::empty_matrix: return "EmptyMatrix";
        case ErrorCode::isolated_item: return "IsolatedItem";
        case ErrorCode::empty_truth: return "EmptyTruth";
        case ErrorCode::no_eligible_models: return "NoEligibleModels";
        case ErrorCode::too_few_eligible: return "TooFewEligible";
        case ErrorCode::no_data: return "NoData";
        case ErrorCode::missing_ground_truth: return "MissingGroundTruth";
        case ErrorCode::too_few_tasks: return "TooFewTasks";
        case ErrorCode::no_multiply_graded_responses: return "NoMultiplyGradedResponses";
        case ErrorCode::parse_error: return "ParseError";
        case ErrorCode::duplicate_id: return "DuplicateId";
        case ErrorCode::invalid_entry: return "InvalidEntry";
        case ErrorCode::io_error: return "IoError";
    }
    return "Error";
}

const char* to_string(Provider p) {
    switch (p) {
        case Provider::openai_compatible: return "openai-compatible";
        case Provider::anthropic_compatible: return "anthropic-compatible";
        case Provider::ollama_compatible: return "ollama-compatible";
        case Provider::scripted: return "scripted";
    }
    return "scripted";
}

const char* to_string(Locality l) {
    return l == Locality::remote ? "remote" : "local";
}

Provider provider_from_string(const std::string& s) {
    if (s == "openai-compatible") return Provider::openai_compatible;
    if (s == "anthropic-compatible") return Provider::anthropic_compatible;
    if (s == "ollama-compatible") return Provider::ollama_compatible;
    if (s == "scripted") return Provider::scripted;
    throw Error(ErrorCode::parse_error, "unknown provider '" + s + "'");
}

Locality locality_from_string(const std::string& s) {
    if (s == "remote") return Locality::remote;
    if (s == "local") return Locality::local;
    throw Error(ErrorCode::parse_error, "unknown locality '" + s + "'");
}

Locality expected_locality(Provider p) {
    switch (p) {
        case Provider::openai_compatible:
        case Provider::anthropic_compatible:
            return Locality::remote;
        case Provider::ollama_compatible:
        case Provider::scripted:
            return Locality::local;
    }
    return Locality::local;
}

ModelId make_model_id(Provider provider, std::string name) {
    if (name.empty()) {
        throw Error(ErrorCode::invalid_config, "model name must be nonempty");
    }
    return ModelId{provider, std::move(name), expected_locality(provider)};
}

void validate_model_id(const ModelId& id) {
    if (id.name.empty()) {
        throw Error(ErrorCode::invalid_config, "model name must be nonempty");
    }
    if (id.locality != expected_locality(id.provider)) {
        throw Error(ErrorCode::invalid_config,
                    "model '" + id.name + "' declares locality " +
                        to_string(id.locality) + " but provider " +
                        to_string(id.provider) + " implies " +
                        to_string(expected_locality(id.provider)));
    }
}

const char* to_string(GradeKind k) {
    return k == GradeKind::explicit_review ? "explicit-review" : "implicit-self";
}

GradeKind grade_kind_from_string(const std::string& s) {
    if (s == "explicit-review") return GradeKind::explicit_review;
    if (s == "implicit-self") return GradeKind::implicit_self;
    throw Error(ErrorCode::parse_error, "unknown grade kind '" + s + "'");
}

double clamp_grade(double raw) {
    if (!std::isfinite(raw)) {
        throw Error(ErrorCode::invalid_grade, "grade must be finite");
    }
    double clamped = std::min(1.0, std::max(0.0, raw));
    // Nine decimal digits keeps log round-trips exact.
    return std::round(clamped * 1e9) / 1e9;
}

const char* to_string(EntryViolation v) {
    switch (v) {
        case EntryViolation::empty_name: return "EmptyName";
    }
    return "Violation";
}

namespace {

bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c); });
}

} // namespace

std::vector<EntryViolation> validate_entry(const MedicationEntry& entry) {
    std::vector<EntryViolation> violations;
    if (entry.name.empty() || blank(entry.name)) {
        violations.push_back(EntryViolation::empty_name);
    }
    return violations;
}

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::local: return "LOCAL";
        case Strategy::remote: return "REMOTE";
        case Strategy::random: return "RANDOM";
        case Strategy::chemistry: return "CHEMISTRY";
    }
    return "RANDOM";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "LOCAL") return Strategy::local;
    if (s == "REMOTE") return Strategy::remote;
    if (s == "RANDOM") return Strategy::random;
    if (s == "CHEMISTRY") return Strategy::chemistry;
    throw Error(ErrorCode::parse_error, "unknown strategy '" + s + "'");
}

EnsembleConfig make_ensemble(Strategy strategy, std::vector<ModelId> members,
                             std::uint64_t seed) {
    if (members.empty()) {
        throw Error(ErrorCode::invalid_config, "ensemble must have at least one member");
    }
    std::set<std::string> names;
    for (const auto& member : members) {
        validate_model_id(member);
        if (!names.insert(member.name).second) {
            throw Error(ErrorCode::invalid_config,
                        "duplicate ensemble member '" + member.name + "'");
        }
    }
    EnsembleConfig config;
    config.strategy = strategy;
    config.n = static_cast<int>(members.size());
    config.members = std::move(members);
    config.seed = seed;
    return config;
}

} // namespace medrec
