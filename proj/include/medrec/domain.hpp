#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "medrec/error.hpp"

namespace medrec {

/// Wire protocol a model is reached through.
enum class Provider {
    openai_compatible,
    anthropic_compatible,
    ollama_compatible,
    scripted,
};

enum class Locality { remote, local };

const char* to_string(Provider p);
const char* to_string(Locality l);
Provider provider_from_string(const std::string& s);
Locality locality_from_string(const std::string& s);

/// Locality implied by a provider: hosted wire protocols are remote,
/// ollama and scripted backends are local.
Locality expected_locality(Provider p);

struct ModelId {
    Provider provider = Provider::scripted;
    std::string name;
    Locality locality = Locality::local;

    bool operator==(const ModelId& other) const = default;
};

/// Builds a ModelId with the locality derived from the provider.
/// Throws Error(invalid_config) on an empty name.
ModelId make_model_id(Provider provider, std::string name);

/// Checks the name/locality invariants; throws Error(invalid_config)
/// when the declared locality contradicts the provider.
void validate_model_id(const ModelId& id);

struct ClinicalNote {
    std::string id;
    std::string vignette;
};

/// One structured prescription line. All fields are stored verbatim;
/// normalization happens at scoring time. Timing may be empty.
struct MedicationEntry {
    std::string name;
    std::string dosage;
    std::string route;
    std::string frequency;
    std::string timing;
    std::string indication;

    bool operator==(const MedicationEntry& other) const = default;
};

struct Recommendation {
    std::vector<MedicationEntry> entries;
    std::string rationale;

    bool operator==(const Recommendation& other) const = default;
};

enum class GradeKind { explicit_review, implicit_self };

const char* to_string(GradeKind k);
GradeKind grade_kind_from_string(const std::string& s);

struct Grade {
    double value = 0.0;
    GradeKind kind = GradeKind::explicit_review;

    bool operator==(const Grade& other) const = default;
};

/// Clamps a raw model-emitted grade into [0, 1] and quantizes it to nine
/// decimal digits so serialized grades round-trip exactly.
/// Throws Error(invalid_grade) for non-finite input.
double clamp_grade(double raw);

enum class EntryViolation { empty_name };

const char* to_string(EntryViolation v);

/// Returns every invariant violation of the entry; empty means valid.
std::vector<EntryViolation> validate_entry(const MedicationEntry& entry);

enum class Strategy { local, remote, random, chemistry };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

/// The ordered set of models participating in one ensemble, together with
/// the strategy and seed that produced it.
struct EnsembleConfig {
    Strategy strategy = Strategy::random;
    std::vector<ModelId> members;
    int n = 0;
    std::uint64_t seed = 0;
};

/// Validates member distinctness and sets n = |members|.
/// Throws Error(invalid_config) on duplicates or an empty member list.
EnsembleConfig make_ensemble(Strategy strategy, std::vector<ModelId> members,
                             std::uint64_t seed);

} // namespace medrec
