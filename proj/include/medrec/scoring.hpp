#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "medrec/domain.hpp"

namespace medrec {

enum class FieldKind { name, dosage, route, frequency, timing, indication };

const char* to_string(FieldKind k);

/// Variant -> canonical lookup for one field kind. The built-in tables ship
/// with the repo as JSON data files (map canonical -> list of variants) so
/// they can be extended without a rebuild.
class SynonymTable {
public:
    SynonymTable() = default;

    /// Parses the canonical -> variants JSON map format.
    static SynonymTable from_json_text(const std::string& text);
    static SynonymTable load(const std::string& path);

    static const SynonymTable& builtin_route();
    static const SynonymTable& builtin_frequency();

    void add(const std::string& canonical, const std::vector<std::string>& variants);

    /// Returns the canonical spelling, or the input unchanged when unknown.
    std::string canonical(const std::string& normalized) const;

    bool empty() const { return variant_to_canonical_.empty(); }

private:
    std::map<std::string, std::string> variant_to_canonical_;
};

/// Field normalization used by entry matching: casefold, trim, collapse
/// whitespace; dosage unit spelling; route/frequency synonym folding.
class FieldNormalizer {
public:
    FieldNormalizer();
    FieldNormalizer(SynonymTable route, SynonymTable frequency);

    std::string normalize(FieldKind kind, std::string_view raw) const;

private:
    SynonymTable route_;
    SynonymTable frequency_;
};

/// Normalizes with the built-in synonym tables.
std::string normalize_field(FieldKind kind, std::string_view raw);

/// Name-gated field comparison: nullopt unless normalized names are equal,
/// otherwise the set of fields (name included) whose normalized values match.
std::optional<std::set<FieldKind>> match_entry(const MedicationEntry& predicted,
                                               const MedicationEntry& truth);
std::optional<std::set<FieldKind>> match_entry(const MedicationEntry& predicted,
                                               const MedicationEntry& truth,
                                               const FieldNormalizer& normalizer);

struct MatchedPair {
    std::size_t predicted_index = 0;
    std::size_t truth_index = 0;
    std::set<FieldKind> fields_matched;
    bool full_match = false;
};

struct MatchReport {
    std::vector<MatchedPair> matched_pairs;
    int full_matches = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct ScoringParams {
    /// A name-matched pair counts as a full match when at least this many of
    /// the five secondary fields also match.
    int secondary_fields_required = 3;
};

/// Entry-level f1 of a recommendation against ground truth. Pairing is
/// one-to-one on normalized-name equality; throws Error(empty_truth) when
/// truth is empty.
MatchReport score_recommendation(const Recommendation& predicted,
                                 const std::vector<MedicationEntry>& truth,
                                 const ScoringParams& params = {});
MatchReport score_recommendation(const Recommendation& predicted,
                                 const std::vector<MedicationEntry>& truth,
                                 const ScoringParams& params,
                                 const FieldNormalizer& normalizer);

} // namespace medrec
