#include "medrec/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

namespace medrec {

const char* to_string(FieldKind k) {
    switch (k) {
        case FieldKind::name: return "name";
        case FieldKind::dosage: return "dosage";
        case FieldKind::route: return "route";
        case FieldKind::frequency: return "frequency";
        case FieldKind::timing: return "timing";
        case FieldKind::indication: return "indication";
    }
    return "name";
}

SynonymTable SynonymTable::from_json_text(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw Error(ErrorCode::parse_error, "synonym table must be a JSON object");
    }
    SynonymTable table;
    for (const auto& [canonical, variants] : doc.items()) {
        if (!variants.is_array()) {
            throw Error(ErrorCode::parse_error,
                        "synonym entry '" + canonical + "' must map to an array");
        }
        std::vector<std::string> list;
        for (const auto& v : variants) list.push_back(v.get<std::string>());
        table.add(canonical, list);
    }
    return table;
}

SynonymTable SynonymTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::io_error, "cannot open synonym table '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

void SynonymTable::add(const std::string& canonical,
                       const std::vector<std::string>& variants) {
    variant_to_canonical_[canonical] = canonical;
    for (const auto& variant : variants) {
        variant_to_canonical_[variant] = canonical;
    }
}

std::string SynonymTable::canonical(const std::string& normalized) const {
    auto it = variant_to_canonical_.find(normalized);
    return it == variant_to_canonical_.end() ? normalized : it->second;
}

const SynonymTable& SynonymTable::builtin_route() {
    static const SynonymTable table = [] {
        SynonymTable t;
        t.add("oral", {"po", "by mouth", "per os", "orally"});
        t.add("intravenous", {"iv", "intravenously"});
        t.add("intramuscular", {"im", "intramuscularly"});
        t.add("subcutaneous", {"subcut", "subq", "sq", "sc", "subcutaneously"});
        t.add("sublingual", {"sl", "under the tongue"});
        t.add("topical", {"topically", "applied to skin"});
        t.add("inhaled", {"inhalation", "by inhalation", "inh"});
        t.add("rectal", {"pr", "per rectum"});
        t.add("ophthalmic", {"in the eye", "to the eye"});
        t.add("transdermal", {"patch", "transdermal patch"});
        return t;
    }();
    return table;
}

const SynonymTable& SynonymTable::builtin_frequency() {
    static const SynonymTable table = [] {
        SynonymTable t;
        t.add("once daily", {"qd", "daily", "once a day", "every day", "1 time daily",
                             "every morning", "qam", "q24h"});
        t.add("twice daily", {"bid", "2 times daily", "two times daily",
                              "twice a day", "q12h", "every 12 hours"});
        t.add("three times daily", {"tid", "3 times daily", "three times a day",
                                    "q8h", "every 8 hours"});
        t.add("four times daily", {"qid", "4 times daily", "four times a day",
                                   "q6h", "every 6 hours"});
        t.add("at bedtime", {"qhs", "nightly", "every night at bedtime"});
        t.add("as needed", {"prn", "when needed", "as required"});
        t.add("once weekly", {"weekly", "once a week", "every week"});
        t.add("every other day", {"qod", "alternate days"});
        return t;
    }();
    return table;
}

namespace {

std::string basic_normalize(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char ch : raw) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

const std::regex& milligram_re() {
    static const std::regex re("\\bmilligrams?\\b");
    return re;
}

const std::regex& microgram_re() {
    // Covers the spelled-out unit and both micro-sign byte sequences.
    static const std::regex re("\\bmicrograms?\\b|µg|μg");
    return re;
}

const std::regex& gram_re() {
    static const std::regex re("\\bgrams?\\b");
    return re;
}

const std::regex& number_unit_re() {
    static const std::regex re("(\\d(?:[\\d.]*\\d)?) (mg|mcg|g|ml)\\b");
    return re;
}

std::string normalize_dosage(std::string normalized) {
    normalized = std::regex_replace(normalized, milligram_re(), "mg");
    normalized = std::regex_replace(normalized, microgram_re(), "mcg");
    normalized = std::regex_replace(normalized, gram_re(), "g");
    normalized = std::regex_replace(normalized, number_unit_re(), "$1$2");
    return normalized;
}

} // namespace

FieldNormalizer::FieldNormalizer()
    : route_(SynonymTable::builtin_route()),
      frequency_(SynonymTable::builtin_frequency()) {}

FieldNormalizer::FieldNormalizer(SynonymTable route, SynonymTable frequency)
    : route_(std::move(route)), frequency_(std::move(frequency)) {}

std::string FieldNormalizer::normalize(FieldKind kind, std::string_view raw) const {
    std::string base = basic_normalize(raw);
    switch (kind) {
        case FieldKind::dosage:
            return normalize_dosage(std::move(base));
        case FieldKind::route:
            return route_.canonical(base);
        case FieldKind::frequency:
            return frequency_.canonical(base);
        case FieldKind::name:
        case FieldKind::timing:
        case FieldKind::indication:
            return base;
    }
    return base;
}

namespace {

const FieldNormalizer& default_normalizer() {
    static const FieldNormalizer normalizer;
    return normalizer;
}

} // namespace

std::string normalize_field(FieldKind kind, std::string_view raw) {
    return default_normalizer().normalize(kind, raw);
}

std::optional<std::set<FieldKind>> match_entry(const MedicationEntry& predicted,
                                               const MedicationEntry& truth) {
    return match_entry(predicted, truth, default_normalizer());
}

std::optional<std::set<FieldKind>> match_entry(const MedicationEntry& predicted,
                                               const MedicationEntry& truth,
                                               const FieldNormalizer& normalizer) {
    if (normalizer.normalize(FieldKind::name, predicted.name) !=
        normalizer.normalize(FieldKind::name, truth.name)) {
        return std::nullopt;
    }
    std::set<FieldKind> matched{FieldKind::name};
    auto check = [&](FieldKind kind, const std::string& a, const std::string& b) {
        if (normalizer.normalize(kind, a) == normalizer.normalize(kind, b)) {
            matched.insert(kind);
        }
    };
    check(FieldKind::dosage, predicted.dosage, truth.dosage);
    check(FieldKind::route, predicted.route, truth.route);
    check(FieldKind::frequency, predicted.frequency, truth.frequency);
    check(FieldKind::timing, predicted.timing, truth.timing);
    check(FieldKind::indication, predicted.indication, truth.indication);
    return matched;
}

MatchReport score_recommendation(const Recommendation& predicted,
                                 const std::vector<MedicationEntry>& truth,
                                 const ScoringParams& params) {
    return score_recommendation(predicted, truth, params, default_normalizer());
}

MatchReport score_recommendation(const Recommendation& predicted,
                                 const std::vector<MedicationEntry>& truth,
                                 const ScoringParams& params,
                                 const FieldNormalizer& normalizer) {
    if (truth.empty()) {
        throw Error(ErrorCode::empty_truth, "ground truth has no entries");
    }

    MatchReport report;
    std::vector<bool> truth_used(truth.size(), false);
    for (std::size_t p = 0; p < predicted.entries.size(); ++p) {
        for (std::size_t t = 0; t < truth.size(); ++t) {
            if (truth_used[t]) continue;
            auto fields = match_entry(predicted.entries[p], truth[t], normalizer);
            if (!fields) continue;
            truth_used[t] = true;
            MatchedPair pair;
            pair.predicted_index = p;
            pair.truth_index = t;
            pair.fields_matched = std::move(*fields);
            // Five secondary fields; name is the gate, not a vote.
            int secondary = static_cast<int>(pair.fields_matched.size()) - 1;
            pair.full_match = secondary >= params.secondary_fields_required;
            if (pair.full_match) ++report.full_matches;
            report.matched_pairs.push_back(std::move(pair));
            break;
        }
    }

    report.precision = predicted.entries.empty()
                           ? 0.0
                           : static_cast<double>(report.full_matches) /
                                 static_cast<double>(predicted.entries.size());
    report.recall = static_cast<double>(report.full_matches) /
                    static_cast<double>(truth.size());
    report.f1 = (report.precision + report.recall) == 0.0
                    ? 0.0
                    : 2.0 * report.precision * report.recall /
                          (report.precision + report.recall);
    return report;
}

} // namespace medrec
