#include "medrec/backend.hpp"

#include <chrono>
#include <future>
#include <set>
#include <thread>

#include <json.hpp>

#include "medrec/scoring.hpp"

namespace medrec {

const char* to_string(ResponseSchema s) {
    return s == ResponseSchema::recommendation ? "recommendation" : "review";
}

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::ok: return "ok";
        case Outcome::parse_failed: return "parse-failed";
        case Outcome::transport_failed: return "transport-failed";
        case Outcome::timed_out: return "timed-out";
    }
    return "transport-failed";
}

Outcome outcome_from_string(const std::string& s) {
    if (s == "ok") return Outcome::ok;
    if (s == "parse-failed") return Outcome::parse_failed;
    if (s == "transport-failed") return Outcome::transport_failed;
    if (s == "timed-out") return Outcome::timed_out;
    throw Error(ErrorCode::parse_error, "unknown outcome '" + s + "'");
}

const char* to_string(ParseFailure f) {
    switch (f) {
        case ParseFailure::no_json_found: return "NoJsonFound";
        case ParseFailure::schema_mismatch: return "SchemaMismatch";
        case ParseFailure::missing_grade: return "MissingGrade";
    }
    return "NoJsonFound";
}

namespace {

/// Balanced-brace scan that respects string literals; returns the end index
/// (one past the closing brace) of the object starting at `start`, or npos.
std::size_t balanced_object_end(const std::string& text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string::npos;
}

/// Calls `accept` on every parseable JSON object found in the text, in
/// order of opening brace. Returns true once accept() succeeds.
template <typename Accept>
bool scan_json_objects(const std::string& text, bool& saw_object, Accept accept) {
    for (std::size_t pos = text.find('{'); pos != std::string::npos;
         pos = text.find('{', pos + 1)) {
        std::size_t end = balanced_object_end(text, pos);
        if (end == std::string::npos) continue;
        nlohmann::json doc =
            nlohmann::json::parse(text.substr(pos, end - pos), nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) continue;
        saw_object = true;
        if (accept(doc)) return true;
    }
    return false;
}

std::string field_as_string(const nlohmann::json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return "";
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number()) return it->dump();
    return "";
}

} // namespace

Parsed<Recommendation> parse_recommendation(const std::string& raw_text) {
    Parsed<Recommendation> result;
    bool saw_object = false;
    scan_json_objects(raw_text, saw_object, [&](const nlohmann::json& doc) {
        auto entries_it = doc.find("entries");
        if (entries_it == doc.end() || !entries_it->is_array() || entries_it->empty()) {
            return false;
        }
        Recommendation rec;
        std::set<std::string> seen_names;
        for (const auto& item : *entries_it) {
            if (!item.is_object()) return false;
            MedicationEntry entry;
            entry.name = field_as_string(item, "name");
            entry.dosage = field_as_string(item, "dosage");
            entry.route = field_as_string(item, "route");
            entry.frequency = field_as_string(item, "frequency");
            entry.timing = field_as_string(item, "timing");
            entry.indication = field_as_string(item, "indication");
            if (!validate_entry(entry).empty()) return false;
            // Duplicate normalized names collapse to the first occurrence.
            if (!seen_names.insert(normalize_field(FieldKind::name, entry.name)).second) {
                continue;
            }
            rec.entries.push_back(std::move(entry));
        }
        if (rec.entries.empty()) return false;
        rec.rationale = field_as_string(doc, "rationale");
        result.value = std::move(rec);
        return true;
    });
    if (!result.value) {
        result.failure =
            saw_object ? ParseFailure::schema_mismatch : ParseFailure::no_json_found;
    }
    return result;
}

Parsed<ReviewVerdict> parse_review(const std::string& raw_text) {
    Parsed<ReviewVerdict> result;
    bool saw_object = false;
    scan_json_objects(raw_text, saw_object, [&](const nlohmann::json& doc) {
        auto grade_it = doc.find("grade");
        if (grade_it == doc.end()) return false;
        double raw_grade = 0.0;
        if (grade_it->is_number()) {
            raw_grade = grade_it->get<double>();
        } else if (grade_it->is_string()) {
            try {
                raw_grade = std::stod(grade_it->get<std::string>());
            } catch (...) {
                return false;
            }
        } else {
            return false;
        }
        ReviewVerdict verdict;
        try {
            verdict.grade = Grade{clamp_grade(raw_grade), GradeKind::explicit_review};
        } catch (const Error&) {
            return false;
        }
        verdict.critique = field_as_string(doc, "critique");
        result.value = std::move(verdict);
        return true;
    });
    if (!result.value) {
        result.failure =
            saw_object ? ParseFailure::missing_grade : ParseFailure::no_json_found;
    }
    return result;
}

namespace {

/// Runs the transport on a detached thread so a wedged provider cannot hold
/// the caller past the deadline. The promise outlives an abandoned call.
TransportResult guarded_send(const std::shared_ptr<ModelTransport>& transport,
                             CompletionRequest request,
                             std::chrono::milliseconds wait_limit) {
    auto promise = std::make_shared<std::promise<TransportResult>>();
    auto future = promise->get_future();
    auto started = std::chrono::steady_clock::now();
    std::thread([promise, transport, request = std::move(request)]() mutable {
        TransportResult r;
        try {
            r = transport->send(request);
        } catch (const std::exception& e) {
            r.outcome = Outcome::transport_failed;
            r.detail = e.what();
        } catch (...) {
            r.outcome = Outcome::transport_failed;
            r.detail = "unknown transport error";
        }
        try {
            promise->set_value(std::move(r));
        } catch (...) {
        }
    }).detach();

    if (future.wait_for(wait_limit) == std::future_status::ready) {
        return future.get();
    }
    TransportResult timed;
    timed.outcome = Outcome::timed_out;
    timed.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    timed.detail = "transport abandoned after deadline";
    return timed;
}

} // namespace

CompletionService::CompletionService(std::shared_ptr<ModelTransport> transport,
                                     CompletionOptions options)
    : transport_(std::move(transport)), options_(options) {
    if (!transport_) {
        throw Error(ErrorCode::invalid_config, "completion service needs a transport");
    }
}

CompletionResult CompletionService::complete(const CompletionRequest& request) const {
    CompletionResult result;
    result.model = request.model;

    const auto wall_start = std::chrono::steady_clock::now();
    const auto total_limit = request.timeout + options_.grace;
    auto remaining = [&] {
        auto used = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - wall_start);
        return total_limit - used;
    };

    int parse_attempts_left = options_.parse_retries;
    int transport_attempts_left = options_.transport_retries;

    while (true) {
        auto budget = remaining();
        if (budget.count() <= 0) {
            result.outcome = Outcome::timed_out;
            return result;
        }
        TransportResult transport = guarded_send(transport_, request, budget);
        result.elapsed += transport.elapsed;
        result.raw_text = transport.raw_text;

        if (transport.outcome != Outcome::ok) {
            if (transport_attempts_left-- > 0 && remaining().count() > 0) continue;
            result.outcome = transport.outcome;
            return result;
        }

        if (request.response_schema == ResponseSchema::recommendation) {
            auto parsed = parse_recommendation(transport.raw_text);
            if (parsed.ok()) {
                result.recommendation = std::move(parsed.value);
                result.outcome = Outcome::ok;
                return result;
            }
        } else {
            auto parsed = parse_review(transport.raw_text);
            if (parsed.ok()) {
                result.review = std::move(parsed.value);
                result.outcome = Outcome::ok;
                return result;
            }
        }

        if (parse_attempts_left-- > 0 && remaining().count() > 0) continue;
        result.outcome = Outcome::parse_failed;
        return result;
    }
}

} // namespace medrec
