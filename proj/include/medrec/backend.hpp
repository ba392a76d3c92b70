#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include "medrec/domain.hpp"

namespace medrec {

enum class ResponseSchema { recommendation, review };

const char* to_string(ResponseSchema s);

struct CompletionRequest {
    ModelId model;
    std::string system_prompt;
    std::string user_prompt;
    ResponseSchema response_schema = ResponseSchema::recommendation;
    std::chrono::milliseconds timeout{300'000};
};

enum class Outcome { ok, parse_failed, transport_failed, timed_out };

const char* to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);

struct ReviewVerdict {
    Grade grade;
    std::string critique;
};

/// Result of one complete() call. Exactly one of recommendation/review is
/// populated, and only when outcome == ok.
struct CompletionResult {
    ModelId model;
    std::string raw_text;
    std::optional<Recommendation> recommendation;
    std::optional<ReviewVerdict> review;
    std::chrono::milliseconds elapsed{0};
    Outcome outcome = Outcome::transport_failed;

    bool ok() const { return outcome == Outcome::ok; }
};

/// Raw provider exchange before schema parsing. Outcome here is transport
/// level only: ok, transport_failed or timed_out.
struct TransportResult {
    std::string raw_text;
    std::chrono::milliseconds elapsed{0};
    Outcome outcome = Outcome::transport_failed;
    std::string detail;
};

/// One provider client (or the scripted stand-in). Implementations must be
/// safe to call concurrently and must never throw; failures are encoded in
/// the TransportResult.
class ModelTransport {
public:
    virtual ~ModelTransport() = default;
    virtual TransportResult send(const CompletionRequest& request) = 0;
};

enum class ParseFailure { no_json_found, schema_mismatch, missing_grade };

const char* to_string(ParseFailure f);

template <typename T>
struct Parsed {
    std::optional<T> value;
    ParseFailure failure = ParseFailure::no_json_found;

    bool ok() const { return value.has_value(); }
};

/// Extracts the first JSON object in raw_text that carries a valid
/// recommendation (an `entries` array whose objects all carry a nonempty
/// `name`). Tolerates surrounding prose and code fences. Entries sharing a
/// normalized name are collapsed to the first occurrence; an empty entries
/// array is rejected as a schema mismatch.
Parsed<Recommendation> parse_recommendation(const std::string& raw_text);

/// Extracts `grade` (clamped into [0,1]) and optional `critique` from the
/// first JSON object carrying a numeric grade.
Parsed<ReviewVerdict> parse_review(const std::string& raw_text);

struct CompletionOptions {
    /// Automatic fresh-call retries after a parse failure.
    int parse_retries = 1;
    /// Automatic retries after a transport failure.
    int transport_retries = 0;
    /// Hard ceiling past the request timeout before complete() gives up on
    /// a transport that will not return.
    std::chrono::milliseconds grace{2'000};
};

/// Ties a transport to the parse/retry policy. complete() never throws and
/// never blocks past request.timeout + options.grace; every failure mode is
/// encoded in CompletionResult.outcome.
class CompletionService {
public:
    CompletionService(std::shared_ptr<ModelTransport> transport,
                      CompletionOptions options = {});

    CompletionResult complete(const CompletionRequest& request) const;

    const CompletionOptions& options() const { return options_; }

private:
    std::shared_ptr<ModelTransport> transport_;
    CompletionOptions options_;
};

} // namespace medrec
