#pragma once

#include <map>
#include <optional>
#include <string>

#include "medrec/backend.hpp"

namespace medrec {

/// One canned exchange: the raw text the "model" returns, a synthetic
/// elapsed time, and the transport outcome to report.
struct ScriptEntry {
    std::string raw_text;
    std::chrono::milliseconds elapsed{0};
    Outcome outcome = Outcome::ok;
};

/// Deterministic canned-response table keyed by (model name, prompt
/// fingerprint), with per-model fallbacks keyed by response schema and an
/// optional global fallback. Lookups are pure; the table is read-only after
/// construction, so it is safe to share across concurrent calls.
class Script {
public:
    Script() = default;

    static Script from_json_text(const std::string& text);
    static Script load(const std::string& path);

    void add_exact(const std::string& model, const std::string& fingerprint,
                   ScriptEntry entry);
    void add_model_default(const std::string& model, ResponseSchema schema,
                           ScriptEntry entry);
    void set_global_default(ResponseSchema schema, ScriptEntry entry);

    /// Exact match first, then the model's schema default, then the global
    /// default; nullopt when unknown keys are configured to be errors.
    std::optional<ScriptEntry> lookup(const std::string& model, ResponseSchema schema,
                                      const std::string& fingerprint) const;

private:
    std::map<std::pair<std::string, std::string>, ScriptEntry> exact_;
    std::map<std::pair<std::string, int>, ScriptEntry> model_defaults_;
    std::map<int, ScriptEntry> global_defaults_;
};

/// Stable script key: hash of the response schema and the first 64
/// characters of the user prompt, so scripts survive cosmetic prompt edits.
std::string prompt_fingerprint(ResponseSchema schema, std::string_view user_prompt);

/// Offline stand-in for every provider. A synthetic elapsed longer than the
/// request timeout reports timed-out without sleeping.
class ScriptedTransport : public ModelTransport {
public:
    explicit ScriptedTransport(Script script) : script_(std::move(script)) {}

    TransportResult send(const CompletionRequest& request) override;

private:
    Script script_;
};

} // namespace medrec
