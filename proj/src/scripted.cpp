#include "medrec/scripted.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "medrec/rng.hpp"

namespace medrec {

namespace {

ScriptEntry entry_from_json(const nlohmann::json& obj) {
    if (!obj.is_object()) {
        throw Error(ErrorCode::parse_error, "script entry must be an object");
    }
    ScriptEntry entry;
    entry.raw_text = obj.value("raw_text", std::string{});
    entry.elapsed = std::chrono::milliseconds(obj.value("elapsed_ms", 0));
    entry.outcome = outcome_from_string(obj.value("outcome", std::string{"ok"}));
    if (entry.outcome == Outcome::parse_failed) {
        throw Error(ErrorCode::parse_error,
                    "script outcomes are transport level; emit unparseable "
                    "raw_text to script a parse failure");
    }
    return entry;
}

ResponseSchema schema_from_string(const std::string& s) {
    if (s == "recommendation") return ResponseSchema::recommendation;
    if (s == "review") return ResponseSchema::review;
    throw Error(ErrorCode::parse_error, "unknown response schema '" + s + "'");
}

} // namespace

Script Script::from_json_text(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw Error(ErrorCode::parse_error, "script file must be a JSON object");
    }
    Script script;
    if (auto it = doc.find("default"); it != doc.end()) {
        const auto& def = *it;
        std::string mode = def.value("mode", std::string{"error"});
        if (mode == "fixed") {
            if (def.contains("recommendation")) {
                script.set_global_default(ResponseSchema::recommendation,
                                          entry_from_json(def.at("recommendation")));
            }
            if (def.contains("review")) {
                script.set_global_default(ResponseSchema::review,
                                          entry_from_json(def.at("review")));
            }
        } else if (mode != "error") {
            throw Error(ErrorCode::parse_error,
                        "script default mode must be 'error' or 'fixed'");
        }
    }
    if (auto it = doc.find("models"); it != doc.end()) {
        for (const auto& [model, spec] : it->items()) {
            for (const auto& [key, value] : spec.items()) {
                script.add_model_default(model, schema_from_string(key),
                                         entry_from_json(value));
            }
        }
    }
    if (auto it = doc.find("entries"); it != doc.end()) {
        for (const auto& item : *it) {
            script.add_exact(item.at("model").get<std::string>(),
                             item.at("fingerprint").get<std::string>(),
                             entry_from_json(item));
        }
    }
    return script;
}

Script Script::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::io_error, "cannot open script '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

void Script::add_exact(const std::string& model, const std::string& fingerprint,
                       ScriptEntry entry) {
    exact_[{model, fingerprint}] = std::move(entry);
}

void Script::add_model_default(const std::string& model, ResponseSchema schema,
                               ScriptEntry entry) {
    model_defaults_[{model, static_cast<int>(schema)}] = std::move(entry);
}

void Script::set_global_default(ResponseSchema schema, ScriptEntry entry) {
    global_defaults_[static_cast<int>(schema)] = std::move(entry);
}

std::optional<ScriptEntry> Script::lookup(const std::string& model,
                                          ResponseSchema schema,
                                          const std::string& fingerprint) const {
    if (auto it = exact_.find({model, fingerprint}); it != exact_.end()) {
        return it->second;
    }
    if (auto it = model_defaults_.find({model, static_cast<int>(schema)});
        it != model_defaults_.end()) {
        return it->second;
    }
    if (auto it = global_defaults_.find(static_cast<int>(schema));
        it != global_defaults_.end()) {
        return it->second;
    }
    return std::nullopt;
}

std::string prompt_fingerprint(ResponseSchema schema, std::string_view user_prompt) {
    std::string key = std::string(to_string(schema)) + ":";
    key.append(user_prompt.substr(0, 64));
    std::ostringstream out;
    out << std::hex << std::setfill('0') << std::setw(16) << fnv1a64(key);
    return out.str();
}

TransportResult ScriptedTransport::send(const CompletionRequest& request) {
    TransportResult result;
    auto entry = script_.lookup(request.model.name, request.response_schema,
                                prompt_fingerprint(request.response_schema,
                                                   request.user_prompt));
    if (!entry) {
        result.outcome = Outcome::transport_failed;
        result.detail = "no script entry for model '" + request.model.name + "'";
        return result;
    }
    if (entry->outcome == Outcome::ok && entry->elapsed > request.timeout) {
        result.outcome = Outcome::timed_out;
        result.elapsed = request.timeout;
        result.detail = "scripted elapsed exceeds timeout";
        return result;
    }
    result.raw_text = entry->raw_text;
    result.elapsed = entry->elapsed;
    result.outcome = entry->outcome;
    return result;
}

} // namespace medrec
