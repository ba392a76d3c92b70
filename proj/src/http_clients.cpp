#include "medrec/http_clients.hpp"

#include <chrono>
#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

namespace medrec {

namespace {

struct SplitUrl {
    std::string origin;      // scheme://host[:port]
    std::string path_prefix; // leading path, no trailing slash
};

SplitUrl split_url(const std::string& base_url) {
    std::string url = base_url;
    if (url.find("://") == std::string::npos) {
        url = "http://" + url;
    }
    auto scheme_end = url.find("://") + 3;
    auto slash = url.find('/', scheme_end);
    SplitUrl out;
    if (slash == std::string::npos) {
        out.origin = url;
    } else {
        out.origin = url.substr(0, slash);
        out.path_prefix = url.substr(slash);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/') {
            out.path_prefix.pop_back();
        }
    }
    return out;
}

std::string env_or_empty(const char* name) {
    const char* value = std::getenv(name);
    return value ? value : "";
}

/// POSTs a JSON body and classifies failures; fills `raw` with the HTTP
/// response body on a 200.
TransportResult post_json(const std::string& base_url, const std::string& path,
                          const httplib::Headers& headers, const nlohmann::json& body,
                          std::chrono::milliseconds timeout, std::string& raw) {
    TransportResult result;
    SplitUrl url = split_url(base_url);

    auto started = std::chrono::steady_clock::now();
    httplib::Client client(url.origin);
    auto seconds = std::max<long>(1, timeout.count() / 1000);
    client.set_connection_timeout(seconds, 0);
    client.set_read_timeout(seconds, 0);
    client.set_write_timeout(seconds, 0);
    client.set_default_headers(headers);

    auto response = client.Post(url.path_prefix + path, body.dump(), "application/json");
    result.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);

    if (!response) {
        bool past_deadline = result.elapsed >= timeout;
        result.outcome = past_deadline ? Outcome::timed_out : Outcome::transport_failed;
        result.detail = httplib::to_string(response.error());
        return result;
    }
    if (response->status != 200) {
        result.outcome = Outcome::transport_failed;
        result.detail = "HTTP " + std::to_string(response->status) + ": " +
                        response->body.substr(0, 200);
        return result;
    }
    raw = response->body;
    result.outcome = Outcome::ok;
    return result;
}

TransportResult malformed(TransportResult result, const char* what) {
    result.outcome = Outcome::transport_failed;
    result.detail = std::string("malformed provider response: ") + what;
    result.raw_text.clear();
    return result;
}

} // namespace

std::string default_base_url(Provider provider) {
    switch (provider) {
        case Provider::openai_compatible: return "https://api.openai.com/v1";
        case Provider::anthropic_compatible: return "https://api.anthropic.com/v1";
        case Provider::ollama_compatible: {
            std::string host = env_or_empty("OLLAMA_HOST");
            return host.empty() ? "http://localhost:11434" : host;
        }
        case Provider::scripted: return "";
    }
    return "";
}

std::string default_api_key_env(Provider provider) {
    switch (provider) {
        case Provider::openai_compatible: return "OPENAI_API_KEY";
        case Provider::anthropic_compatible: return "ANTHROPIC_API_KEY";
        case Provider::ollama_compatible:
        case Provider::scripted:
            return "";
    }
    return "";
}

OpenAiTransport::OpenAiTransport(std::string base_url, std::string api_key,
                                 std::optional<double> temperature)
    : base_url_(std::move(base_url)),
      api_key_(std::move(api_key)),
      temperature_(temperature) {}

TransportResult OpenAiTransport::send(const CompletionRequest& request) {
    TransportResult result;
    if (api_key_.empty()) {
        result.outcome = Outcome::transport_failed;
        result.detail = "missing API key for model '" + request.model.name + "'";
        return result;
    }
    nlohmann::json body{
        {"model", request.model.name},
        {"messages",
         {{{"role", "system"}, {"content", request.system_prompt}},
          {{"role", "user"}, {"content", request.user_prompt}}}},
    };
    if (temperature_) body["temperature"] = *temperature_;
    std::string raw;
    result = post_json(base_url_, "/chat/completions",
                       {{"Authorization", "Bearer " + api_key_}}, body,
                       request.timeout, raw);
    if (result.outcome != Outcome::ok) return result;

    nlohmann::json doc = nlohmann::json::parse(raw, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty()) {
        return malformed(std::move(result), "no choices");
    }
    const auto& message = doc["choices"][0]["message"];
    if (!message.contains("content") || !message["content"].is_string()) {
        return malformed(std::move(result), "no message content");
    }
    result.raw_text = message["content"].get<std::string>();
    return result;
}

AnthropicTransport::AnthropicTransport(std::string base_url, std::string api_key,
                                       std::optional<double> temperature,
                                       int max_tokens)
    : base_url_(std::move(base_url)),
      api_key_(std::move(api_key)),
      temperature_(temperature),
      max_tokens_(max_tokens) {}

TransportResult AnthropicTransport::send(const CompletionRequest& request) {
    TransportResult result;
    if (api_key_.empty()) {
        result.outcome = Outcome::transport_failed;
        result.detail = "missing API key for model '" + request.model.name + "'";
        return result;
    }
    nlohmann::json body{
        {"model", request.model.name},
        {"max_tokens", max_tokens_},
        {"system", request.system_prompt},
        {"messages", {{{"role", "user"}, {"content", request.user_prompt}}}},
    };
    if (temperature_) body["temperature"] = *temperature_;
    std::string raw;
    result = post_json(base_url_, "/messages",
                       {{"x-api-key", api_key_}, {"anthropic-version", "2023-06-01"}},
                       body, request.timeout, raw);
    if (result.outcome != Outcome::ok) return result;

    nlohmann::json doc = nlohmann::json::parse(raw, nullptr, false);
    if (doc.is_discarded() || !doc.contains("content") || doc["content"].empty()) {
        return malformed(std::move(result), "no content");
    }
    const auto& block = doc["content"][0];
    if (!block.contains("text") || !block["text"].is_string()) {
        return malformed(std::move(result), "no text block");
    }
    result.raw_text = block["text"].get<std::string>();
    return result;
}

OllamaTransport::OllamaTransport(std::string base_url,
                                 std::optional<double> temperature)
    : base_url_(std::move(base_url)), temperature_(temperature) {}

TransportResult OllamaTransport::send(const CompletionRequest& request) {
    nlohmann::json body{
        {"model", request.model.name},
        {"stream", false},
        {"messages",
         {{{"role", "system"}, {"content", request.system_prompt}},
          {{"role", "user"}, {"content", request.user_prompt}}}},
    };
    if (temperature_) body["options"] = {{"temperature", *temperature_}};
    std::string raw;
    TransportResult result =
        post_json(base_url_, "/api/chat", {}, body, request.timeout, raw);
    if (result.outcome != Outcome::ok) return result;

    nlohmann::json doc = nlohmann::json::parse(raw, nullptr, false);
    if (doc.is_discarded() || !doc.contains("message") ||
        !doc["message"].contains("content") || !doc["message"]["content"].is_string()) {
        return malformed(std::move(result), "no message content");
    }
    result.raw_text = doc["message"]["content"].get<std::string>();
    return result;
}

void BackendRouter::add_route(const std::string& model_name,
                              std::shared_ptr<ModelTransport> transport) {
    routes_[model_name] = std::move(transport);
}

TransportResult BackendRouter::send(const CompletionRequest& request) {
    auto it = routes_.find(request.model.name);
    if (it == routes_.end()) {
        TransportResult result;
        result.outcome = Outcome::transport_failed;
        result.detail = "no backend route for model '" + request.model.name + "'";
        return result;
    }
    return it->second->send(request);
}

std::shared_ptr<BackendRouter> BackendRouter::live(const Registry& registry) {
    auto router = std::make_shared<BackendRouter>();
    for (const auto& entry : registry.models) {
        std::string base =
            entry.base_url ? *entry.base_url : default_base_url(entry.id.provider);
        std::string key_env = entry.api_key_env
                                  ? *entry.api_key_env
                                  : default_api_key_env(entry.id.provider);
        std::string key = key_env.empty() ? "" : env_or_empty(key_env.c_str());
        switch (entry.id.provider) {
            case Provider::openai_compatible:
                router->add_route(entry.id.name,
                                  std::make_shared<OpenAiTransport>(base, key,
                                                                    entry.temperature));
                break;
            case Provider::anthropic_compatible:
                router->add_route(entry.id.name,
                                  std::make_shared<AnthropicTransport>(
                                      base, key, entry.temperature));
                break;
            case Provider::ollama_compatible:
                router->add_route(entry.id.name,
                                  std::make_shared<OllamaTransport>(base,
                                                                    entry.temperature));
                break;
            case Provider::scripted:
                // Scripted models have no live endpoint; requests for them
                // fail as data through the missing-route path.
                break;
        }
    }
    return router;
}

} // namespace medrec
