#pragma once

#include <map>
#include <memory>
#include <string>

#include "medrec/backend.hpp"
#include "medrec/sampling.hpp"

namespace medrec {

/// Chat-completions protocol (OpenAI and compatible gateways, including
/// Google's OpenAI-compatible endpoint). Assistant text is read from
/// choices[0].message.content.
class OpenAiTransport : public ModelTransport {
public:
    OpenAiTransport(std::string base_url, std::string api_key,
                    std::optional<double> temperature = std::nullopt);
    TransportResult send(const CompletionRequest& request) override;

private:
    std::string base_url_;
    std::string api_key_;
    std::optional<double> temperature_;
};

/// Messages protocol (Anthropic and compatible). Assistant text is read
/// from content[0].text.
class AnthropicTransport : public ModelTransport {
public:
    AnthropicTransport(std::string base_url, std::string api_key,
                       std::optional<double> temperature = std::nullopt,
                       int max_tokens = 2048);
    TransportResult send(const CompletionRequest& request) override;

private:
    std::string base_url_;
    std::string api_key_;
    std::optional<double> temperature_;
    int max_tokens_;
};

/// Local Ollama REST protocol (/api/chat, stream off). Assistant text is
/// read from message.content.
class OllamaTransport : public ModelTransport {
public:
    explicit OllamaTransport(std::string base_url,
                             std::optional<double> temperature = std::nullopt);
    TransportResult send(const CompletionRequest& request) override;

private:
    std::string base_url_;
    std::optional<double> temperature_;
};

/// Routes each request to the transport registered for its model name.
/// Unroutable models fail as data, not exceptions.
class BackendRouter : public ModelTransport {
public:
    void add_route(const std::string& model_name, std::shared_ptr<ModelTransport> transport);
    TransportResult send(const CompletionRequest& request) override;

    /// One transport per registry entry, resolved from base URLs and the
    /// provider's conventional API-key environment variable.
    static std::shared_ptr<BackendRouter> live(const Registry& registry);

private:
    std::map<std::string, std::shared_ptr<ModelTransport>> routes_;
};

/// Default endpoint and key-variable conventions per provider.
std::string default_base_url(Provider provider);
std::string default_api_key_env(Provider provider);

} // namespace medrec
