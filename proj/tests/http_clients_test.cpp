#include <doctest.h>

#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "medrec/http_clients.hpp"

using namespace medrec;
using namespace std::chrono_literals;

namespace {

/// In-process HTTP server speaking each provider's response shape.
class FakeProviderServer {
public:
    FakeProviderServer() {
        server_.Post("/v1/chat/completions", [](const httplib::Request& req,
                                                httplib::Response& res) {
            auto body = nlohmann::json::parse(req.body);
            nlohmann::json reply{
                {"choices",
                 {{{"message",
                    {{"role", "assistant"},
                     {"content", "openai says: " + body["model"].get<std::string>()}}}}}}};
            res.set_content(reply.dump(), "application/json");
        });
        server_.Post("/v1beta/openai/chat/completions",
                     [](const httplib::Request&, httplib::Response& res) {
                         nlohmann::json reply{
                             {"choices",
                              {{{"message", {{"content", "gateway reply"}}}}}}};
                         res.set_content(reply.dump(), "application/json");
                     });
        server_.Post("/v1/messages", [](const httplib::Request& req,
                                        httplib::Response& res) {
            if (req.get_header_value("x-api-key").empty() ||
                req.get_header_value("anthropic-version").empty()) {
                res.status = 401;
                return;
            }
            nlohmann::json reply{{"content", {{{"type", "text"},
                                               {"text", "anthropic reply"}}}}};
            res.set_content(reply.dump(), "application/json");
        });
        server_.Post("/api/chat", [](const httplib::Request&, httplib::Response& res) {
            nlohmann::json reply{{"message", {{"role", "assistant"},
                                              {"content", "ollama reply"}}}};
            res.set_content(reply.dump(), "application/json");
        });
        server_.Post("/slow/v1/chat/completions",
                     [](const httplib::Request&, httplib::Response& res) {
                         std::this_thread::sleep_for(2'500ms);
                         res.set_content("{}", "application/json");
                     });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~FakeProviderServer() {
        server_.stop();
        thread_.join();
    }

    std::string base(const std::string& prefix = "") const {
        return "http://127.0.0.1:" + std::to_string(port_) + prefix;
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

CompletionRequest request_for(Provider provider, const std::string& name) {
    CompletionRequest request;
    request.model = make_model_id(provider, name);
    request.system_prompt = "sys";
    request.user_prompt = "user";
    request.timeout = 10'000ms;
    return request;
}

} // namespace

TEST_CASE("openai-compatible transport round-trips the chat protocol") {
    FakeProviderServer server;
    OpenAiTransport transport(server.base("/v1"), "test-key");
    auto result = transport.send(request_for(Provider::openai_compatible, "gpt-4o"));
    CHECK(result.outcome == Outcome::ok);
    CHECK(result.raw_text == "openai says: gpt-4o");
    CHECK(result.elapsed.count() >= 0);
}

TEST_CASE("openai-compatible transport honors a path-prefixed base url") {
    FakeProviderServer server;
    OpenAiTransport transport(server.base("/v1beta/openai"), "test-key");
    auto result =
        transport.send(request_for(Provider::openai_compatible, "gemini-2.5-flash"));
    CHECK(result.outcome == Outcome::ok);
    CHECK(result.raw_text == "gateway reply");
}

TEST_CASE("anthropic-compatible transport sends the messages protocol headers") {
    FakeProviderServer server;
    AnthropicTransport transport(server.base("/v1"), "test-key");
    auto result =
        transport.send(request_for(Provider::anthropic_compatible, "claude-opus-4-1"));
    CHECK(result.outcome == Outcome::ok);
    CHECK(result.raw_text == "anthropic reply");
}

TEST_CASE("ollama-compatible transport reads message content") {
    FakeProviderServer server;
    OllamaTransport transport(server.base());
    auto result = transport.send(request_for(Provider::ollama_compatible, "qwen3:32b"));
    CHECK(result.outcome == Outcome::ok);
    CHECK(result.raw_text == "ollama reply");
}

TEST_CASE("missing API key fails as data before any network call") {
    OpenAiTransport openai("http://127.0.0.1:9", "");
    auto result = openai.send(request_for(Provider::openai_compatible, "gpt-4o"));
    CHECK(result.outcome == Outcome::transport_failed);

    AnthropicTransport anthropic("http://127.0.0.1:9", "");
    auto result2 =
        anthropic.send(request_for(Provider::anthropic_compatible, "claude-opus-4-1"));
    CHECK(result2.outcome == Outcome::transport_failed);
}

TEST_CASE("non-200 responses are transport failures") {
    FakeProviderServer server;
    OllamaTransport transport(server.base("/brokenprefix"));
    auto result = transport.send(request_for(Provider::ollama_compatible, "any"));
    CHECK(result.outcome == Outcome::transport_failed);
}

TEST_CASE("connection refusal is a transport failure") {
    OllamaTransport transport("http://127.0.0.1:9");
    auto result = transport.send(request_for(Provider::ollama_compatible, "any"));
    CHECK(result.outcome == Outcome::transport_failed);
}

TEST_CASE("a server slower than the timeout reports timed-out") {
    FakeProviderServer server;
    OpenAiTransport transport(server.base("/slow/v1"), "test-key");
    auto request = request_for(Provider::openai_compatible, "gpt-4o");
    request.timeout = 900ms;  // client floor is a 1s read timeout
    auto result = transport.send(request);
    CHECK(result.outcome == Outcome::timed_out);
}

TEST_CASE("router reaches registered transports and fails unknown models as data") {
    FakeProviderServer server;
    BackendRouter router;
    router.add_route("qwen3:32b", std::make_shared<OllamaTransport>(server.base()));
    auto ok = router.send(request_for(Provider::ollama_compatible, "qwen3:32b"));
    CHECK(ok.outcome == Outcome::ok);
    auto missing = router.send(request_for(Provider::ollama_compatible, "mystery"));
    CHECK(missing.outcome == Outcome::transport_failed);
}

TEST_CASE("live router wires every registry provider") {
    Registry registry;
    registry.models.push_back({make_model_id(Provider::openai_compatible, "gpt-4o"),
                               std::nullopt, std::nullopt});
    registry.models.push_back(
        {make_model_id(Provider::anthropic_compatible, "claude-opus-4-1"), std::nullopt,
         std::nullopt});
    registry.models.push_back({make_model_id(Provider::ollama_compatible, "qwen3:32b"),
                               std::string("http://127.0.0.1:9"), std::nullopt});
    auto router = BackendRouter::live(registry);
    // The ollama route exists and fails at the network layer, not routing.
    auto result = router->send(request_for(Provider::ollama_compatible, "qwen3:32b"));
    CHECK(result.outcome == Outcome::transport_failed);
    CHECK(result.detail.find("no backend route") == std::string::npos);
}

TEST_CASE("default endpoints follow provider conventions") {
    CHECK(default_base_url(Provider::openai_compatible) == "https://api.openai.com/v1");
    CHECK(default_base_url(Provider::anthropic_compatible) ==
          "https://api.anthropic.com/v1");
    CHECK(default_api_key_env(Provider::openai_compatible) == "OPENAI_API_KEY");
    CHECK(default_api_key_env(Provider::anthropic_compatible) == "ANTHROPIC_API_KEY");
    CHECK(default_api_key_env(Provider::ollama_compatible).empty());
}
