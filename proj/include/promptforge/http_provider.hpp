#pragma once

// Live chat/embedding transport speaking the Gemini-style REST endpoints
// (generateContent / batchEmbedContents). Request building and response
// parsing are free functions so they stay testable without a network.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <memory>
#include <string>

#include <json.hpp>

#include "promptforge/errors.hpp"
#include "promptforge/provider.hpp"
#include "promptforge/vectors.hpp"

namespace promptforge {

inline nlohmann::json build_generate_content_body(const ChatRequest& request) {
    return nlohmann::json{
        {"contents", {{{"parts", {{{"text", request.prompt_text}}}}}}},
        {"generationConfig",
         {{"temperature", request.temperature}, {"maxOutputTokens", request.max_output_tokens}}}};
}

inline ChatResponse parse_generate_content_reply(const nlohmann::json& body) {
    if (!body.contains("candidates") || !body["candidates"].is_array() || body["candidates"].empty()) {
        throw ProviderError(ProviderErrorKind::malformed, "reply has no candidates");
    }
    const nlohmann::json& candidate = body["candidates"][0];
    ChatResponse response;
    response.truncated = candidate.value("finishReason", "") == "MAX_TOKENS";
    if (candidate.contains("content") && candidate["content"].contains("parts")) {
        for (const auto& part : candidate["content"]["parts"]) {
            response.text += part.value("text", "");
        }
    }
    if (response.text.empty() && !response.truncated) {
        throw ProviderError(ProviderErrorKind::malformed, "reply candidate carries no text");
    }
    return response;
}

inline nlohmann::json build_batch_embed_body(const EmbeddingRequest& request) {
    nlohmann::json requests = nlohmann::json::array();
    for (const auto& text : request.texts) {
        requests.push_back({{"model", "models/" + request.model_name},
                            {"content", {{"parts", {{{"text", text}}}}}}});
    }
    return nlohmann::json{{"requests", requests}};
}

inline EmbeddingResponse parse_batch_embed_reply(const nlohmann::json& body,
                                                 std::size_t expected_count) {
    if (!body.contains("embeddings") || !body["embeddings"].is_array()) {
        throw ProviderError(ProviderErrorKind::malformed, "reply has no embeddings");
    }
    EmbeddingResponse response;
    for (const auto& entry : body["embeddings"]) {
        if (!entry.contains("values")) {
            throw ProviderError(ProviderErrorKind::malformed, "embedding entry has no values");
        }
        response.vectors.emplace_back(entry["values"].get<std::vector<double>>());
    }
    if (response.vectors.size() != expected_count) {
        throw ProviderError(ProviderErrorKind::malformed, "embedding count mismatch");
    }
    return response;
}

inline ProviderError provider_error_for_status(int status, const std::string& body) {
    const std::string detail = "HTTP " + std::to_string(status) + ": " + body.substr(0, 200);
    if (status == 401 || status == 403) return {ProviderErrorKind::auth, detail};
    if (status == 429) return {ProviderErrorKind::rate_limit, detail};
    if (status >= 500) return {ProviderErrorKind::transport, detail};
    return {ProviderErrorKind::malformed, detail};
}

struct HttpProviderSettings {
    std::string endpoint = "https://generativelanguage.googleapis.com";
    std::string api_key;
    RetryPolicy retry;
    int concurrency = 4;
    int timeout_seconds = 120;
    std::shared_ptr<AuditLog> audit; // optional
};

class HttpProvider : public Provider {
public:
    explicit HttpProvider(HttpProviderSettings settings)
        : settings_(std::move(settings)), limiter_(settings_.concurrency) {
        if (settings_.api_key.empty()) {
            throw ValidationError("live provider requires an API key");
        }
    }

    ChatResponse complete(const ChatRequest& request) override {
        validate_request(request);
        const std::string path = "/v1beta/models/" + request.model_name +
                                 ":generateContent?key=" + settings_.api_key;
        const std::string body = build_generate_content_body(request).dump();
        const auto started = std::chrono::steady_clock::now();
        const nlohmann::json reply = with_retries(settings_.retry, [&] { return post(path, body); });
        ChatResponse response = parse_generate_content_reply(reply);
        response.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
        if (settings_.audit) settings_.audit->record_chat(request, response);
        return response;
    }

    EmbeddingResponse embed(const EmbeddingRequest& request) override {
        if (request.texts.empty()) return {};
        const std::string path = "/v1beta/models/" + request.model_name +
                                 ":batchEmbedContents?key=" + settings_.api_key;
        const std::string body = build_batch_embed_body(request).dump();
        const nlohmann::json reply = with_retries(settings_.retry, [&] { return post(path, body); });
        EmbeddingResponse response = parse_batch_embed_reply(reply, request.texts.size());
        if (settings_.audit) settings_.audit->record_embed(request, response);
        return response;
    }

private:
    nlohmann::json post(const std::string& path, const std::string& body) {
        auto slot = limiter_.acquire();
        httplib::Result result = [&] {
            if (settings_.endpoint.rfind("http://", 0) == 0) {
                httplib::Client client(settings_.endpoint);
                client.set_read_timeout(settings_.timeout_seconds, 0);
                return client.Post(path, body, "application/json");
            }
            httplib::SSLClient client(host_of(settings_.endpoint));
            client.set_read_timeout(settings_.timeout_seconds, 0);
            return client.Post(path, body, "application/json");
        }();
        if (!result) {
            throw ProviderError(ProviderErrorKind::timeout,
                                "no response: " + httplib::to_string(result.error()));
        }
        if (result->status != 200) throw provider_error_for_status(result->status, result->body);
        nlohmann::json doc = nlohmann::json::parse(result->body, nullptr, false);
        if (doc.is_discarded()) {
            throw ProviderError(ProviderErrorKind::malformed, "reply is not valid JSON");
        }
        return doc;
    }

    static std::string host_of(const std::string& endpoint) {
        std::string host = endpoint;
        if (host.rfind("https://", 0) == 0) host = host.substr(8);
        if (auto slash = host.find('/'); slash != std::string::npos) host = host.substr(0, slash);
        return host;
    }

    HttpProviderSettings settings_;
    ConcurrencyLimiter limiter_;
};

} // namespace promptforge
