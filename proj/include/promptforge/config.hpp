#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "promptforge/errors.hpp"
#include "promptforge/json_util.hpp"
#include "promptforge/provider.hpp"
#include "promptforge/tempopt.hpp"

namespace promptforge {

inline constexpr const char* kApiKeyEnvVar = "PROMPTFORGE_API_KEY";
inline constexpr const char* kConfigEnvVar = "PROMPTFORGE_CONFIG";

enum class ProviderKind { mock, live };

inline const char* to_string(ProviderKind kind) {
    return kind == ProviderKind::mock ? "mock" : "live";
}

inline ProviderKind parse_provider_kind(const std::string& text) {
    if (text == "mock") return ProviderKind::mock;
    if (text == "live") return ProviderKind::live;
    throw ValidationError("unknown provider kind: " + text);
}

struct MockSettings {
    std::uint64_t seed = 0;
    std::size_t dim = 16;
    std::string embedding_fixture; // optional text -> vector JSON map
    std::string rules;             // optional rule-table JSON file
};

struct AppConfig {
    ProviderKind provider_kind = ProviderKind::mock;
    std::string chat_model = "gemini-2.5-pro";
    std::string embedding_model = "gemini-embedding-exp-03-07";
    int concurrency = 4;
    RetryPolicy retry;
    std::string endpoint;  // empty = provider default
    std::string audit_log; // optional JSONL request/response log
    MockSettings mock;

    double generation_temperature = 1.0;
    double eval_temperature = 0.0;
    int trials = 10;
    std::vector<double> sweep_temperatures = default_sweep_temperatures();
    int sample_size = 40;

    std::string catalog_path = "fixtures/technique_catalog.json";
    std::string kb_path = "kb.json";
    std::string fixtures_dir = "fixtures";

    std::string api_key; // environment only, never read from the file
};

using EnvMap = std::map<std::string, std::string>;

// Merged configuration: built-in defaults, then the file, then environment.
// Flag overrides are applied by the CLI after loading.
inline AppConfig load_config(const std::string& path, const EnvMap& env) {
    AppConfig config;
    if (!path.empty()) {
        const json doc = read_json_file(path);
        if (!doc.is_object()) throw ValidationError("config must be a JSON object: " + path);
        if (doc.contains("provider")) {
            const json& p = doc["provider"];
            if (p.contains("kind")) config.provider_kind = parse_provider_kind(p["kind"].get<std::string>());
            config.chat_model = p.value("chat_model", config.chat_model);
            config.embedding_model = p.value("embedding_model", config.embedding_model);
            config.concurrency = p.value("concurrency", config.concurrency);
            config.endpoint = p.value("endpoint", config.endpoint);
            config.audit_log = p.value("audit_log", config.audit_log);
            if (p.contains("retry")) {
                const json& r = p["retry"];
                config.retry.max_attempts = r.value("max_attempts", config.retry.max_attempts);
                config.retry.initial_delay =
                    std::chrono::milliseconds(r.value("initial_delay_ms", config.retry.initial_delay.count()));
                config.retry.multiplier = r.value("multiplier", config.retry.multiplier);
                config.retry.max_delay =
                    std::chrono::milliseconds(r.value("max_delay_ms", config.retry.max_delay.count()));
            }
            if (p.contains("mock")) {
                const json& m = p["mock"];
                config.mock.seed = m.value("seed", config.mock.seed);
                config.mock.dim = m.value("dim", config.mock.dim);
                config.mock.embedding_fixture = m.value("embedding_fixture", config.mock.embedding_fixture);
                config.mock.rules = m.value("rules", config.mock.rules);
            }
        }
        if (doc.contains("defaults")) {
            const json& d = doc["defaults"];
            config.generation_temperature = d.value("generation_temperature", config.generation_temperature);
            config.eval_temperature = d.value("eval_temperature", config.eval_temperature);
            config.trials = d.value("trials", config.trials);
            if (d.contains("sweep_temperatures")) {
                d["sweep_temperatures"].get_to(config.sweep_temperatures);
            }
            config.sample_size = d.value("sample_size", config.sample_size);
        }
        if (doc.contains("paths")) {
            const json& paths = doc["paths"];
            config.catalog_path = paths.value("catalog", config.catalog_path);
            config.kb_path = paths.value("kb", config.kb_path);
            config.fixtures_dir = paths.value("fixtures", config.fixtures_dir);
        }
    }
    if (auto it = env.find(kApiKeyEnvVar); it != env.end()) config.api_key = it->second;
    return config;
}

inline void validate_config(const AppConfig& config) {
    if (config.concurrency < 1) throw ValidationError("concurrency must be >= 1");
    if (config.provider_kind == ProviderKind::live) {
        if (config.chat_model.empty() || config.embedding_model.empty()) {
            throw ValidationError("live provider requires chat and embedding model names");
        }
        if (config.api_key.empty()) {
            throw ValidationError(std::string("live provider needs an API key; set the ") +
                                  kApiKeyEnvVar + " environment variable");
        }
    }
}

} // namespace promptforge
