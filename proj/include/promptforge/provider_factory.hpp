#pragma once

#include <memory>

#include "promptforge/config.hpp"
#include "promptforge/http_provider.hpp"
#include "promptforge/mock_provider.hpp"

namespace promptforge {

inline std::unique_ptr<Provider> make_provider(const AppConfig& config) {
    validate_config(config);
    if (config.provider_kind == ProviderKind::mock) {
        auto mock = std::make_unique<MockProvider>(config.mock.seed, config.mock.dim);
        if (!config.mock.embedding_fixture.empty()) {
            mock->load_embedding_fixture(config.mock.embedding_fixture);
        }
        if (!config.mock.rules.empty()) mock->load_rules(config.mock.rules);
        return mock;
    }
    HttpProviderSettings settings;
    if (!config.endpoint.empty()) settings.endpoint = config.endpoint;
    settings.api_key = config.api_key;
    settings.retry = config.retry;
    settings.concurrency = config.concurrency;
    if (!config.audit_log.empty()) settings.audit = std::make_shared<AuditLog>(config.audit_log);
    return std::make_unique<HttpProvider>(std::move(settings));
}

} // namespace promptforge
