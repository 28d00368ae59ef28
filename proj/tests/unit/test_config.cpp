#include <catch2/catch_amalgamated.hpp>

#include "promptforge/config.hpp"
#include "support/test_util.hpp"

using namespace promptforge;

TEST_CASE("defaults load without a file or credentials") {
    const AppConfig config = load_config("", {});
    CHECK(config.provider_kind == ProviderKind::mock);
    CHECK(config.chat_model == "gemini-2.5-pro");
    CHECK(config.embedding_model == "gemini-embedding-exp-03-07");
    CHECK(config.concurrency == 4);
    CHECK(config.sweep_temperatures == default_sweep_temperatures());
    CHECK_NOTHROW(validate_config(config));
}

TEST_CASE("live mode without the API key env var errors by name") {
    AppConfig config = load_config("", {});
    config.provider_kind = ProviderKind::live;
    CHECK_THROWS_WITH(validate_config(config),
                      Catch::Matchers::ContainsSubstring("PROMPTFORGE_API_KEY"));

    const AppConfig with_key = [] {
        AppConfig c = load_config("", {{"PROMPTFORGE_API_KEY", "secret"}});
        c.provider_kind = ProviderKind::live;
        return c;
    }();
    CHECK(with_key.api_key == "secret");
    CHECK_NOTHROW(validate_config(with_key));
}

TEST_CASE("config files override defaults section by section") {
    test_util::TempDir dir;
    write_text_file_atomic(dir.file("config.json"), R"({
        "provider": {
            "kind": "mock",
            "chat_model": "other-chat",
            "concurrency": 2,
            "retry": {"max_attempts": 7, "initial_delay_ms": 10},
            "mock": {"seed": 99, "dim": 4}
        },
        "defaults": {"generation_temperature": 0.5, "trials": 3, "sweep_temperatures": [0.0, 1.0]},
        "paths": {"catalog": "alt/catalog.json"}
    })");
    const AppConfig config = load_config(dir.file("config.json").string(), {});
    CHECK(config.chat_model == "other-chat");
    CHECK(config.embedding_model == "gemini-embedding-exp-03-07"); // untouched default
    CHECK(config.concurrency == 2);
    CHECK(config.retry.max_attempts == 7);
    CHECK(config.retry.initial_delay.count() == 10);
    CHECK(config.mock.seed == 99);
    CHECK(config.mock.dim == 4);
    CHECK(config.generation_temperature == 0.5);
    CHECK(config.trials == 3);
    CHECK(config.sweep_temperatures == std::vector<double>{0.0, 1.0});
    CHECK(config.catalog_path == "alt/catalog.json");
}

TEST_CASE("malformed config files are rejected") {
    test_util::TempDir dir;
    write_text_file_atomic(dir.file("bad.json"), "not json at all");
    CHECK_THROWS_AS(load_config(dir.file("bad.json").string(), {}), ValidationError);
    CHECK_THROWS_AS(load_config(dir.file("missing.json").string(), {}), IoError);
}

TEST_CASE("concurrency below one is rejected") {
    AppConfig config = load_config("", {});
    config.concurrency = 0;
    CHECK_THROWS_AS(validate_config(config), ValidationError);
}

TEST_CASE("the example config fixture parses cleanly") {
    const AppConfig config =
        load_config((test_util::fixtures_dir() / "config.example.json").string(), {});
    CHECK(config.provider_kind == ProviderKind::mock);
    CHECK(config.trials == 10);
    CHECK(config.sample_size == 40);
    CHECK(config.sweep_temperatures == default_sweep_temperatures());
}
