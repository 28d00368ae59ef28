#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "promptforge/errors.hpp"
#include "promptforge/json_util.hpp"
#include "promptforge/provider.hpp"
#include "promptforge/rng.hpp"
#include "promptforge/vectors.hpp"

namespace promptforge {

// One routing rule of the mock chat table. Rules are scanned in order and the
// first match wins; an unmatched request falls back to a deterministic
// response derived from (seed, request).
struct MockRule {
    std::string tag;          // prefix match on request_tag; empty matches all
    std::string pattern;      // substring (or regex) match on prompt_text; empty matches all
    bool is_regex = false;
    std::optional<double> temperature; // exact match within 1e-9 when set
    std::string response;
    int emit_tokens = 0;      // append this many filler tokens to the response
    int fail_times = 0;       // throw on the first N matching attempts
    ProviderErrorKind fail_kind = ProviderErrorKind::transport;
};

inline void from_json(const nlohmann::json& j, MockRule& rule) {
    rule.tag = j.value("tag", "");
    rule.pattern = j.value("pattern", "");
    rule.is_regex = j.value("regex", false);
    if (j.contains("temperature")) rule.temperature = j.at("temperature").get<double>();
    rule.response = j.value("response", "");
    rule.emit_tokens = j.value("emit_tokens", 0);
    rule.fail_times = j.value("fail_times", 0);
    if (j.contains("fail_kind")) {
        const std::string kind = j.at("fail_kind").get<std::string>();
        if (kind == "auth") rule.fail_kind = ProviderErrorKind::auth;
        else if (kind == "rate_limit") rule.fail_kind = ProviderErrorKind::rate_limit;
        else if (kind == "timeout") rule.fail_kind = ProviderErrorKind::timeout;
        else if (kind == "malformed") rule.fail_kind = ProviderErrorKind::malformed;
        else if (kind == "transport") rule.fail_kind = ProviderErrorKind::transport;
        else throw ValidationError("unknown fail_kind: " + kind);
    }
}

inline std::vector<MockRule> load_mock_rules(const std::filesystem::path& path) {
    const json doc = read_json_file(path);
    if (!doc.is_array()) throw ValidationError("mock rules file must be a JSON array");
    return doc.get<std::vector<MockRule>>();
}

// Deterministic offline provider. Responses are a pure function of
// (seed, request): the rule table handles scripted scenarios, unmatched
// requests get stable tag-aware defaults, and embeddings come from a
// text->vector fixture or from a hash-seeded unit vector.
class MockProvider : public Provider {
public:
    explicit MockProvider(std::uint64_t seed = 0, std::size_t dim = 16)
        : seed_(seed), dim_(dim) {
        retry_.initial_delay = std::chrono::milliseconds(0);
        retry_.max_delay = std::chrono::milliseconds(0);
        retry_.jitter_seed = seed;
    }

    void add_rule(MockRule rule) {
        std::lock_guard lock(mutex_);
        rules_.push_back(std::move(rule));
        fail_budget_.push_back(rules_.back().fail_times);
    }

    void load_rules(const std::filesystem::path& path) {
        for (auto& rule : load_mock_rules(path)) add_rule(std::move(rule));
    }

    // Stages exact text -> vector mappings so tests control the geometry the
    // clустering sees. All fixture vectors must share one dimension, which
    // then becomes the provider dimension.
    void stage_embedding(const std::string& text, EmbeddingVector vector) {
        std::lock_guard lock(mutex_);
        if (!fixture_.empty() && fixture_.begin()->second.dim() != vector.dim()) {
            throw ValidationError("embedding fixture vectors must share one dim");
        }
        dim_ = vector.dim();
        fixture_[text] = std::move(vector);
    }

    void load_embedding_fixture(const std::filesystem::path& path) {
        const json doc = read_json_file(path);
        if (!doc.is_object()) throw ValidationError("embedding fixture must be a JSON object");
        for (auto it = doc.begin(); it != doc.end(); ++it) {
            stage_embedding(it.key(), it.value().get<EmbeddingVector>());
        }
    }

    ChatResponse complete(const ChatRequest& request) override {
        validate_request(request);
        ++chat_calls_;
        return with_retries(
            retry_, [&] { return attempt_complete(request); },
            [](std::chrono::milliseconds) {});
    }

    EmbeddingResponse embed(const EmbeddingRequest& request) override {
        ++embed_calls_;
        EmbeddingResponse response;
        response.vectors.reserve(request.texts.size());
        std::lock_guard lock(mutex_);
        for (const auto& text : request.texts) {
            auto it = fixture_.find(text);
            if (it != fixture_.end()) {
                response.vectors.push_back(it->second);
            } else {
                response.vectors.push_back(hash_vector(text));
            }
        }
        return response;
    }

    std::string timestamp() const override { return "1970-01-01T00:00:00Z"; }

    int chat_calls() const { return chat_calls_.load(); }
    int chat_attempts() const { return chat_attempts_.load(); }
    int embed_calls() const { return embed_calls_.load(); }

private:
    ChatResponse attempt_complete(const ChatRequest& request) {
        ++chat_attempts_;
        std::string text;
        {
            std::lock_guard lock(mutex_);
            const MockRule* rule = nullptr;
            std::size_t rule_index = 0;
            for (std::size_t i = 0; i < rules_.size(); ++i) {
                if (matches(rules_[i], request)) {
                    rule = &rules_[i];
                    rule_index = i;
                    break;
                }
            }
            if (rule) {
                if (fail_budget_[rule_index] > 0) {
                    --fail_budget_[rule_index];
                    throw ProviderError(rule->fail_kind, "injected failure");
                }
                text = rule->response;
                if (rule->emit_tokens > 0) {
                    std::ostringstream filler;
                    if (!text.empty()) filler << text;
                    for (int i = 0; i < rule->emit_tokens; ++i) {
                        if (i > 0 || !text.empty()) filler << ' ';
                        filler << "tok" << i;
                    }
                    text = filler.str();
                }
            } else {
                text = default_response(request);
            }
        }
        ChatResponse response;
        response.text = std::move(text);
        apply_token_cap(response, request.max_output_tokens);
        return response;
    }

    static bool matches(const MockRule& rule, const ChatRequest& request) {
        if (!rule.tag.empty() && request.request_tag.rfind(rule.tag, 0) != 0) return false;
        if (rule.temperature && std::abs(*rule.temperature - request.temperature) > 1e-9) return false;
        if (!rule.pattern.empty()) {
            if (rule.is_regex) {
                if (!std::regex_search(request.prompt_text, std::regex(rule.pattern))) return false;
            } else if (request.prompt_text.find(rule.pattern) == std::string::npos) {
                return false;
            }
        }
        return true;
    }

    // Tokens are whitespace-delimited words; output beyond the cap is cut
    // and flagged, mirroring a service-side length stop.
    static void apply_token_cap(ChatResponse& response, int max_tokens) {
        std::istringstream in(response.text);
        std::vector<std::string> words;
        std::string word;
        while (in >> word) words.push_back(word);
        if (static_cast<int>(words.size()) <= max_tokens) return;
        std::ostringstream out;
        for (int i = 0; i < max_tokens; ++i) {
            if (i > 0) out << ' ';
            out << words[static_cast<std::size_t>(i)];
        }
        response.text = out.str();
        response.truncated = true;
    }

    std::string hash8(const std::string& text) const {
        SplitMix64 rng(mix_seed(seed_, fnv1a64(text)));
        char buffer[9];
        std::snprintf(buffer, sizeof(buffer), "%08llx",
                      static_cast<unsigned long long>(rng.next_u64() & 0xffffffffULL));
        return buffer;
    }

    EmbeddingVector hash_vector(const std::string& text) const {
        SplitMix64 rng(mix_seed(seed_, fnv1a64(text)));
        std::vector<double> values(dim_);
        for (auto& v : values) v = rng.next_gaussian();
        return l2_normalize(EmbeddingVector(std::move(values)));
    }

    // Stage-aware defaults keyed by the request tag, so the full pipeline
    // runs offline without any scripted rules.
    std::string default_response(const ChatRequest& request) const {
        const std::string key = request.request_tag + "\n" + request.prompt_text;
        const std::string id = hash8(key);
        if (request.request_tag.rfind("label_cluster", 0) == 0) {
            json reply{{"cluster_id", "cluster_" + id},
                       {"cluster_description",
                        "Tasks in this group share capability profile " + id +
                            " and call for closely related solution strategies."}};
            return reply.dump();
        }
        if (request.request_tag.rfind("map_techniques", 0) == 0) {
            return default_selection(request.prompt_text, id);
        }
        if (request.request_tag.rfind("generate_template", 0) == 0) {
            return "<role>\nYou are a seasoned specialist (profile " + id +
                   ") for the task at hand.\n</role>\n\n<task>\n{$INPUT}\n</task>\n\n"
                   "Work through the task carefully and show your reasoning.\n\n"
                   "{$FINAL_ANSWER_FORMAT}\n";
        }
        if (request.request_tag.rfind("eval", 0) == 0) {
            return "Considering the question step by step. The answer is: mock-" + id;
        }
        return "mock response " + id;
    }

    // Reads the technique lines out of the mapping prompt and picks a
    // constraint-satisfying subset, varying the picks with the hash.
    std::string default_selection(const std::string& prompt, const std::string& id) const {
        static const std::regex kEntry("id=([A-Za-z0-9_-]+) category=([A-Za-z]+)");
        std::vector<std::string> role, emotional, reasoning, others;
        for (auto it = std::sregex_iterator(prompt.begin(), prompt.end(), kEntry);
             it != std::sregex_iterator(); ++it) {
            const std::string tid = (*it)[1];
            const std::string category = (*it)[2];
            if (category == "RoleAssignment") role.push_back(tid);
            else if (category == "EmotionalStimulus") emotional.push_back(tid);
            else if (category == "Reasoning") reasoning.push_back(tid);
            else if (category == "Others") others.push_back(tid);
        }
        SplitMix64 rng(mix_seed(seed_, fnv1a64(id)));
        std::vector<std::string> picks;
        if (!role.empty()) picks.push_back(role[0]);
        if (!emotional.empty()) picks.push_back(emotional[rng.next_below(emotional.size())]);
        if (!reasoning.empty()) picks.push_back(reasoning[rng.next_below(reasoning.size())]);
        if (!others.empty() && rng.next_below(2) == 1) {
            picks.push_back(others[rng.next_below(others.size())]);
        }
        return json{{"technique_ids", picks}}.dump();
    }

    std::uint64_t seed_;
    std::size_t dim_;
    RetryPolicy retry_;
    mutable std::mutex mutex_;
    std::vector<MockRule> rules_;
    std::vector<int> fail_budget_;
    std::unordered_map<std::string, EmbeddingVector> fixture_;
    std::atomic<int> chat_calls_{0};
    std::atomic<int> chat_attempts_{0};
    std::atomic<int> embed_calls_{0};
};

} // namespace promptforge
