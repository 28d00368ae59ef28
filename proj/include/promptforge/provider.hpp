#pragma once

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <ctime>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "promptforge/errors.hpp"
#include "promptforge/rng.hpp"
#include "promptforge/vectors.hpp"

namespace promptforge {

struct ChatRequest {
    std::string model_name;
    std::string prompt_text;
    double temperature = 0.0;
    int max_output_tokens = 8192;
    std::string request_tag; // free-form label for logging and mock routing
};

struct ChatResponse {
    std::string text;
    bool truncated = false; // service signaled an output-length cutoff
    std::chrono::milliseconds latency{0};
};

struct EmbeddingRequest {
    std::string model_name;
    std::vector<std::string> texts;
};

struct EmbeddingResponse {
    std::vector<EmbeddingVector> vectors; // one per input text, all same dim
};

inline void validate_request(const ChatRequest& request) {
    if (!(std::isfinite(request.temperature)) || request.temperature < 0.0) {
        throw ValidationError("temperature must be finite and >= 0");
    }
    if (request.prompt_text.empty()) throw ValidationError("prompt_text must be non-empty");
    if (request.max_output_tokens < 1) throw ValidationError("max_output_tokens must be positive");
}

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds initial_delay{250};
    double multiplier = 2.0;
    std::chrono::milliseconds max_delay{8000};
    std::uint64_t jitter_seed = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void default_sleeper(std::chrono::milliseconds delay) {
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
}

// Runs attempt() until it succeeds or retries are exhausted. Only transient
// provider errors are retried; everything else propagates immediately.
template <typename Attempt>
auto with_retries(const RetryPolicy& policy, Attempt&& attempt,
                  const Sleeper& sleep = default_sleeper) -> decltype(attempt()) {
    SplitMix64 jitter(policy.jitter_seed);
    double delay_ms = static_cast<double>(policy.initial_delay.count());
    const int attempts = std::max(1, policy.max_attempts);
    for (int i = 1;; ++i) {
        try {
            return attempt();
        } catch (const ProviderError& e) {
            if (!e.transient() || i >= attempts) throw;
        }
        const double capped = std::min(delay_ms, static_cast<double>(policy.max_delay.count()));
        const double jittered = capped * (0.5 + jitter.next_double()); // 0.5x..1.5x
        sleep(std::chrono::milliseconds(static_cast<long long>(jittered)));
        delay_ms *= policy.multiplier;
    }
}

// Caps the number of in-flight requests against a live service.
class ConcurrencyLimiter {
public:
    explicit ConcurrencyLimiter(int max_in_flight) : available_(std::max(1, max_in_flight)) {}

    class Slot {
    public:
        explicit Slot(ConcurrencyLimiter& limiter) : limiter_(&limiter) {}
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;
        ~Slot() { limiter_->release(); }

    private:
        ConcurrencyLimiter* limiter_;
    };

    Slot acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
        return Slot(*this);
    }

private:
    void release() {
        {
            std::lock_guard lock(mutex_);
            ++available_;
        }
        cv_.notify_one();
    }

    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

// Append-only JSONL log of every request/response pair, for auditing runs.
class AuditLog {
public:
    explicit AuditLog(const std::string& path) : out_(path, std::ios::app) {
        if (!out_) throw IoError("cannot open audit log: " + path);
    }

    void record_chat(const ChatRequest& request, const ChatResponse& response) {
        nlohmann::json line{{"type", "chat"},
                            {"tag", request.request_tag},
                            {"model", request.model_name},
                            {"temperature", request.temperature},
                            {"prompt", request.prompt_text},
                            {"response", response.text},
                            {"truncated", response.truncated},
                            {"latency_ms", response.latency.count()}};
        append(line);
    }

    void record_embed(const EmbeddingRequest& request, const EmbeddingResponse& response) {
        nlohmann::json line{{"type", "embed"},
                            {"model", request.model_name},
                            {"texts", request.texts},
                            {"dim", response.vectors.empty() ? 0 : response.vectors[0].dim()}};
        append(line);
    }

private:
    void append(const nlohmann::json& line) {
        std::lock_guard lock(mutex_);
        out_ << line.dump() << '\n';
        out_.flush();
    }

    std::mutex mutex_;
    std::ofstream out_;
};

// Abstraction over chat-completion and embedding services. Implementations
// are safe to share across threads; complete/embed return fully retried
// results or throw ProviderError.
class Provider {
public:
    virtual ~Provider() = default;

    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual EmbeddingResponse embed(const EmbeddingRequest& request) = 0;

    // ISO-8601 UTC. Deterministic providers pin this so generated artifacts
    // are byte-stable across runs.
    virtual std::string timestamp() const {
        const std::time_t now = std::time(nullptr);
        std::tm utc{};
        gmtime_r(&now, &utc);
        char buffer[32];
        std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
        return buffer;
    }
};

} // namespace promptforge
