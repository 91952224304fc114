// SPDX-License-Identifier: Apache-2.0

// Completion providers. A backend streams TokenEvents for a prompt and
// answers one-shot sub-queries. Resuming after an insertion is always a
// fresh request whose prompt carries the whole context so far; no backend
// keeps session state between requests.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "config.hpp"
#include "core.hpp"

namespace picl {

struct BackendRequest {
    std::string prompt;
    double temperature = 0.7;
    double top_p = 0.8;
    int max_tokens = 8192;
    bool want_logprobs = true;
    int top_logprobs_n = 20;
    // Tokens of this generation already produced by earlier requests; a
    // resumed request continues the same generation from here.
    std::size_t resume_offset = 0;
    std::optional<std::uint64_t> seed;
};

/// Throws std::invalid_argument when the request breaks its invariants.
void check_request(const BackendRequest& request);

struct CompletionOptions {
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 512;
};

class TokenStream {
public:
    virtual ~TokenStream() = default;

    /// The next event, or nullopt at end of sequence.
    virtual std::optional<TokenEvent> next() = 0;

    /// True once the backend has delivered any event without a distribution.
    virtual bool degraded() const = 0;
};

class Backend {
public:
    virtual ~Backend() = default;

    virtual std::unique_ptr<TokenStream> stream_generate(const BackendRequest& request) = 0;
    virtual std::string complete(const std::string& prompt, const CompletionOptions& options) = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock
// ---------------------------------------------------------------------------

struct MockStep {
    std::string text;
    std::vector<Alternative> alternatives;  // empty: no distribution for this step
    bool fail = false;                      // raise a transport error instead of yielding
};

struct MockStream {
    std::vector<std::string> match;  // all must occur in the prompt; empty matches anything
    std::vector<MockStep> steps;
    bool fail_start = false;
};

struct MockResponse {
    std::vector<std::string> match;
    std::string response;
    int fail_count = 0;  // transport failures before succeeding; -1 fails forever
    bool terminal = false;
};

struct MockScript {
    std::vector<MockStream> streams;
    std::vector<MockResponse> responses;
};

MockScript parse_mock_script(const json& j);
MockScript load_mock_script(const std::string& path);
json mock_script_to_json(const MockScript& script);

/// Replays a MockScript. Streams pick the first entry whose match strings
/// all occur in the prompt and start at request.resume_offset; sub-queries
/// pick the first matching canned response. Identical request sequences
/// give identical outputs.
class MockBackend : public Backend {
public:
    explicit MockBackend(MockScript script);

    std::unique_ptr<TokenStream> stream_generate(const BackendRequest& request) override;
    std::string complete(const std::string& prompt, const CompletionOptions& options) override;

    std::size_t stream_calls() const noexcept { return stream_calls_; }
    std::size_t complete_calls() const noexcept { return complete_calls_; }
    const MockScript& script() const noexcept { return script_; }

private:
    MockScript script_;
    std::atomic<std::size_t> stream_calls_{0};
    std::atomic<std::size_t> complete_calls_{0};
    std::mutex failures_mutex_;
    std::map<std::pair<std::size_t, std::string>, int> failures_seen_;
};

// ---------------------------------------------------------------------------
// Retry decorator
// ---------------------------------------------------------------------------

struct RetryPolicy {
    int max_attempts = 3;
    int initial_backoff_ms = 250;
};

/// Calls `fn` until it succeeds, it raises a non-retryable BackendError or
/// the attempts run out; the delay doubles after each failure.
template <typename Fn>
auto call_with_retry(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
    const int max_attempts = policy.max_attempts < 1 ? 1 : policy.max_attempts;
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const BackendError& e) {
            if (!e.retryable()) throw BackendError(e.what(), false, attempt);
            if (attempt >= max_attempts)
                throw BackendError(std::string(e.what()) + " (after " + std::to_string(attempt) + " attempts)",
                                   true, attempt);
        }
        if (policy.initial_backoff_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(policy.initial_backoff_ms) * (1LL << (attempt - 1)));
    }
}

/// Retries retryable BackendErrors with exponential backoff. Failures
/// while a stream is being consumed are not retried here.
class RetryingBackend : public Backend {
public:
    RetryingBackend(std::shared_ptr<Backend> inner, RetryPolicy policy);

    std::unique_ptr<TokenStream> stream_generate(const BackendRequest& request) override;
    std::string complete(const std::string& prompt, const CompletionOptions& options) override;

private:
    std::shared_ptr<Backend> inner_;
    RetryPolicy policy_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible HTTP backend
// ---------------------------------------------------------------------------

struct HttpEndpoint {
    std::string scheme_host_port;  // e.g. http://localhost:8000
    std::string path;              // e.g. /v1/completions
};

HttpEndpoint parse_endpoint(const std::string& url);

/// Speaks the /completions wire protocol: server-sent-event chunks with
/// per-token `logprobs.tokens`, `token_logprobs` and `top_logprobs`.
class HttpBackend : public Backend {
public:
    HttpBackend(std::string base_url, std::string model, std::string api_key, int timeout_s = 600);

    std::unique_ptr<TokenStream> stream_generate(const BackendRequest& request) override;
    std::string complete(const std::string& prompt, const CompletionOptions& options) override;

private:
    HttpEndpoint endpoint_;
    std::string model_;
    std::string api_key_;
    int timeout_s_;
};

/// Splits one `/completions` stream chunk into TokenEvents.
std::vector<TokenEvent> events_from_completion_chunk(const json& chunk);

/// The backend described by the config, wrapped in the retry policy.
std::shared_ptr<Backend> make_backend(const EngineConfig& config);

}  // namespace picl
