// SPDX-License-Identifier: Apache-2.0

#include "backend.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <thread>

#include "text.hpp"

namespace picl {

void check_request(const BackendRequest& request) {
    if (request.max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
    if (request.want_logprobs && request.top_logprobs_n < 1)
        throw std::invalid_argument("top_logprobs_n must be >= 1 when logprobs are requested");
}

// ---------------------------------------------------------------------------
// Mock script format
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> read_match(const json& j) {
    if (!j.contains("match") || j.at("match").is_null()) return {};
    const auto& m = j.at("match");
    if (m.is_string()) return {m.get<std::string>()};
    return m.get<std::vector<std::string>>();
}

MockStep read_step(const json& j, std::size_t index) {
    MockStep step;
    const auto where = "step " + std::to_string(index) + ": ";
    if (j.is_string()) {
        step.text = j.get<std::string>();
        return step;
    }
    if (j.is_array()) {
        if (j.empty() || j.size() > 2) throw ParseError(where + "expected [text, alternatives]");
        step.text = j.at(0).get<std::string>();
        if (j.size() == 2) step.alternatives = j.at(1).get<std::vector<Alternative>>();
    } else if (j.is_object()) {
        if (j.value("error", std::string{}) == "transport") {
            step.fail = true;
            return step;
        }
        step.text = j.at("text").get<std::string>();
        step.alternatives = j.value("alternatives", std::vector<Alternative>{});
    } else {
        throw ParseError(where + "unsupported step form");
    }
    std::stable_sort(step.alternatives.begin(), step.alternatives.end(),
                     [](const Alternative& a, const Alternative& b) { return a.logprob > b.logprob; });
    if (!step.alternatives.empty()) {
        TokenEvent probe{step.text, std::nullopt, step.alternatives};
        if (auto problem = check_token_event(probe)) throw ParseError(where + *problem);
    }
    return step;
}

std::vector<MockStep> read_steps(const json& j) {
    std::vector<MockStep> steps;
    std::size_t i = 0;
    for (const auto& s : j) steps.push_back(read_step(s, i++));
    return steps;
}

bool matches_all(const std::vector<std::string>& needles, const std::string& haystack) {
    return std::all_of(needles.begin(), needles.end(),
                       [&](const std::string& n) { return haystack.find(n) != std::string::npos; });
}

json step_json(const MockStep& s) {
    if (s.fail) return json{{"error", "transport"}};
    if (s.alternatives.empty()) return json(s.text);
    return json::array({s.text, s.alternatives});
}

}  // namespace

MockScript parse_mock_script(const json& j) {
    MockScript script;
    try {
        if (!j.is_object()) throw ParseError("mock script must be a JSON object");
        if (j.contains("steps")) script.streams.push_back(MockStream{read_match(j), read_steps(j.at("steps")), false});
        for (const auto& s : j.value("streams", json::array())) {
            MockStream stream;
            stream.match = read_match(s);
            stream.steps = read_steps(s.value("steps", json::array()));
            stream.fail_start = s.value("error", std::string{}) == "transport";
            script.streams.push_back(std::move(stream));
        }
        for (const auto& r : j.value("responses", json::array())) {
            MockResponse resp;
            resp.match = read_match(r);
            resp.response = r.value("response", std::string{});
            resp.fail_count = r.value("fail_count", 0);
            resp.terminal = r.value("error", std::string{}) == "terminal";
            script.responses.push_back(std::move(resp));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("mock script: ") + e.what());
    }
    return script;
}

MockScript load_mock_script(const std::string& path) {
    try {
        return parse_mock_script(json::parse(read_file(path)));
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

json mock_script_to_json(const MockScript& script) {
    json streams = json::array();
    for (const auto& s : script.streams) {
        json steps = json::array();
        for (const auto& step : s.steps) steps.push_back(step_json(step));
        json entry{{"match", s.match}, {"steps", steps}};
        if (s.fail_start) entry["error"] = "transport";
        streams.push_back(std::move(entry));
    }
    json responses = json::array();
    for (const auto& r : script.responses) {
        json entry{{"match", r.match}, {"response", r.response}, {"fail_count", r.fail_count}};
        if (r.terminal) entry["error"] = "terminal";
        responses.push_back(std::move(entry));
    }
    return json{{"streams", streams}, {"responses", responses}};
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

namespace {

class MockTokenStream : public TokenStream {
public:
    MockTokenStream(const std::vector<MockStep>& steps, std::size_t begin, std::size_t end)
        : steps_(steps), pos_(begin), end_(end) {}

    std::optional<TokenEvent> next() override {
        if (pos_ >= end_) return std::nullopt;
        const auto& step = steps_[pos_++];
        if (step.fail) throw BackendError("scripted transport failure mid-stream", true);
        TokenEvent ev;
        ev.text = step.text;
        ev.top_alternatives = step.alternatives;
        for (const auto& alt : step.alternatives) {
            if (alt.text == step.text) {
                ev.logprob = alt.logprob;
                break;
            }
        }
        if (step.alternatives.empty()) degraded_ = true;
        return ev;
    }

    bool degraded() const override { return degraded_; }

private:
    const std::vector<MockStep>& steps_;
    std::size_t pos_;
    std::size_t end_;
    bool degraded_ = false;
};

}  // namespace

MockBackend::MockBackend(MockScript script) : script_(std::move(script)) {}

std::unique_ptr<TokenStream> MockBackend::stream_generate(const BackendRequest& request) {
    check_request(request);
    ++stream_calls_;
    for (const auto& stream : script_.streams) {
        if (!matches_all(stream.match, request.prompt)) continue;
        if (stream.fail_start) throw BackendError("scripted transport failure", true);
        const std::size_t begin = std::min(request.resume_offset, stream.steps.size());
        const std::size_t end =
            std::min(stream.steps.size(), begin + static_cast<std::size_t>(request.max_tokens));
        return std::make_unique<MockTokenStream>(stream.steps, begin, end);
    }
    throw BackendError("no scripted stream for prompt", false);
}

std::string MockBackend::complete(const std::string& prompt, const CompletionOptions&) {
    ++complete_calls_;
    for (std::size_t i = 0; i < script_.responses.size(); ++i) {
        const auto& resp = script_.responses[i];
        if (!matches_all(resp.match, prompt)) continue;
        if (resp.terminal) throw BackendError("scripted terminal error", false);
        if (resp.fail_count != 0) {
            std::lock_guard lock(failures_mutex_);
            int& seen = failures_seen_[{i, prompt}];
            if (resp.fail_count < 0 || seen < resp.fail_count) {
                ++seen;
                throw BackendError("scripted transport failure", true);
            }
        }
        return resp.response;
    }
    throw BackendError("no scripted response", false);
}

// ---------------------------------------------------------------------------
// Retry decorator
// ---------------------------------------------------------------------------

RetryingBackend::RetryingBackend(std::shared_ptr<Backend> inner, RetryPolicy policy)
    : inner_(std::move(inner)), policy_(policy) {
    if (!inner_) throw std::invalid_argument("RetryingBackend needs a backend");
}

std::unique_ptr<TokenStream> RetryingBackend::stream_generate(const BackendRequest& request) {
    return call_with_retry(policy_, [&] { return inner_->stream_generate(request); });
}

std::string RetryingBackend::complete(const std::string& prompt, const CompletionOptions& options) {
    return call_with_retry(policy_, [&] { return inner_->complete(prompt, options); });
}

// ---------------------------------------------------------------------------

std::shared_ptr<Backend> make_backend(const EngineConfig& config) {
    std::shared_ptr<Backend> inner;
    const auto& b = config.backend;
    if (b.kind == "mock") {
        if (b.mock_script.empty()) throw Error("backend.mock_script is required for the mock backend");
        inner = std::make_shared<MockBackend>(load_mock_script(b.mock_script));
    } else if (b.kind == "openai") {
        inner = std::make_shared<HttpBackend>(b.url, b.model, resolve_api_key(b.api_key, b.api_key_env),
                                              b.timeout_s);
    } else {
        throw Error("unknown backend kind '" + b.kind + "'");
    }
    return std::make_shared<RetryingBackend>(std::move(inner), RetryPolicy{b.max_attempts, b.backoff_ms});
}

}  // namespace picl
