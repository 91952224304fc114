// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <thread>

#include <httplib.h>

#include "backend.hpp"
#include "http_util.hpp"
#include "text.hpp"

namespace picl {

HttpEndpoint parse_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error("endpoint URL needs a scheme: '" + url + "'");
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw Error("unsupported URL scheme '" + scheme + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    HttpEndpoint ep;
    if (path_start == std::string::npos) {
        ep.scheme_host_port = url;
        ep.path = "";
    } else {
        ep.scheme_host_port = url.substr(0, path_start);
        ep.path = url.substr(path_start);
    }
    while (!ep.path.empty() && ep.path.back() == '/') ep.path.pop_back();
    return ep;
}

namespace {

httplib::Headers auth_headers(const std::string& api_key) {
    httplib::Headers h;
    if (!api_key.empty()) h.emplace("Authorization", "Bearer " + api_key);
    return h;
}

void configure(httplib::Client& cli, int timeout_s) {
    cli.set_connection_timeout(10, 0);
    cli.set_read_timeout(timeout_s, 0);
    cli.set_write_timeout(timeout_s, 0);
}

bool is_success(int status) { return status >= 200 && status < 300; }

bool mentions_logprobs(const std::string& body) {
    return to_lower(body).find("logprob") != std::string::npos;
}

}  // namespace

BackendError http_status_error(int status, const std::string& body) {
    std::string detail = trim(body);
    bool parseable = false;
    try {
        const auto j = json::parse(body);
        parseable = j.is_object();
        if (parseable && j.contains("error")) {
            const auto& e = j.at("error");
            detail = e.is_object() ? e.value("message", e.dump()) : (e.is_string() ? e.get<std::string>() : e.dump());
        }
    } catch (const json::exception&) {
    }
    const bool retryable = status == 429 || status >= 500 || !parseable;
    return BackendError("HTTP " + std::to_string(status) + ": " + detail, retryable);
}

json post_json(const HttpEndpoint& endpoint, const std::string& api_key, const json& body, int timeout_s) {
    httplib::Client cli(endpoint.scheme_host_port);
    configure(cli, timeout_s);
    auto res = cli.Post(endpoint.path.empty() ? "/" : endpoint.path, auth_headers(api_key), body.dump(),
                        "application/json");
    if (!res) throw BackendError("transport error: " + httplib::to_string(res.error()), true);
    if (!is_success(res->status)) throw http_status_error(res->status, res->body);
    try {
        return json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw BackendError(std::string("malformed response body: ") + e.what(), false);
    }
}

std::vector<TokenEvent> events_from_completion_chunk(const json& chunk) {
    std::vector<TokenEvent> events;
    if (!chunk.contains("choices") || chunk.at("choices").empty()) return events;
    const auto& choice = chunk.at("choices").at(0);
    const std::string text = choice.value("text", std::string{});
    const auto lp_it = choice.find("logprobs");
    if (lp_it == choice.end() || !lp_it->is_object() || !lp_it->contains("tokens") ||
        !lp_it->at("tokens").is_array() || lp_it->at("tokens").empty()) {
        if (!text.empty()) events.push_back(TokenEvent{text, std::nullopt, {}});
        return events;
    }
    const auto& lp = *lp_it;
    const auto& tokens = lp.at("tokens");
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        TokenEvent ev;
        ev.text = tokens.at(i).get<std::string>();
        if (lp.contains("token_logprobs") && lp.at("token_logprobs").is_array() &&
            i < lp.at("token_logprobs").size() && lp.at("token_logprobs").at(i).is_number())
            ev.logprob = std::min(0.0, lp.at("token_logprobs").at(i).get<double>());
        if (lp.contains("top_logprobs") && lp.at("top_logprobs").is_array() && i < lp.at("top_logprobs").size()) {
            const auto& top = lp.at("top_logprobs").at(i);
            if (top.is_object()) {
                for (const auto& [tok, v] : top.items())
                    if (v.is_number()) ev.top_alternatives.push_back({tok, std::min(0.0, v.get<double>())});
            } else if (top.is_array()) {
                for (const auto& entry : top)
                    ev.top_alternatives.push_back(
                        {entry.at("token").get<std::string>(), std::min(0.0, entry.at("logprob").get<double>())});
            }
        }
        if (!ev.top_alternatives.empty()) {
            const bool present = std::any_of(ev.top_alternatives.begin(), ev.top_alternatives.end(),
                                             [&](const Alternative& a) { return a.text == ev.text; });
            if (!present && ev.logprob) ev.top_alternatives.push_back({ev.text, *ev.logprob});
            if (!present && !ev.logprob) ev.top_alternatives.clear();
            std::sort(ev.top_alternatives.begin(), ev.top_alternatives.end(),
                      [](const Alternative& a, const Alternative& b) {
                          return a.logprob != b.logprob ? a.logprob > b.logprob : a.text < b.text;
                      });
            if (!ev.logprob) {
                for (const auto& a : ev.top_alternatives)
                    if (a.text == ev.text) ev.logprob = a.logprob;
            }
        }
        events.push_back(std::move(ev));
    }
    return events;
}

namespace {

class HttpTokenStream : public TokenStream {
public:
    HttpTokenStream(const HttpEndpoint& ep, std::string api_key, json body, int timeout_s, bool degraded)
        : degraded_(degraded) {
        worker_ = std::thread([this, ep, key = std::move(api_key), body = std::move(body), timeout_s] {
            run(ep, key, body, timeout_s);
        });
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return started_ || done_; });
    }

    ~HttpTokenStream() override {
        cancel_ = true;
        if (worker_.joinable()) worker_.join();
    }

    /// Error raised before any event arrived (bad status, connect failure).
    std::optional<BackendError> start_error() {
        std::lock_guard lock(mutex_);
        if (started_) return std::nullopt;
        return error_;
    }

    std::optional<TokenEvent> next() override {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return !queue_.empty() || done_; });
        if (!queue_.empty()) {
            auto ev = std::move(queue_.front());
            queue_.pop_front();
            if (!ev.has_distribution()) degraded_ = true;
            return ev;
        }
        if (error_) throw *error_;
        return std::nullopt;
    }

    bool degraded() const override {
        std::lock_guard lock(mutex_);
        return degraded_;
    }

private:
    void run(const HttpEndpoint& ep, const std::string& key, const json& body, int timeout_s) {
        httplib::Client cli(ep.scheme_host_port);
        configure(cli, timeout_s);
        httplib::Request req;
        req.method = "POST";
        req.path = ep.path;
        req.headers = auth_headers(key);
        req.headers.emplace("Accept", "text/event-stream");
        req.body = body.dump();
        req.set_header("Content-Type", "application/json");
        req.response_handler = [this](const httplib::Response& res) {
            std::lock_guard lock(mutex_);
            status_ = res.status;
            if (is_success(res.status)) started_ = true;
            cv_.notify_all();
            return true;
        };
        req.content_receiver = [this](const char* data, std::size_t len, std::uint64_t, std::uint64_t) {
            if (cancel_) return false;
            if (!is_success(status_)) {
                error_body_.append(data, len);
                return true;
            }
            buffer_.append(data, len);
            return drain_buffer();
        };
        auto res = cli.send(req);
        std::lock_guard lock(mutex_);
        if (!cancel_ && !finished_) {
            if (!res && status_ == 0) {
                error_ = BackendError("transport error: " + httplib::to_string(res.error()), true);
            } else if (!is_success(status_)) {
                error_ = http_status_error(status_, error_body_);
            } else if (!res) {
                error_ = BackendError("stream interrupted: " + httplib::to_string(res.error()), true);
            }
        }
        done_ = true;
        cv_.notify_all();
    }

    // Parses every complete server-sent event in the buffer. Returns false
    // to stop reading once [DONE] arrives.
    bool drain_buffer() {
        buffer_.erase(std::remove(buffer_.begin(), buffer_.end(), '\r'), buffer_.end());
        std::size_t split;
        while ((split = buffer_.find("\n\n")) != std::string::npos) {
            const std::string block = buffer_.substr(0, split);
            buffer_.erase(0, split + 2);
            std::string payload;
            std::size_t pos = 0;
            while (pos <= block.size()) {
                auto eol = block.find('\n', pos);
                if (eol == std::string::npos) eol = block.size();
                std::string_view line(block.data() + pos, eol - pos);
                if (line.rfind("data:", 0) == 0) {
                    line.remove_prefix(5);
                    if (!line.empty() && line.front() == ' ') line.remove_prefix(1);
                    if (!payload.empty()) payload.push_back('\n');
                    payload.append(line);
                }
                pos = eol + 1;
            }
            if (payload.empty()) continue;
            if (trim(payload) == "[DONE]") {
                std::lock_guard lock(mutex_);
                finished_ = true;
                return false;
            }
            std::vector<TokenEvent> events;
            try {
                const auto chunk = json::parse(payload);
                if (chunk.contains("error")) {
                    std::lock_guard lock(mutex_);
                    error_ = http_status_error(500, payload);
                    return false;
                }
                events = events_from_completion_chunk(chunk);
            } catch (const json::exception& e) {
                std::lock_guard lock(mutex_);
                error_ = BackendError(std::string("malformed stream chunk: ") + e.what(), false);
                return false;
            }
            std::lock_guard lock(mutex_);
            for (auto& ev : events) queue_.push_back(std::move(ev));
            cv_.notify_all();
        }
        return true;
    }

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<TokenEvent> queue_;
    std::optional<BackendError> error_;
    std::string buffer_;
    std::string error_body_;
    int status_ = 0;
    bool started_ = false;
    bool finished_ = false;
    bool done_ = false;
    bool degraded_;
    std::atomic<bool> cancel_{false};
    std::thread worker_;
};

}  // namespace

HttpBackend::HttpBackend(std::string base_url, std::string model, std::string api_key, int timeout_s)
    : endpoint_(parse_endpoint(base_url)), model_(std::move(model)), api_key_(std::move(api_key)),
      timeout_s_(timeout_s) {
    endpoint_.path += "/completions";
}

std::unique_ptr<TokenStream> HttpBackend::stream_generate(const BackendRequest& request) {
    check_request(request);
    json body{{"prompt", request.prompt},
              {"max_tokens", request.max_tokens},
              {"temperature", request.temperature},
              {"top_p", request.top_p},
              {"stream", true}};
    if (!model_.empty()) body["model"] = model_;
    if (request.seed) body["seed"] = *request.seed;
    if (request.want_logprobs) body["logprobs"] = request.top_logprobs_n;

    auto stream = std::make_unique<HttpTokenStream>(endpoint_, api_key_, body, timeout_s_, false);
    auto err = stream->start_error();
    if (!err) return stream;
    // Servers that refuse logprobs still stream text; continue without them.
    if (request.want_logprobs && !err->retryable() && mentions_logprobs(err->what())) {
        body.erase("logprobs");
        stream = std::make_unique<HttpTokenStream>(endpoint_, api_key_, body, timeout_s_, true);
        err = stream->start_error();
        if (!err) return stream;
    }
    throw *err;
}

std::string HttpBackend::complete(const std::string& prompt, const CompletionOptions& options) {
    json body{{"prompt", prompt},
              {"max_tokens", options.max_tokens},
              {"temperature", options.temperature},
              {"top_p", options.top_p},
              {"stream", false}};
    if (!model_.empty()) body["model"] = model_;
    const auto res = post_json(endpoint_, api_key_, body, timeout_s_);
    if (!res.contains("choices") || res.at("choices").empty()) return {};
    const auto& choice = res.at("choices").at(0);
    if (choice.contains("text") && choice.at("text").is_string()) return choice.at("text").get<std::string>();
    return {};
}

}  // namespace picl
