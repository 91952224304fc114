// SPDX-License-Identifier: Apache-2.0

// Backends, embedders and rerankers against a local HTTP server.

#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "backend.hpp"
#include "embedding.hpp"
#include "retrieval.hpp"
#include "support.hpp"

using namespace picl;

namespace {

class LocalServer {
public:
    LocalServer() = default;
    ~LocalServer() { stop(); }

    httplib::Server& server() { return server_; }

    void start() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }
    std::string url(const std::string& path = "") const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

/// One SSE chunk carrying a single token with an n-way distribution.
std::string sse_chunk(const std::string& token, int n) {
    json top = json::object();
    const double lp = std::log(1.0 / n);
    top[token] = lp;
    for (int i = 1; i < n; ++i) top["alt" + std::to_string(i)] = lp;
    const json chunk{{"choices", {{{"text", token},
                                   {"logprobs",
                                    {{"tokens", {token}}, {"token_logprobs", {lp}}, {"top_logprobs", {top}}}}}}}};
    return "data: " + chunk.dump() + "\n\n";
}

std::string plain_chunk(const std::string& token) {
    return "data: " + json{{"choices", {{{"text", token}}}}}.dump() + "\n\n";
}

std::vector<TokenEvent> drain(TokenStream& s) {
    std::vector<TokenEvent> out;
    while (auto ev = s.next()) out.push_back(*ev);
    return out;
}

BackendRequest request(int n = 5) {
    BackendRequest r;
    r.prompt = "Question: 1+1?";
    r.top_logprobs_n = n;
    r.seed = 7;
    return r;
}

}  // namespace

TEST(HttpBackend, StreamsTokensWithDistributions) {
    LocalServer srv;
    json seen_body;
    srv.server().Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_body = json::parse(req.body);
        const int n = seen_body.at("logprobs").get<int>();
        std::string body;
        for (const auto* t : {"The", " answer", " is", " 2"}) body += sse_chunk(t, n);
        body += "data: [DONE]\n\n";
        res.set_content(body, "text/event-stream");
    });
    srv.start();

    HttpBackend backend(srv.url("/v1"), "m", "secret");
    auto s = backend.stream_generate(request(5));
    const auto events = drain(*s);
    ASSERT_EQ(events.size(), 4u);
    EXPECT_EQ(events[1].text, " answer");
    for (const auto& ev : events) {
        EXPECT_EQ(ev.top_alternatives.size(), 5u);
        EXPECT_NEAR(*ev.logprob, std::log(0.2), 1e-12);
    }
    EXPECT_FALSE(s->degraded());
    EXPECT_EQ(seen_body.at("model"), "m");
    EXPECT_EQ(seen_body.at("stream"), true);
    EXPECT_EQ(seen_body.at("seed"), 7);
    EXPECT_EQ(seen_body.at("prompt"), "Question: 1+1?");
}

TEST(HttpBackend, LogprobRefusalFallsBackToDegradedStream) {
    LocalServer srv;
    std::atomic<int> calls{0};
    srv.server().Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
        ++calls;
        const auto body = json::parse(req.body);
        if (body.contains("logprobs")) {
            res.status = 400;
            res.set_content(R"({"error":{"message":"logprobs are not supported by this model"}})", "application/json");
            return;
        }
        res.set_content(plain_chunk("Hi") + plain_chunk(" there") + "data: [DONE]\n\n", "text/event-stream");
    });
    srv.start();

    HttpBackend backend(srv.url("/v1"), "m", "");
    auto s = backend.stream_generate(request());
    const auto events = drain(*s);
    ASSERT_EQ(events.size(), 2u);
    EXPECT_TRUE(events[0].top_alternatives.empty());
    EXPECT_TRUE(s->degraded());
    EXPECT_EQ(calls.load(), 2);
}

TEST(HttpBackend, ServerErrorsAreRetriedClientErrorsAreNot) {
    LocalServer srv;
    std::atomic<int> calls{0};
    srv.server().Post("/a/completions", [&](const httplib::Request&, httplib::Response& res) {
        if (++calls < 3) {
            res.status = 500;
            res.set_content(R"({"error":"overloaded"})", "application/json");
            return;
        }
        res.set_content(R"({"choices":[{"text":"No"}]})", "application/json");
    });
    std::atomic<int> bad_calls{0};
    srv.server().Post("/b/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++bad_calls;
        res.status = 400;
        res.set_content(R"({"error":{"message":"prompt too long"}})", "application/json");
    });
    srv.start();

    RetryingBackend ok(std::make_shared<HttpBackend>(srv.url("/a"), "m", ""), RetryPolicy{3, 1});
    EXPECT_EQ(ok.complete("p", {}), "No");
    EXPECT_EQ(calls.load(), 3);

    RetryingBackend bad(std::make_shared<HttpBackend>(srv.url("/b"), "m", ""), RetryPolicy{3, 1});
    try {
        bad.complete("p", {});
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_FALSE(e.retryable());
        EXPECT_NE(std::string(e.what()).find("prompt too long"), std::string::npos);
    }
    EXPECT_EQ(bad_calls.load(), 1);
}

TEST(HttpBackend, StreamErrorStatusIsReported) {
    LocalServer srv;
    srv.server().Post("/v1/completions", [&](const httplib::Request&, httplib::Response& res) {
        res.status = 503;
        res.set_content("busy", "text/plain");
    });
    srv.start();
    HttpBackend backend(srv.url("/v1"), "m", "");
    try {
        backend.stream_generate(request());
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_TRUE(e.retryable());
        EXPECT_NE(std::string(e.what()).find("503"), std::string::npos);
    }
}

TEST(HttpBackend, UnreachableServerIsRetryable) {
    HttpBackend backend("http://127.0.0.1:1/v1", "m", "", 2);
    try {
        backend.complete("p", {});
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_TRUE(e.retryable());
    }
}

TEST(CompletionChunk, Parsing) {
    const json chunk = json::parse(R"({"choices":[{"text":"ab","logprobs":{
        "tokens":["a","b"],"token_logprobs":[-0.5,-1.0],
        "top_logprobs":[{"a":-0.5,"c":-1.5},{"x":-0.2}]}}]})");
    const auto events = events_from_completion_chunk(chunk);
    ASSERT_EQ(events.size(), 2u);
    EXPECT_EQ(events[0].top_alternatives.size(), 2u);
    EXPECT_EQ(events[0].top_alternatives[0].text, "a");
    // The sampled token is added when the top list misses it.
    ASSERT_EQ(events[1].top_alternatives.size(), 2u);
    EXPECT_EQ(events[1].top_alternatives[0].text, "x");
    EXPECT_EQ(events[1].top_alternatives[1].text, "b");
    EXPECT_TRUE(events_from_completion_chunk(json{{"choices", json::array()}}).empty());
    const auto plain = events_from_completion_chunk(json{{"choices", {{{"text", "hi"}}}}});
    ASSERT_EQ(plain.size(), 1u);
    EXPECT_FALSE(plain[0].has_distribution());
}

TEST(ApiEmbedder, Contract) {
    LocalServer srv;
    json seen;
    srv.server().Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        json data = json::array();
        const auto n = seen.at("input").size();
        for (std::size_t i = n; i-- > 0;)  // out of order on purpose
            data.push_back({{"index", i}, {"embedding", {static_cast<double>(i), 1.0}}});
        res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    srv.start();
    ApiEmbedder embedder(srv.url("/embed"), "e5", "", 5, RetryPolicy{1, 0});
    EXPECT_EQ(embedder.family(), "api:e5");
    const std::vector<std::string> texts{"a", "b", "c"};
    const auto rows = embedder.embed(texts);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[2], (Vector{2.0, 1.0}));
    EXPECT_EQ(seen.at("model"), "e5");
    EXPECT_EQ(seen.at("input").size(), 3u);
}

TEST(ApiEmbedder, MissingItemIsAnError) {
    LocalServer srv;
    srv.server().Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"data":[{"index":0,"embedding":[1,0]}]})", "application/json");
    });
    srv.start();
    ApiEmbedder embedder(srv.url("/embed"), "e5", "", 5, RetryPolicy{1, 0});
    const std::vector<std::string> texts{"a", "b"};
    EXPECT_THROW(embedder.embed(texts), BackendError);
}

TEST(ApiReranker, Contract) {
    LocalServer srv;
    json seen;
    srv.server().Post("/rerank", [&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        res.set_content(R"({"results":[{"index":1,"relevance_score":0.9},{"index":0,"score":0.1}]})",
                        "application/json");
    });
    srv.start();
    const std::vector<Demonstration> demos{{"a", "pa", "sa", std::nullopt}, {"b", "pb", "sb", std::nullopt}};
    const auto pool = make_pool(demos);
    ApiReranker reranker(srv.url("/rerank"), "bge", "", 5, RetryPolicy{1, 0});
    const std::vector<RankedCandidate> cands{{"a", 0.8, std::nullopt, 0}, {"b", 0.7, std::nullopt, 1}};
    const Query q{"q", "question", std::nullopt};
    const auto r = rerank(cands, pool, q, ConfusionSummary{"the summary"}, 1, reranker);
    ASSERT_EQ(r.top.size(), 1u);
    EXPECT_EQ(r.top[0].demo_id, "b");
    EXPECT_DOUBLE_EQ(*r.top[0].phase2_score, 0.9);
    EXPECT_EQ(seen.at("query"), "question\nthe summary");
    EXPECT_EQ(seen.at("documents").size(), 2u);
    EXPECT_EQ(seen.at("model"), "bge");
}

TEST(ApiReranker, ServiceDownKeepsPhaseOneOrder) {
    LocalServer srv;
    srv.server().Post("/rerank", [&](const httplib::Request&, httplib::Response& res) { res.status = 502; });
    srv.start();
    const auto pool = make_pool({{"a", "pa", "sa", std::nullopt}, {"b", "pb", "sb", std::nullopt}});
    ApiReranker reranker(srv.url("/rerank"), "bge", "", 5, RetryPolicy{2, 0});
    const std::vector<RankedCandidate> cands{{"a", 0.8, std::nullopt, 0}, {"b", 0.7, std::nullopt, 1}};
    const auto r = rerank(cands, pool, Query{"q", "x", std::nullopt}, ConfusionSummary{"c"}, 2, reranker);
    ASSERT_TRUE(r.warning);
    EXPECT_NE(r.warning->find("reranker failed"), std::string::npos);
    EXPECT_EQ(r.top[0].demo_id, "a");
}
