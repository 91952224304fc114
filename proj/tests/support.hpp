// SPDX-License-Identifier: Apache-2.0

// Shared test helpers: temp directories, scripted engines and the
// controller fixtures under fixtures/controller.

#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "backend.hpp"
#include "config.hpp"
#include "controller.hpp"
#include "engine.hpp"
#include "harness.hpp"
#include "pool.hpp"
#include "text.hpp"

namespace picl::test {

inline std::string fixture_path(const std::string& rel) { return std::string(PICL_FIXTURE_DIR) + "/" + rel; }

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("picl-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

/// An engine over a mock backend, keeping a handle on the mock to count calls.
struct ScriptedEngine {
    std::shared_ptr<MockBackend> mock;
    std::unique_ptr<Engine> engine;

    ScriptedEngine(const json& script, const std::vector<Demonstration>& pool, const json& config_patch = json::object()) {
        mock = std::make_shared<MockBackend>(parse_mock_script(script));
        engine = std::make_unique<Engine>(merge_config(EngineConfig{}, config_patch), mock);
        engine->set_pool(make_pool(pool));
    }

    GenerationTranscript run(const Query& q, std::optional<RunMode> mode = std::nullopt) const {
        const auto& cfg = engine->config();
        return run_query(engine->context(cfg, cfg.seed), q, mode.value_or(cfg.mode));
    }
};

struct ControllerFixture {
    std::string name;
    std::string description;
    json config;
    std::vector<Demonstration> pool;
    json script;
    Query query;
    std::size_t detection_calls = 0;
    json expected;
};

inline ControllerFixture load_controller_fixture(const std::string& name) {
    const auto j = json::parse(read_file(fixture_path("controller/" + name + ".json")));
    ControllerFixture f;
    f.name = name;
    f.description = j.at("description").get<std::string>();
    f.config = j.at("config");
    f.pool = j.at("pool").get<std::vector<Demonstration>>();
    f.script = j.at("script");
    f.query.id = j.at("query").at("id").get<std::string>();
    f.query.text = j.at("query").at("question").get<std::string>();
    f.detection_calls = j.at("detection_calls").get<std::size_t>();
    f.expected = j.at("expected");
    return f;
}

inline const std::vector<std::string>& controller_fixture_names() {
    static const std::vector<std::string> names{"confusion_yes", "confusion_no", "budget_r1", "budget_r2",
                                                "suppression",   "empty_pool",   "r0"};
    return names;
}

/// A step with a two-way uniform distribution over the token and `other`.
inline json uniform_step(const std::string& text, const std::string& other) {
    const double lp = std::log(0.5);
    return json::array({text, json::array({json::array({text, lp}), json::array({other, lp})})});
}

/// A synthetic benchmark over the mock backend. Item i asks for i + 3.
/// Even items say "wait"; every third item reports confusion; every fifth
/// zero-shot answer is off by one, and any stream resumed after an
/// insertion or primed with static examples answers correctly.
struct Synthetic {
    json script;
    std::vector<Demonstration> pool;
    Dataset dataset;
};

inline Synthetic synthetic_benchmark(int n) {
    Synthetic s;
    s.dataset.name = "synthetic";
    json streams = json::array();
    json responses = json::array();
    for (int i = 0; i < n; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "i%03d", i);
        const std::string tag = "Item " + std::to_string(i) + ":";
        s.dataset.items.push_back(Query{id, tag + " what is " + std::to_string(i) + " plus 3?", std::to_string(i + 3)});
        auto steps = [&](int answer) {
            json st = json::array({uniform_step("We", " I"), uniform_step(" add", " sum"), uniform_step(" 3", " 4")});
            if (i % 2 == 0) st.push_back(uniform_step(" wait", " so"));
            st.push_back(uniform_step(",", "."));
            st.push_back(uniform_step(" \\boxed{" + std::to_string(answer) + "}", " \\boxed{0}"));
            return st;
        };
        const int zero_shot_answer = i % 5 == 0 ? i + 4 : i + 3;
        streams.push_back(json{{"match", {tag, "Relevant example"}}, {"steps", steps(i + 3)}});
        streams.push_back(json{{"match", {tag, "examples below"}}, {"steps", steps(i + 3)}});
        streams.push_back(json{{"match", {tag}}, {"steps", steps(zero_shot_answer)}});
        responses.push_back(json{{"match", {"signs of confusion", tag}},
                                 {"response", i % 3 == 0 ? "Yes. confusion{adding a small number}" : "No"}});
    }
    s.script = json{{"streams", streams}, {"responses", responses}};
    for (int d = 0; d < 6; ++d)
        s.pool.push_back(Demonstration{"ex" + std::to_string(d),
                                       "Example: what is " + std::to_string(d) + " plus " + std::to_string(d + 1) + "?",
                                       "Add them to get " + std::to_string(2 * d + 1) + ". \\boxed{" +
                                           std::to_string(2 * d + 1) + "}",
                                       std::nullopt});
    return s;
}

inline std::string dataset_jsonl(const Dataset& ds) {
    std::string out;
    for (const auto& q : ds.items)
        out += json{{"id", q.id}, {"question", q.text}, {"answer", q.gold_answer.value_or("")}}.dump() + "\n";
    return out;
}

inline std::string pool_jsonl(const std::vector<Demonstration>& pool) {
    std::string out;
    for (const auto& d : pool) out += json{{"id", d.id}, {"problem", d.problem}, {"solution", d.solution}}.dump() + "\n";
    return out;
}

}  // namespace picl::test
