// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <cstdlib>
#include <set>

#include "text.hpp"

namespace picl {

std::string to_string(RunMode m) {
    switch (m) {
        case RunMode::zero_shot: return "zero_shot";
        case RunMode::static_icl: return "static_icl";
        case RunMode::picl: return "picl";
    }
    return "picl";
}

std::string to_string(Selector s) {
    switch (s) {
        case Selector::random: return "random";
        case Selector::similarity: return "similarity";
        case Selector::bm25: return "bm25";
    }
    return "similarity";
}

std::string to_string(TextMode t) {
    return t == TextMode::problem_only ? "problem_only" : "full_demo";
}

std::string to_string(BudgetCounting b) {
    return b == BudgetCounting::every_interrupt ? "every_interrupt" : "insertions_only";
}

RunMode parse_run_mode(const std::string& s) {
    if (s == "zero_shot" || s == "zero") return RunMode::zero_shot;
    if (s == "static_icl" || s == "static") return RunMode::static_icl;
    if (s == "picl") return RunMode::picl;
    throw ParseError("unknown mode '" + s + "' (expected zero|static|picl)");
}

Selector parse_selector(const std::string& s) {
    if (s == "random") return Selector::random;
    if (s == "similarity") return Selector::similarity;
    if (s == "bm25") return Selector::bm25;
    throw ParseError("unknown selector '" + s + "' (expected random|similarity|bm25)");
}

TextMode parse_text_mode(const std::string& s) {
    if (s == "problem_only") return TextMode::problem_only;
    if (s == "full_demo") return TextMode::full_demo;
    throw ParseError("unknown text_mode '" + s + "' (expected problem_only|full_demo)");
}

BudgetCounting parse_budget_counting(const std::string& s) {
    if (s == "every_interrupt") return BudgetCounting::every_interrupt;
    if (s == "insertions_only") return BudgetCounting::insertions_only;
    throw ParseError("unknown budget_counting '" + s + "'");
}

namespace {

std::string join_errors(const std::vector<ConfigError>& errors) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += " [" + e.message() + "]";
    return msg;
}

}  // namespace

ConfigValidationError::ConfigValidationError(std::vector<ConfigError> errors)
    : Error(join_errors(errors)), errors_(std::move(errors)) {}

std::vector<ConfigError> check_config(const EngineConfig& c) {
    std::vector<ConfigError> errors;
    auto fail = [&](std::string field, std::string constraint) {
        errors.push_back({std::move(field), std::move(constraint)});
    };

    std::set<std::string> seen;
    for (const auto& tok : c.interruption_tokens) {
        if (trim(tok).empty()) fail("interruption_tokens", "entries must be non-empty");
        else if (!seen.insert(to_lower(trim(tok))).second)
            fail("interruption_tokens", "duplicate entry '" + tok + "'");
    }
    if (c.mode == RunMode::picl && c.interruption_tokens.empty())
        fail("interruption_tokens", "must be non-empty in picl mode");
    if (c.max_interventions < 0) fail("max_interventions", "r >= 0");
    if (c.insertion_count < 1) fail("insertion_count", "k >= 1");
    if (c.retrieval_candidates < 1) fail("retrieval_candidates", "N >= 1");
    if (c.insertion_count > c.retrieval_candidates) fail("insertion_count", "k <= N violated");
    if (!(c.temperature >= 0.0)) fail("temperature", "temperature >= 0");
    if (!(c.top_p > 0.0 && c.top_p <= 1.0)) fail("top_p", "top_p in (0,1]");
    if (c.max_tokens < 1) fail("max_tokens", "max_tokens >= 1");
    if (c.want_logprobs && c.top_logprobs < 1) fail("top_logprobs", "top_logprobs >= 1 when logprobs are requested");
    if (c.static_shot_count < 0) fail("static_shot_count", "static_shot_count >= 0");
    if (c.mode == RunMode::static_icl && c.static_shot_count < 1)
        fail("static_shot_count", "static_shot_count >= 1 in static mode");
    if (c.samples < 1) fail("samples", "samples >= 1");
    if (!(c.inserted_token_ratio > 0.0)) fail("inserted_token_ratio", "inserted_token_ratio > 0");
    if (c.backend.kind != "mock" && c.backend.kind != "openai")
        fail("backend.kind", "one of mock|openai");
    if (c.backend.kind == "openai" && c.backend.url.empty()) fail("backend.url", "required for openai backend");
    if (c.backend.max_attempts < 1) fail("backend.max_attempts", "max_attempts >= 1");
    if (c.backend.backoff_ms < 0) fail("backend.backoff_ms", "backoff_ms >= 0");
    for (const auto* svc : {&c.embedder, &c.reranker}) {
        const std::string name = svc == &c.embedder ? "embedder" : "reranker";
        if (svc->kind != "lexical" && svc->kind != "api") fail(name + ".kind", "one of lexical|api");
        if (svc->kind == "api" && svc->url.empty()) fail(name + ".url", "required for api " + name);
    }
    return errors;
}

const EngineConfig& validate_config(const EngineConfig& config) {
    auto errors = check_config(config);
    if (!errors.empty()) throw ConfigValidationError(std::move(errors));
    return config;
}

// ---------------------------------------------------------------------------

namespace {

json settings_json(const BackendSettings& b) {
    return json{{"kind", b.kind},           {"url", b.url},
                {"model", b.model},         {"api_key", b.api_key},
                {"api_key_env", b.api_key_env}, {"mock_script", b.mock_script},
                {"max_attempts", b.max_attempts}, {"backoff_ms", b.backoff_ms},
                {"timeout_s", b.timeout_s}};
}

json settings_json(const ServiceSettings& s) {
    return json{{"kind", s.kind}, {"url", s.url}, {"model", s.model},
                {"api_key", s.api_key}, {"api_key_env", s.api_key_env}};
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ParseError("unknown config key '" + where + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void read_backend(const json& j, BackendSettings& b) {
    check_keys(j, {"kind", "url", "model", "api_key", "api_key_env", "mock_script", "max_attempts",
                   "backoff_ms", "timeout_s"},
               "backend.");
    read(j, "kind", b.kind);
    read(j, "url", b.url);
    read(j, "model", b.model);
    read(j, "api_key", b.api_key);
    read(j, "api_key_env", b.api_key_env);
    read(j, "mock_script", b.mock_script);
    read(j, "max_attempts", b.max_attempts);
    read(j, "backoff_ms", b.backoff_ms);
    read(j, "timeout_s", b.timeout_s);
}

void read_service(const json& j, ServiceSettings& s, const std::string& where) {
    check_keys(j, {"kind", "url", "model", "api_key", "api_key_env"}, where + ".");
    read(j, "kind", s.kind);
    read(j, "url", s.url);
    read(j, "model", s.model);
    read(j, "api_key", s.api_key);
    read(j, "api_key_env", s.api_key_env);
}

void apply(const json& j, EngineConfig& c) {
    check_keys(j,
               {"interruption_tokens", "max_interventions", "insertion_count", "retrieval_candidates",
                "temperature", "top_p", "max_tokens", "want_logprobs", "top_logprobs", "mode",
                "static_shot_count", "selector", "seed", "samples", "entropy_threshold",
                "budget_counting", "drop_trigger", "text_mode", "inserted_token_ratio", "backend",
                "embedder", "reranker", "prompts"},
               "");
    try {
        read(j, "interruption_tokens", c.interruption_tokens);
        read(j, "max_interventions", c.max_interventions);
        read(j, "insertion_count", c.insertion_count);
        read(j, "retrieval_candidates", c.retrieval_candidates);
        read(j, "temperature", c.temperature);
        read(j, "top_p", c.top_p);
        read(j, "max_tokens", c.max_tokens);
        read(j, "want_logprobs", c.want_logprobs);
        read(j, "top_logprobs", c.top_logprobs);
        if (j.contains("mode")) c.mode = parse_run_mode(j.at("mode").get<std::string>());
        read(j, "static_shot_count", c.static_shot_count);
        if (j.contains("selector")) c.selector = parse_selector(j.at("selector").get<std::string>());
        read(j, "seed", c.seed);
        read(j, "samples", c.samples);
        if (j.contains("entropy_threshold")) {
            const auto& t = j.at("entropy_threshold");
            c.entropy_threshold = t.is_null() ? std::nullopt : std::optional<double>(t.get<double>());
        }
        if (j.contains("budget_counting"))
            c.budget_counting = parse_budget_counting(j.at("budget_counting").get<std::string>());
        read(j, "drop_trigger", c.drop_trigger);
        if (j.contains("text_mode")) c.text_mode = parse_text_mode(j.at("text_mode").get<std::string>());
        read(j, "inserted_token_ratio", c.inserted_token_ratio);
        if (j.contains("backend")) read_backend(j.at("backend"), c.backend);
        if (j.contains("embedder")) read_service(j.at("embedder"), c.embedder, "embedder");
        if (j.contains("reranker")) read_service(j.at("reranker"), c.reranker, "reranker");
        if (j.contains("prompts")) {
            const auto& p = j.at("prompts");
            check_keys(p, {"zero_shot_path", "few_shot_path", "detection_path"}, "prompts.");
            read(p, "zero_shot_path", c.prompts.zero_shot_path);
            read(p, "few_shot_path", c.prompts.few_shot_path);
            read(p, "detection_path", c.prompts.detection_path);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
}

}  // namespace

void to_json(json& j, const EngineConfig& c) {
    j = json{{"interruption_tokens", c.interruption_tokens},
             {"max_interventions", c.max_interventions},
             {"insertion_count", c.insertion_count},
             {"retrieval_candidates", c.retrieval_candidates},
             {"temperature", c.temperature},
             {"top_p", c.top_p},
             {"max_tokens", c.max_tokens},
             {"want_logprobs", c.want_logprobs},
             {"top_logprobs", c.top_logprobs},
             {"mode", to_string(c.mode)},
             {"static_shot_count", c.static_shot_count},
             {"selector", to_string(c.selector)},
             {"seed", c.seed},
             {"samples", c.samples},
             {"budget_counting", to_string(c.budget_counting)},
             {"drop_trigger", c.drop_trigger},
             {"text_mode", to_string(c.text_mode)},
             {"inserted_token_ratio", c.inserted_token_ratio},
             {"backend", settings_json(c.backend)},
             {"embedder", settings_json(c.embedder)},
             {"reranker", settings_json(c.reranker)},
             {"prompts", json{{"zero_shot_path", c.prompts.zero_shot_path},
                              {"few_shot_path", c.prompts.few_shot_path},
                              {"detection_path", c.prompts.detection_path}}}};
    j["entropy_threshold"] = c.entropy_threshold ? json(*c.entropy_threshold) : json(nullptr);
}

void from_json(const json& j, EngineConfig& c) {
    c = EngineConfig{};
    apply(j, c);
}

EngineConfig merge_config(const EngineConfig& base, const json& patch) {
    EngineConfig out = base;
    apply(patch, out);
    return out;
}

EngineConfig load_config_file(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return j.get<EngineConfig>();
}

std::string resolve_api_key(const std::string& explicit_key, const std::string& env_name) {
    if (!explicit_key.empty()) return explicit_key;
    if (env_name.empty()) return {};
    const char* v = std::getenv(env_name.c_str());
    return v ? std::string(v) : std::string{};
}

}  // namespace picl
