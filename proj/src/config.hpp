// SPDX-License-Identifier: Apache-2.0

// Engine configuration: every tunable of a run plus backend endpoints.
// Loaded from JSON; unknown keys are rejected so typos surface early.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"

namespace picl {

enum class RunMode { zero_shot, static_icl, picl };
enum class Selector { random, similarity, bm25 };

/// Which demonstration text the embedding index covers.
enum class TextMode { problem_only, full_demo };

/// What advances the intervention counter.
enum class BudgetCounting { every_interrupt, insertions_only };

std::string to_string(RunMode m);
std::string to_string(Selector s);
std::string to_string(TextMode t);
std::string to_string(BudgetCounting b);
RunMode parse_run_mode(const std::string& s);
Selector parse_selector(const std::string& s);
TextMode parse_text_mode(const std::string& s);
BudgetCounting parse_budget_counting(const std::string& s);

struct BackendSettings {
    std::string kind = "mock";  // mock | openai
    std::string url;            // base URL of an OpenAI-compatible server, e.g. http://host:8000/v1
    std::string model;
    std::string api_key;
    std::string api_key_env = "OPENAI_API_KEY";
    std::string mock_script;    // path to a mock script file
    int max_attempts = 3;
    int backoff_ms = 250;
    int timeout_s = 600;

    bool operator==(const BackendSettings&) const = default;
};

struct ServiceSettings {
    std::string kind = "lexical";  // lexical | api
    std::string url;               // full endpoint URL
    std::string model;
    std::string api_key;
    std::string api_key_env;

    bool operator==(const ServiceSettings&) const = default;
};

struct PromptSettings {
    std::string zero_shot_path;
    std::string few_shot_path;
    std::string detection_path;

    bool operator==(const PromptSettings&) const = default;
};

struct EngineConfig {
    std::vector<std::string> interruption_tokens{"wait", "maybe"};
    int max_interventions = 1;
    int insertion_count = 1;
    int retrieval_candidates = 20;
    double temperature = 0.7;
    double top_p = 0.8;
    int max_tokens = 8192;
    bool want_logprobs = true;
    int top_logprobs = 20;

    RunMode mode = RunMode::picl;
    int static_shot_count = 1;
    Selector selector = Selector::similarity;
    std::uint64_t seed = 0;
    int samples = 1;

    // Optional extra gate: only interrupt when the step entropy exceeds this.
    std::optional<double> entropy_threshold;
    BudgetCounting budget_counting = BudgetCounting::every_interrupt;
    bool drop_trigger = false;
    TextMode text_mode = TextMode::problem_only;
    double inserted_token_ratio = 1.3;

    BackendSettings backend;
    ServiceSettings embedder;
    ServiceSettings reranker;
    PromptSettings prompts;

    bool operator==(const EngineConfig&) const = default;
};

struct ConfigError {
    std::string field;
    std::string constraint;

    std::string message() const { return field + ": " + constraint; }
    bool operator==(const ConfigError&) const = default;
};

class ConfigValidationError : public Error {
public:
    explicit ConfigValidationError(std::vector<ConfigError> errors);
    const std::vector<ConfigError>& errors() const noexcept { return errors_; }

private:
    std::vector<ConfigError> errors_;
};

/// Every violated constraint, in field order. Empty means valid.
std::vector<ConfigError> check_config(const EngineConfig& config);

/// Returns the config unchanged when valid, throws ConfigValidationError otherwise.
const EngineConfig& validate_config(const EngineConfig& config);

void to_json(json& j, const EngineConfig& c);
void from_json(const json& j, EngineConfig& c);

/// Overlays the keys present in `patch` onto `base`.
EngineConfig merge_config(const EngineConfig& base, const json& patch);

EngineConfig load_config_file(const std::string& path);

/// The API key from settings, falling back to the named environment variable.
std::string resolve_api_key(const std::string& explicit_key, const std::string& env_name);

}  // namespace picl
