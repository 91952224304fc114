// SPDX-License-Identifier: Apache-2.0

// Run drivers. `run_picl` watches the stream for interruption words; each
// firing (up to the budget r) asks the model whether it is confused and, if
// it is, splices the k best demonstrations for that confusion right after
// the trigger and resumes generation from the extended context. Once the
// budget is spent the rest of the stream is taken as is. `run_static` and
// `run_zero_shot` are the fixed-prompt baselines.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "backend.hpp"
#include "config.hpp"
#include "core.hpp"
#include "embedding.hpp"
#include "pool.hpp"
#include "prompts.hpp"
#include "retrieval.hpp"

namespace picl {

struct RunContext {
    Backend& backend;
    const EngineConfig& config;
    const PromptTemplates& templates;
    const DemonstrationPool* pool = nullptr;
    const Embedder* embedder = nullptr;
    const Reranker* reranker = nullptr;
    std::optional<std::uint64_t> sample_seed;
};

GenerationTranscript run_picl(const RunContext& ctx, const Query& query);
GenerationTranscript run_zero_shot(const RunContext& ctx, const Query& query);

/// Throws RetrievalError when the pool holds fewer demonstrations than the
/// configured shot count.
GenerationTranscript run_static(const RunContext& ctx, const Query& query);

GenerationTranscript run_query(const RunContext& ctx, const Query& query, RunMode mode);

/// Pool indices chosen for a static prompt, in prompt order.
std::vector<std::size_t> select_static_demos(const RunContext& ctx, const Query& query);

/// Deterministic for a given (seed, query id), independent of thread
/// scheduling and standard-library implementation.
std::vector<std::size_t> random_selection(std::size_t pool_size, std::size_t count, std::uint64_t seed,
                                          const std::string& query_id);

/// Word count of `text` times the configured ratio, rounded.
std::size_t estimate_inserted_tokens(const std::string& text, double ratio);
std::string inserted_count_method(double ratio);

}  // namespace picl
