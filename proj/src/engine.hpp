// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>

#include "backend.hpp"
#include "config.hpp"
#include "controller.hpp"
#include "embedding.hpp"
#include "pool.hpp"
#include "prompts.hpp"
#include "retrieval.hpp"

namespace picl {

std::unique_ptr<Embedder> make_embedder(const ServiceSettings& settings, const DemonstrationPool& pool);
std::unique_ptr<Reranker> make_reranker(const ServiceSettings& settings, const DemonstrationPool& pool);

/// Everything one configured run needs: backend, templates, and the pool
/// with its encoders. Read-only once set up, so runs may share it.
class Engine {
public:
    /// Validates the config. Builds the backend from it unless one is given.
    explicit Engine(EngineConfig config, std::shared_ptr<Backend> backend = nullptr);

    /// Loads and indexes a pool file. API embeddings are cached in the
    /// pool's sidecar file; lexical ones are recomputed.
    EmbedReport load_pool(const std::string& path);
    EmbedReport set_pool(DemonstrationPool pool);

    const EngineConfig& config() const noexcept { return config_; }
    Backend& backend() const noexcept { return *backend_; }
    const DemonstrationPool* pool() const noexcept { return pool_ ? &*pool_ : nullptr; }
    const PromptTemplates& templates() const noexcept { return templates_; }

    RunContext context(const EngineConfig& config, std::optional<std::uint64_t> seed = std::nullopt) const;

    GenerationTranscript run(const Query& query) const;

private:
    EngineConfig config_;
    std::shared_ptr<Backend> backend_;
    PromptTemplates templates_;
    std::optional<DemonstrationPool> pool_;
    std::unique_ptr<Embedder> embedder_;
    std::unique_ptr<Reranker> reranker_;
};

}  // namespace picl
