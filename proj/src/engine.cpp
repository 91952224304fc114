// SPDX-License-Identifier: Apache-2.0

#include "engine.hpp"

namespace picl {

std::unique_ptr<Embedder> make_embedder(const ServiceSettings& settings, const DemonstrationPool& pool) {
    if (settings.kind == "api")
        return std::make_unique<ApiEmbedder>(settings.url, settings.model,
                                             resolve_api_key(settings.api_key, settings.api_key_env));
    const auto texts = pool.index_texts();
    return std::make_unique<LexicalEmbedder>(texts);
}

std::unique_ptr<Reranker> make_reranker(const ServiceSettings& settings, const DemonstrationPool& pool) {
    if (settings.kind == "api")
        return std::make_unique<ApiReranker>(settings.url, settings.model,
                                             resolve_api_key(settings.api_key, settings.api_key_env));
    return std::make_unique<LexicalReranker>(pool);
}

Engine::Engine(EngineConfig config, std::shared_ptr<Backend> backend)
    : config_(validate_config(config)),
      backend_(backend ? std::move(backend) : make_backend(config_)),
      templates_(PromptTemplates::from_config(config_.prompts)) {}

EmbedReport Engine::load_pool(const std::string& path) {
    return set_pool(picl::load_pool(path, config_.text_mode));
}

EmbedReport Engine::set_pool(DemonstrationPool pool) {
    auto embedder = make_embedder(config_.embedder, pool);
    std::optional<std::string> sidecar;
    if (config_.embedder.kind == "api" && !pool.source_path.empty()) sidecar = default_sidecar_path(pool.source_path);
    EmbedReport report;
    if (pool.empty()) {
        pool.embeddings = EmbeddingIndex{embedder->family(), pool.text_mode, {}};
    } else {
        report = embed_pool(pool, *embedder, sidecar);
    }
    reranker_ = make_reranker(config_.reranker, pool);
    embedder_ = std::move(embedder);
    pool_ = std::move(pool);
    return report;
}

RunContext Engine::context(const EngineConfig& config, std::optional<std::uint64_t> seed) const {
    return RunContext{*backend_, config, templates_, pool(), embedder_.get(), reranker_.get(), seed};
}

GenerationTranscript Engine::run(const Query& query) const {
    return run_query(context(config_, config_.seed), query, config_.mode);
}

}  // namespace picl
