// SPDX-License-Identifier: Apache-2.0

#include "controller.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "answer.hpp"
#include "confusion.hpp"
#include "text.hpp"
#include "uncertainty.hpp"

namespace picl {

std::size_t estimate_inserted_tokens(const std::string& text, double ratio) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(count_words(text)) * ratio));
}

std::string inserted_count_method(double ratio) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "whitespace_words_x_%.2f", ratio);
    return buf;
}

namespace {

class TranscriptBuilder {
public:
    TranscriptBuilder(const Query& q, RunMode mode, double ratio) : ratio_(ratio) {
        t_.query_id = q.id;
        t_.mode = to_string(mode);
        t_.token_counts.inserted_method = inserted_count_method(ratio);
    }

    void generated(const TokenEvent& ev) {
        current_ += ev.text;
        ++t_.token_counts.generated;
    }

    void drop_last(std::size_t bytes) { current_.erase(current_.size() - std::min(bytes, current_.size())); }

    void insert(std::vector<std::string> ids, std::string text) {
        flush();
        t_.token_counts.inserted += estimate_inserted_tokens(text, ratio_);
        t_.segments.push_back(InsertedDemos{std::move(ids), std::move(text)});
    }

    std::string text_so_far() const { return t_.render() + current_; }
    std::size_t generated_count() const { return t_.token_counts.generated; }

    void intervention(InterventionRecord rec) { t_.interventions.push_back(std::move(rec)); }

    void fail(const std::string& why) {
        t_.failed = true;
        t_.warnings.push_back(why);
    }

    void warn(std::string w) { t_.warnings.push_back(std::move(w)); }

    GenerationTranscript finish() {
        flush();
        t_.final_text = t_.render();
        auto extracted = extract_boxed_answer(t_.final_text);
        t_.extracted_answer = extracted.answer;
        if (extracted.answer && inside_insertion(t_.final_text.rfind("\\boxed{")))
            t_.warnings.push_back("extracted answer lies inside an inserted demonstration");
        if (extracted.warning) t_.warnings.push_back(*extracted.warning);
        return std::move(t_);
    }

private:
    bool inside_insertion(std::size_t offset) const {
        std::size_t start = 0;
        for (const auto& s : t_.segments) {
            const auto len = segment_text(s).size();
            if (offset < start + len) return std::holds_alternative<InsertedDemos>(s);
            start += len;
        }
        return false;
    }

    void flush() {
        if (!current_.empty()) t_.segments.push_back(GeneratedText{std::move(current_)});
        current_.clear();
    }

    GenerationTranscript t_;
    std::string current_;
    double ratio_;
};

void require_query(const Query& q) {
    if (trim(q.text).empty()) throw std::invalid_argument("query '" + q.id + "' has empty text");
}

/// Opens a stream continuing the generation at `offset`, or returns null
/// when the token budget is spent.
std::unique_ptr<TokenStream> open_stream(const RunContext& ctx, const std::string& prompt, std::size_t offset) {
    const auto budget = static_cast<std::size_t>(ctx.config.max_tokens);
    if (offset >= budget) return nullptr;
    BackendRequest req;
    req.prompt = prompt;
    req.temperature = ctx.config.temperature;
    req.top_p = ctx.config.top_p;
    req.max_tokens = static_cast<int>(budget - offset);
    req.want_logprobs = ctx.config.want_logprobs;
    req.top_logprobs_n = ctx.config.top_logprobs;
    req.resume_offset = offset;
    req.seed = ctx.sample_seed;
    return ctx.backend.stream_generate(req);
}

void drain(TokenStream* stream, TranscriptBuilder& b) {
    if (!stream) return;
    while (auto ev = stream->next()) b.generated(*ev);
}

GenerationTranscript run_fixed_prompt(const RunContext& ctx, const Query& query, RunMode mode,
                                      const std::string& prompt) {
    TranscriptBuilder b(query, mode, ctx.config.inserted_token_ratio);
    try {
        auto stream = open_stream(ctx, prompt, 0);
        drain(stream.get(), b);
    } catch (const BackendError& e) {
        b.fail(std::string("backend failure: ") + e.what());
    }
    return b.finish();
}

std::optional<double> safe_entropy(const TokenEvent& ev) {
    try {
        if (auto h = event_entropy(ev)) return h->nats;
    } catch (const std::invalid_argument&) {
    }
    return std::nullopt;
}

}  // namespace

GenerationTranscript run_zero_shot(const RunContext& ctx, const Query& query) {
    require_query(query);
    return run_fixed_prompt(ctx, query, RunMode::zero_shot, build_zero_shot_prompt(ctx.templates, query));
}

std::vector<std::size_t> random_selection(std::size_t pool_size, std::size_t count, std::uint64_t seed,
                                          const std::string& query_id) {
    // FNV-1a over the id keeps the draw independent of item order.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : query_id) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::mt19937_64 rng(seed ^ h);
    std::vector<std::size_t> idx(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) idx[i] = i;
    count = std::min(count, pool_size);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (pool_size - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    return idx;
}

std::vector<std::size_t> select_static_demos(const RunContext& ctx, const Query& query) {
    const auto shots = static_cast<std::size_t>(ctx.config.static_shot_count);
    if (!ctx.pool) throw RetrievalError("static ICL needs a demonstration pool");
    if (ctx.pool->size() < shots)
        throw RetrievalError("pool has " + std::to_string(ctx.pool->size()) + " demonstrations but " +
                             std::to_string(shots) + " shots were requested");
    std::vector<RankedCandidate> ranked;
    switch (ctx.config.selector) {
        case Selector::random:
            return random_selection(ctx.pool->size(), shots, ctx.config.seed, query.id);
        case Selector::similarity:
            if (!ctx.embedder) throw RetrievalError("similarity selection needs an embedder");
            ranked = retrieve_candidates(*ctx.pool, query, shots, *ctx.embedder);
            break;
        case Selector::bm25:
            ranked = bm25_retrieve(*ctx.pool, query.text, shots);
            break;
    }
    std::vector<std::size_t> out;
    for (const auto& c : ranked) out.push_back(c.pool_index);
    return out;
}

GenerationTranscript run_static(const RunContext& ctx, const Query& query) {
    require_query(query);
    const auto picks = select_static_demos(ctx, query);
    std::vector<const Demonstration*> demos;
    for (auto i : picks) demos.push_back(&ctx.pool->demos[i]);
    return run_fixed_prompt(ctx, query, RunMode::static_icl, build_static_prompt(ctx.templates, demos, query));
}

GenerationTranscript run_picl(const RunContext& ctx, const Query& query) {
    require_query(query);
    const auto& cfg = ctx.config;
    const std::string base_prompt = build_zero_shot_prompt(ctx.templates, query);
    TranscriptBuilder b(query, RunMode::picl, cfg.inserted_token_ratio);

    int interventions = 0;
    // Decoded text since the last resume point; inserted text never enters it.
    std::string tail;
    try {
        auto stream = open_stream(ctx, base_prompt, 0);
        while (stream && interventions < cfg.max_interventions) {
            auto ev = stream->next();
            if (!ev) {
                stream.reset();
                break;
            }
            const std::size_t position = b.generated_count();
            b.generated(*ev);
            tail += ev->text;

            auto match = detect_interrupt(*ev, cfg.interruption_tokens, tail);
            if (!match) continue;
            const auto entropy = safe_entropy(*ev);
            if (cfg.entropy_threshold && entropy && *entropy < *cfg.entropy_threshold) continue;

            if (cfg.budget_counting == BudgetCounting::every_interrupt) ++interventions;
            InterventionRecord rec;
            rec.position = position;
            rec.trigger_token = match->word;
            rec.entropy = entropy;

            auto detection = detect_confusion(ctx.backend, ctx.templates, query, b.text_so_far());
            rec.summary = detection.summary;
            rec.raw_response = std::move(detection.raw_response);
            if (detection.warning) rec.warnings.push_back(*detection.warning);

            if (!rec.summary.empty()) {
                if (!ctx.pool || ctx.pool->empty()) {
                    rec.warnings.push_back("demonstration pool is empty; nothing inserted");
                } else {
                    if (!ctx.embedder || !ctx.reranker) throw RetrievalError("picl needs an embedder and a reranker");
                    const auto candidates = retrieve_candidates(
                        *ctx.pool, query, static_cast<std::size_t>(cfg.retrieval_candidates), *ctx.embedder);
                    auto reranked = rerank(candidates, *ctx.pool, query, rec.summary,
                                           static_cast<std::size_t>(cfg.insertion_count), *ctx.reranker);
                    if (reranked.warning) rec.warnings.push_back(*reranked.warning);

                    std::vector<const Demonstration*> demos;
                    for (const auto& c : reranked.top) {
                        demos.push_back(&ctx.pool->demos[c.pool_index]);
                        rec.inserted_demo_ids.push_back(c.demo_id);
                    }
                    if (cfg.drop_trigger) b.drop_last(ev->text.size());
                    b.insert(rec.inserted_demo_ids, render_insertion(demos));
                    if (cfg.budget_counting == BudgetCounting::insertions_only) ++interventions;

                    tail.clear();
                    stream = open_stream(ctx, base_prompt + b.text_so_far(), b.generated_count());
                }
            }
            b.intervention(std::move(rec));
        }
        drain(stream.get(), b);
    } catch (const BackendError& e) {
        b.fail(std::string("backend failure: ") + e.what());
    } catch (const RetrievalError& e) {
        b.fail(std::string("retrieval failure: ") + e.what());
    }
    return b.finish();
}

GenerationTranscript run_query(const RunContext& ctx, const Query& query, RunMode mode) {
    switch (mode) {
        case RunMode::zero_shot: return run_zero_shot(ctx, query);
        case RunMode::static_icl: return run_static(ctx, query);
        case RunMode::picl: return run_picl(ctx, query);
    }
    throw std::invalid_argument("unknown run mode");
}

}  // namespace picl
