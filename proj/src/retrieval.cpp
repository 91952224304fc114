// SPDX-License-Identifier: Apache-2.0

#include "retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "http_util.hpp"
#include "prompts.hpp"
#include "text.hpp"

namespace picl {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw RetrievalError("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (!(na > 0.0) || !(nb > 0.0)) throw RetrievalError("undefined similarity: zero-norm vector");
    const double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, -1.0, 1.0);
}

namespace {

bool candidate_before(const RankedCandidate& a, const RankedCandidate& b) {
    const double sa = a.phase2_score.value_or(a.phase1_score);
    const double sb = b.phase2_score.value_or(b.phase1_score);
    if (sa != sb) return sa > sb;
    return a.pool_index < b.pool_index;
}

std::vector<RankedCandidate> top_n(std::vector<RankedCandidate> all, std::size_t n) {
    n = std::min(n, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), candidate_before);
    all.resize(n);
    return all;
}

double safe_cosine(std::span<const double> a, std::span<const double> b) {
    if (l2_norm(a) == 0.0 || l2_norm(b) == 0.0) {
        if (a.size() != b.size()) throw RetrievalError("dimension mismatch");
        return 0.0;
    }
    return cosine_similarity(a, b);
}

}  // namespace

void sort_candidates(std::vector<RankedCandidate>& candidates) {
    std::sort(candidates.begin(), candidates.end(), candidate_before);
}

std::vector<RankedCandidate> rank_by_vector(const DemonstrationPool& pool, std::span<const double> query_vector,
                                            std::size_t n) {
    if (!pool.embeddings) throw RetrievalError("pool has no embedding index; run `pool embed` first");
    const auto& rows = pool.embeddings->rows;
    std::vector<RankedCandidate> all;
    all.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        all.push_back(RankedCandidate{pool.demos[i].id, safe_cosine(query_vector, rows[i]), std::nullopt, i});
    return top_n(std::move(all), n);
}

std::vector<RankedCandidate> retrieve_candidates(const DemonstrationPool& pool, const Query& query, std::size_t n,
                                                 const Embedder& embedder) {
    if (!pool.embeddings)
        throw RetrievalError("pool has no embedding index for '" + embedder.family() + "'; run `pool embed` first");
    if (pool.embeddings->family != embedder.family())
        throw RetrievalError("pool is embedded with '" + pool.embeddings->family + "' but the query encoder is '" +
                             embedder.family() + "'; run `pool embed` with the matching embedder");
    const std::string text = query.text;
    const auto vectors = embedder.embed(std::span<const std::string>(&text, 1));
    if (vectors.size() != 1) throw RetrievalError("embedder returned no query vector");
    return rank_by_vector(pool, vectors.front(), n);
}

std::vector<RankedCandidate> bm25_retrieve(const DemonstrationPool& pool, std::string_view query_text, std::size_t n,
                                           Bm25Params params) {
    const auto terms = tokenize_terms(query_text);
    if (terms.empty()) throw RetrievalError("empty query after tokenization");
    const auto& lex = pool.lexical;
    const double docs = static_cast<double>(pool.size());
    std::vector<RankedCandidate> all;
    all.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        double score = 0.0;
        const double len_norm =
            lex.avg_length > 0.0 ? static_cast<double>(lex.doc_lengths[i]) / lex.avg_length : 0.0;
        for (const auto& t : terms) {
            const auto df_it = lex.doc_freqs.find(t);
            if (df_it == lex.doc_freqs.end()) continue;
            const auto tf_it = lex.term_freqs[i].find(t);
            if (tf_it == lex.term_freqs[i].end()) continue;
            const double df = static_cast<double>(df_it->second);
            const double tf = static_cast<double>(tf_it->second);
            const double idf = std::log(1.0 + (docs - df + 0.5) / (df + 0.5));
            score += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * len_norm));
        }
        all.push_back(RankedCandidate{pool.demos[i].id, score, std::nullopt, i});
    }
    return top_n(std::move(all), n);
}

std::string composite_input(std::string_view query, std::string_view demo, std::string_view summary) {
    std::string out = "[CLS] ";
    out.append(query);
    out += " [SEP] ";
    out.append(demo);
    out += " [SEP] ";
    out.append(summary);
    out += " [SEP]";
    return out;
}

// ---------------------------------------------------------------------------

LexicalReranker::LexicalReranker(const DemonstrationPool& pool) {
    std::vector<std::string> corpus;
    corpus.reserve(pool.size());
    for (const auto& d : pool.demos) corpus.push_back(render_demonstration(d));
    model_ = TfidfModel(corpus);
}

std::vector<double> LexicalReranker::score(const Query& query, const ConfusionSummary& summary,
                                           std::span<const Demonstration* const> demos) const {
    const auto qv = model_.vectorize(query.text + " " + summary.text);
    std::vector<double> scores;
    scores.reserve(demos.size());
    for (const auto* d : demos) scores.push_back(safe_cosine(qv, model_.vectorize(render_demonstration(*d))));
    return scores;
}

ApiReranker::ApiReranker(std::string url, std::string model, std::string api_key, int timeout_s, RetryPolicy retry)
    : endpoint_(parse_endpoint(url)), model_(std::move(model)), api_key_(std::move(api_key)),
      timeout_s_(timeout_s), retry_(retry) {}

std::vector<double> ApiReranker::score(const Query& query, const ConfusionSummary& summary,
                                       std::span<const Demonstration* const> demos) const {
    std::vector<std::string> docs;
    docs.reserve(demos.size());
    for (const auto* d : demos) docs.push_back(render_demonstration(*d));
    json body{{"query", query.text + "\n" + summary.text}, {"documents", docs}};
    if (!model_.empty()) body["model"] = model_;
    const auto res = call_with_retry(retry_, [&] { return post_json(endpoint_, api_key_, body, timeout_s_); });
    std::vector<double> scores(demos.size(), 0.0);
    std::vector<bool> seen(demos.size(), false);
    try {
        for (const auto& r : res.at("results")) {
            const auto idx = r.at("index").get<std::size_t>();
            if (idx >= scores.size()) throw BackendError("rerank index out of range", false);
            scores[idx] = r.contains("relevance_score") ? r.at("relevance_score").get<double>()
                                                        : r.at("score").get<double>();
            seen[idx] = true;
        }
    } catch (const json::exception& e) {
        throw BackendError(std::string("malformed rerank response: ") + e.what(), false);
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw BackendError("rerank response missing document " + std::to_string(i), false);
    return scores;
}

RerankResult rerank(std::span<const RankedCandidate> candidates, const DemonstrationPool& pool, const Query& query,
                    const ConfusionSummary& summary, std::size_t k, const Reranker& reranker) {
    if (candidates.empty()) throw std::invalid_argument("rerank needs at least one candidate");
    if (summary.empty()) throw std::invalid_argument("rerank needs a non-empty confusion summary");
    if (k == 0) throw std::invalid_argument("k must be >= 1");

    std::vector<const Demonstration*> demos;
    demos.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (c.pool_index >= pool.size()) throw RetrievalError("candidate outside the pool");
        demos.push_back(&pool.demos[c.pool_index]);
    }

    RerankResult result;
    std::vector<RankedCandidate> ranked(candidates.begin(), candidates.end());
    try {
        const auto scores = reranker.score(query, summary, demos);
        if (scores.size() != ranked.size()) throw BackendError("reranker returned the wrong number of scores", false);
        for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i].phase2_score = scores[i];
    } catch (const BackendError& e) {
        result.warning = std::string("reranker failed, kept phase-1 order: ") + e.what();
        for (auto& c : ranked) c.phase2_score.reset();
    }
    sort_candidates(ranked);
    ranked.resize(std::min(k, ranked.size()));
    result.top = std::move(ranked);
    return result;
}

}  // namespace picl
