// SPDX-License-Identifier: Apache-2.0

// Two-phase demonstration selection. Phase 1 narrows the pool to N
// candidates by cosine similarity to the query (or BM25 for the lexical
// baseline); phase 2 rescores them against the query together with the
// confusion summary and keeps the top k. Every ordering is by score
// descending, then pool index ascending.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "embedding.hpp"
#include "pool.hpp"

namespace picl {

struct RankedCandidate {
    std::string demo_id;
    double phase1_score = 0.0;
    std::optional<double> phase2_score;
    std::size_t pool_index = 0;

    bool operator==(const RankedCandidate&) const = default;
};

/// Throws RetrievalError for a zero-norm input or a dimension mismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Exhaustive scan over the pool's embedding rows. Rows or a query with
/// zero norm score 0.
std::vector<RankedCandidate> rank_by_vector(const DemonstrationPool& pool, std::span<const double> query_vector,
                                            std::size_t n);

/// Encodes the query text with `embedder` and ranks the pool. The pool must
/// carry an embedding index of the same family.
std::vector<RankedCandidate> retrieve_candidates(const DemonstrationPool& pool, const Query& query, std::size_t n,
                                                 const Embedder& embedder);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Okapi BM25 over the pool's lexical index with
/// idf = ln(1 + (n - df + 0.5) / (df + 0.5)).
std::vector<RankedCandidate> bm25_retrieve(const DemonstrationPool& pool, std::string_view query_text,
                                           std::size_t n, Bm25Params params = {});

/// The cross-encoder input layout: "[CLS] q [SEP] d [SEP] C [SEP]".
std::string composite_input(std::string_view query, std::string_view demo, std::string_view summary);

class Reranker {
public:
    virtual ~Reranker() = default;

    virtual std::string name() const = 0;
    /// One score per demonstration, in input order.
    virtual std::vector<double> score(const Query& query, const ConfusionSummary& summary,
                                      std::span<const Demonstration* const> demos) const = 0;
};

/// Offline stand-in for a cross-encoder: cosine between TF-IDF(q + C) and
/// TF-IDF(rendered demonstration), with the vocabulary taken from the pool.
class LexicalReranker : public Reranker {
public:
    explicit LexicalReranker(const DemonstrationPool& pool);

    std::string name() const override { return "lexical-tfidf-v1"; }
    std::vector<double> score(const Query& query, const ConfusionSummary& summary,
                              std::span<const Demonstration* const> demos) const override;

private:
    TfidfModel model_;
};

/// Request: {"model": M, "query": q + "\n" + C, "documents": [rendered demos]}.
/// Response: {"results": [{"index": i, "relevance_score": s}, ...]}.
class ApiReranker : public Reranker {
public:
    ApiReranker(std::string url, std::string model, std::string api_key, int timeout_s = 120, RetryPolicy retry = {});

    std::string name() const override { return "api:" + model_; }
    std::vector<double> score(const Query& query, const ConfusionSummary& summary,
                              std::span<const Demonstration* const> demos) const override;

private:
    HttpEndpoint endpoint_;
    std::string model_;
    std::string api_key_;
    int timeout_s_;
    RetryPolicy retry_;
};

struct RerankResult {
    std::vector<RankedCandidate> top;
    std::optional<std::string> warning;  // set when the reranker failed and phase-1 order was kept
};

/// Rescores `candidates` and returns the best k. Requires a non-empty
/// candidate list and a non-empty summary.
RerankResult rerank(std::span<const RankedCandidate> candidates, const DemonstrationPool& pool, const Query& query,
                    const ConfusionSummary& summary, std::size_t k, const Reranker& reranker);

/// Sorts by (score desc, pool_index asc) using phase2_score when present.
void sort_candidates(std::vector<RankedCandidate>& candidates);

}  // namespace picl
