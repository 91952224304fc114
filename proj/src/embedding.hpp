// SPDX-License-Identifier: Apache-2.0

// Text encoders for phase-1 retrieval. The lexical TF-IDF encoder works
// fully offline; the API encoder talks to an OpenAI-style /embeddings
// endpoint.

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "backend.hpp"

namespace picl {

using Vector = std::vector<double>;

class Embedder {
public:
    virtual ~Embedder() = default;

    /// Identifies the vector space; cached vectors are reused only for the same family.
    virtual std::string family() const = 0;
    virtual std::vector<Vector> embed(std::span<const std::string> texts) const = 0;
};

/// TF-IDF over a fixed corpus: raw term counts times smoothed
/// idf = ln((1 + n) / (1 + df)) + 1, L2-normalized. Terms outside the
/// corpus vocabulary are dropped, so a text with no known term maps to
/// the zero vector.
class TfidfModel {
public:
    TfidfModel() = default;
    explicit TfidfModel(std::span<const std::string> corpus);

    Vector vectorize(std::string_view text) const;
    std::size_t dimension() const noexcept { return idf_.size(); }

private:
    std::map<std::string, std::size_t> vocab_;
    std::vector<double> idf_;
};

class LexicalEmbedder : public Embedder {
public:
    explicit LexicalEmbedder(std::span<const std::string> corpus) : model_(corpus) {}

    std::string family() const override { return "lexical-tfidf-v1"; }
    std::vector<Vector> embed(std::span<const std::string> texts) const override;

private:
    TfidfModel model_;
};

/// Request: {"model": M, "input": [texts]}.
/// Response: {"data": [{"index": i, "embedding": [...]}, ...]}.
class ApiEmbedder : public Embedder {
public:
    ApiEmbedder(std::string url, std::string model, std::string api_key, int timeout_s = 120, RetryPolicy retry = {});

    std::string family() const override { return "api:" + model_; }
    std::vector<Vector> embed(std::span<const std::string> texts) const override;

private:
    HttpEndpoint endpoint_;
    std::string model_;
    std::string api_key_;
    int timeout_s_;
    RetryPolicy retry_;
};

double l2_norm(std::span<const double> v);

}  // namespace picl
