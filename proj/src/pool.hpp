// SPDX-License-Identifier: Apache-2.0

// The demonstration pool: loading and validation, BM25 term statistics and
// the dense embedding index with its on-disk cache.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "config.hpp"
#include "core.hpp"
#include "embedding.hpp"

namespace picl {

struct LexicalIndex {
    std::vector<std::unordered_map<std::string, std::size_t>> term_freqs;
    std::vector<std::size_t> doc_lengths;
    std::map<std::string, std::size_t> doc_freqs;
    double avg_length = 0.0;

    static LexicalIndex build(std::span<const std::string> docs);
    bool operator==(const LexicalIndex&) const = default;
};

struct EmbeddingIndex {
    std::string family;
    TextMode text_mode = TextMode::problem_only;
    std::vector<Vector> rows;  // row order = pool order
};

struct DemonstrationPool {
    std::vector<Demonstration> demos;
    TextMode text_mode = TextMode::problem_only;
    LexicalIndex lexical;
    std::optional<EmbeddingIndex> embeddings;
    std::string content_hash;
    std::string source_path;

    std::size_t size() const noexcept { return demos.size(); }
    bool empty() const noexcept { return demos.empty(); }
    std::optional<std::size_t> index_of(const std::string& id) const;

    /// The text each demonstration is indexed by under the pool's text mode.
    std::vector<std::string> index_texts() const;
};

/// Text for one demonstration: its problem, or the full rendered demonstration.
std::string demonstration_text(const Demonstration& demo, TextMode mode);

/// SHA-256 over the canonical JSONL form: one object per line with only
/// id, problem and solution, keys sorted, lines joined by '\n'.
std::string pool_content_hash(std::span<const Demonstration> demos);

/// Validates ids and fields, builds the lexical index and, when every line
/// carries an embedding, a "precomputed" embedding index.
DemonstrationPool make_pool(std::vector<Demonstration> demos, TextMode mode = TextMode::problem_only);

/// JSONL, one {"id", "problem", "solution", "embedding"?} per line. Errors
/// name the offending line.
DemonstrationPool load_pool(const std::string& path, TextMode mode = TextMode::problem_only);

inline constexpr const char* k_precomputed_family = "precomputed";

std::string default_sidecar_path(const std::string& pool_path);

struct EmbedReport {
    bool cache_hit = false;
    std::size_t embedder_calls = 0;
    std::size_t rows = 0;
    std::string sidecar_path;
};

/// Attaches an embedding index computed by `embedder`. A sidecar whose
/// content hash, family and text mode all match is reused without calling
/// the embedder; otherwise every row is recomputed and, if a sidecar path
/// is given, written back. Nothing is written when the embedder fails.
EmbedReport embed_pool(DemonstrationPool& pool, const Embedder& embedder,
                       const std::optional<std::string>& sidecar_path);

}  // namespace picl
