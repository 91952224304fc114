// SPDX-License-Identifier: Apache-2.0

#include "pool.hpp"

#include <filesystem>
#include <sstream>

#include "prompts.hpp"
#include "text.hpp"

namespace picl {

LexicalIndex LexicalIndex::build(std::span<const std::string> docs) {
    LexicalIndex idx;
    std::size_t total = 0;
    for (const auto& doc : docs) {
        std::unordered_map<std::string, std::size_t> tf;
        const auto terms = tokenize_terms(doc);
        for (const auto& t : terms) ++tf[t];
        for (const auto& [t, _] : tf) ++idx.doc_freqs[t];
        idx.doc_lengths.push_back(terms.size());
        total += terms.size();
        idx.term_freqs.push_back(std::move(tf));
    }
    idx.avg_length = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
    return idx;
}

std::optional<std::size_t> DemonstrationPool::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < demos.size(); ++i)
        if (demos[i].id == id) return i;
    return std::nullopt;
}

std::vector<std::string> DemonstrationPool::index_texts() const {
    std::vector<std::string> out;
    out.reserve(demos.size());
    for (const auto& d : demos) out.push_back(demonstration_text(d, text_mode));
    return out;
}

std::string demonstration_text(const Demonstration& demo, TextMode mode) {
    return mode == TextMode::problem_only ? demo.problem : render_demonstration(demo);
}

std::string pool_content_hash(std::span<const Demonstration> demos) {
    std::string canonical;
    for (std::size_t i = 0; i < demos.size(); ++i) {
        if (i > 0) canonical.push_back('\n');
        canonical += json{{"id", demos[i].id}, {"problem", demos[i].problem}, {"solution", demos[i].solution}}.dump();
    }
    return sha256_hex(canonical);
}

namespace {

struct Located {
    Demonstration demo;
    std::size_t line;
};

DemonstrationPool build_pool(std::vector<Located> items, TextMode mode) {
    std::map<std::string, std::size_t> first_line;
    std::size_t with_embedding = 0;
    std::size_t dim = 0;
    for (const auto& [d, line] : items) {
        const auto where = "line " + std::to_string(line) + ": ";
        if (trim(d.id).empty()) throw ParseError(where + "empty id");
        if (trim(d.problem).empty()) throw ParseError(where + "empty problem");
        if (trim(d.solution).empty()) throw ParseError(where + "empty solution");
        auto [it, inserted] = first_line.emplace(d.id, line);
        if (!inserted)
            throw ParseError("duplicate id '" + d.id + "' on lines " + std::to_string(it->second) + " and " +
                             std::to_string(line));
        if (d.embedding) {
            if (d.embedding->empty() || !(l2_norm(*d.embedding) > 0.0))
                throw ParseError(where + "embedding must have norm > 0");
            if (with_embedding > 0 && d.embedding->size() != dim)
                throw ParseError(where + "embedding dimension " + std::to_string(d.embedding->size()) +
                                 " differs from " + std::to_string(dim));
            dim = d.embedding->size();
            ++with_embedding;
        }
    }
    if (with_embedding != 0 && with_embedding != items.size())
        throw ParseError("embedding present on some lines only");

    DemonstrationPool pool;
    pool.text_mode = mode;
    pool.demos.reserve(items.size());
    for (auto& it : items) pool.demos.push_back(std::move(it.demo));
    pool.lexical = LexicalIndex::build(pool.index_texts());
    pool.content_hash = pool_content_hash(pool.demos);
    if (with_embedding > 0) {
        EmbeddingIndex idx{k_precomputed_family, mode, {}};
        for (const auto& d : pool.demos) idx.rows.push_back(*d.embedding);
        pool.embeddings = std::move(idx);
    }
    return pool;
}

}  // namespace

DemonstrationPool make_pool(std::vector<Demonstration> demos, TextMode mode) {
    std::vector<Located> items;
    items.reserve(demos.size());
    for (std::size_t i = 0; i < demos.size(); ++i) items.push_back({std::move(demos[i]), i + 1});
    return build_pool(std::move(items), mode);
}

DemonstrationPool load_pool(const std::string& path, TextMode mode) {
    std::istringstream in(read_file(path));
    std::vector<Located> items;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto where = "line " + std::to_string(lineno) + ": ";
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(where + "malformed JSON (" + e.what() + ")");
        }
        if (!j.is_object()) throw ParseError(where + "expected a JSON object");
        for (const char* field : {"id", "problem", "solution"}) {
            if (!j.contains(field)) throw ParseError(where + "missing field " + field);
            if (!j.at(field).is_string()) throw ParseError(where + "field " + field + " must be a string");
        }
        try {
            items.push_back({j.get<Demonstration>(), lineno});
        } catch (const json::exception& e) {
            throw ParseError(where + e.what());
        }
    }
    auto pool = build_pool(std::move(items), mode);
    pool.source_path = path;
    return pool;
}

std::string default_sidecar_path(const std::string& pool_path) { return pool_path + ".embeddings.json"; }

namespace {

std::optional<EmbeddingIndex> read_sidecar(const std::string& path, const DemonstrationPool& pool,
                                           const std::string& family) {
    if (!std::filesystem::exists(path)) return std::nullopt;
    try {
        const auto j = json::parse(read_file(path));
        if (j.value("content_hash", std::string{}) != pool.content_hash) return std::nullopt;
        if (j.value("embedder", std::string{}) != family) return std::nullopt;
        if (j.value("text_mode", std::string{}) != to_string(pool.text_mode)) return std::nullopt;
        auto rows = j.at("vectors").get<std::vector<Vector>>();
        if (rows.size() != pool.size()) return std::nullopt;
        return EmbeddingIndex{family, pool.text_mode, std::move(rows)};
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void write_sidecar(const std::string& path, const DemonstrationPool& pool, const EmbeddingIndex& idx) {
    json j{{"version", 1},
           {"content_hash", pool.content_hash},
           {"embedder", idx.family},
           {"text_mode", to_string(idx.text_mode)},
           {"dimension", idx.rows.empty() ? 0 : idx.rows.front().size()},
           {"vectors", idx.rows}};
    const std::string tmp = path + ".tmp";
    write_file(tmp, j.dump() + "\n");
    std::filesystem::rename(tmp, path);
}

}  // namespace

EmbedReport embed_pool(DemonstrationPool& pool, const Embedder& embedder,
                       const std::optional<std::string>& sidecar_path) {
    EmbedReport report;
    report.sidecar_path = sidecar_path.value_or("");
    const auto family = embedder.family();
    if (sidecar_path) {
        if (auto cached = read_sidecar(*sidecar_path, pool, family)) {
            pool.embeddings = std::move(*cached);
            report.cache_hit = true;
            report.rows = pool.size();
            return report;
        }
    }
    const auto texts = pool.index_texts();
    ++report.embedder_calls;
    auto rows = embedder.embed(texts);
    if (rows.size() != texts.size())
        throw Error("embedder returned " + std::to_string(rows.size()) + " vectors for " +
                    std::to_string(texts.size()) + " texts");
    EmbeddingIndex idx{family, pool.text_mode, std::move(rows)};
    if (sidecar_path) write_sidecar(*sidecar_path, pool, idx);
    pool.embeddings = std::move(idx);
    report.rows = pool.size();
    return report;
}

}  // namespace picl
