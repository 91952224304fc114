// SPDX-License-Identifier: Apache-2.0

#include "picl/picl.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "config.hpp"
#include "engine.hpp"
#include "harness.hpp"

struct picl_engine {
    std::unique_ptr<picl::Engine> engine;
};

namespace {

thread_local std::string g_last_error;

picl_result_t fail(picl_result_t code, std::string message) {
    g_last_error = std::move(message);
    return code;
}

char* dup_string(const std::string& s) {
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

void put(char** out, const std::string& s) {
    if (out) *out = dup_string(s);
}

picl::EngineConfig config_from(const char* config_json) {
    if (!config_json || !*config_json) return {};
    return picl::merge_config(picl::EngineConfig{}, picl::json::parse(config_json));
}

picl::json embed_report_json(const picl::EmbedReport& r, std::size_t demos) {
    return picl::json{{"demos", demos},
                      {"cache_hit", r.cache_hit},
                      {"embedder_calls", r.embedder_calls},
                      {"sidecar", r.sidecar_path}};
}

/// Runs `body`, mapping exceptions to result codes.
template <typename F>
picl_result_t guarded(F&& body) {
    g_last_error.clear();
    try {
        return body();
    } catch (const picl::ConfigValidationError& e) {
        return fail(PICL_ERR_INVALID_CONFIG, e.what());
    } catch (const picl::ParseError& e) {
        return fail(PICL_ERR_PARSE, e.what());
    } catch (const picl::IoError& e) {
        return fail(PICL_ERR_IO, e.what());
    } catch (const picl::BackendError& e) {
        return fail(PICL_ERR_BACKEND, e.what());
    } catch (const picl::RetrievalError& e) {
        return fail(PICL_ERR_RETRIEVAL, e.what());
    } catch (const picl::json::exception& e) {
        return fail(PICL_ERR_PARSE, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(PICL_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::exception& e) {
        return fail(PICL_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(PICL_ERR_INTERNAL, "unknown error");
    }
}

}  // namespace

extern "C" {

const char* picl_version(void) { return "0.1.0"; }

const char* picl_result_string(picl_result_t result) {
    switch (result) {
        case PICL_OK: return "ok";
        case PICL_ERR_NULL_POINTER: return "null pointer";
        case PICL_ERR_INVALID_ARGUMENT: return "invalid argument";
        case PICL_ERR_INVALID_CONFIG: return "invalid configuration";
        case PICL_ERR_IO: return "i/o error";
        case PICL_ERR_PARSE: return "parse error";
        case PICL_ERR_BACKEND: return "backend error";
        case PICL_ERR_RETRIEVAL: return "retrieval error";
        case PICL_ERR_RUN_FAILED: return "run failed";
        case PICL_ERR_INTERNAL: return "internal error";
    }
    return "unknown result";
}

const char* picl_last_error(void) { return g_last_error.c_str(); }

void picl_string_free(char* s) { std::free(s); }

picl_result_t picl_config_default(char** out_json) {
    if (!out_json) return fail(PICL_ERR_NULL_POINTER, "out_json is null");
    return guarded([&] {
        *out_json = dup_string(picl::json(picl::EngineConfig{}).dump(2));
        return PICL_OK;
    });
}

picl_result_t picl_config_validate(const char* config_json, char** errors_json) {
    return guarded([&] {
        const auto errors = picl::check_config(config_from(config_json));
        picl::json arr = picl::json::array();
        for (const auto& e : errors) arr.push_back({{"field", e.field}, {"constraint", e.constraint}});
        put(errors_json, arr.dump());
        if (errors.empty()) return PICL_OK;
        std::string msg;
        for (const auto& e : errors) msg += (msg.empty() ? "" : "; ") + e.message();
        return fail(PICL_ERR_INVALID_CONFIG, msg);
    });
}

picl_result_t picl_engine_create(const char* config_json, picl_engine_t** out) {
    if (!out) return fail(PICL_ERR_NULL_POINTER, "out is null");
    *out = nullptr;
    return guarded([&] {
        auto handle = std::make_unique<picl_engine>();
        handle->engine = std::make_unique<picl::Engine>(config_from(config_json));
        *out = handle.release();
        return PICL_OK;
    });
}

void picl_engine_destroy(picl_engine_t* engine) { delete engine; }

picl_result_t picl_engine_load_pool(picl_engine_t* engine, const char* path, char** report_json) {
    if (!engine || !path) return fail(PICL_ERR_NULL_POINTER, "engine or path is null");
    return guarded([&] {
        const auto report = engine->engine->load_pool(path);
        put(report_json, embed_report_json(report, engine->engine->pool()->size()).dump());
        return PICL_OK;
    });
}

picl_result_t picl_engine_run(picl_engine_t* engine, const char* query_json, char** transcript_json) {
    if (!engine || !query_json) return fail(PICL_ERR_NULL_POINTER, "engine or query is null");
    return guarded([&] {
        const auto j = picl::json::parse(query_json);
        picl::Query q;
        q.id = j.value("id", std::string("query"));
        if (j.contains("question")) q.text = j.at("question").get<std::string>();
        else if (j.contains("problem")) q.text = j.at("problem").get<std::string>();
        else if (j.contains("text")) q.text = j.at("text").get<std::string>();
        else throw std::invalid_argument("query needs a \"question\" field");
        if (j.contains("answer")) q.gold_answer = j.at("answer").get<std::string>();
        const auto t = engine->engine->run(q);
        put(transcript_json, picl::transcript_to_string(t));
        if (t.failed) return fail(PICL_ERR_RUN_FAILED, t.warnings.empty() ? "run failed" : t.warnings.front());
        return PICL_OK;
    });
}

picl_result_t picl_engine_evaluate(picl_engine_t* engine, const char* dataset_path, const char* options_json,
                                   char** out_json) {
    if (!engine || !dataset_path) return fail(PICL_ERR_NULL_POINTER, "engine or dataset path is null");
    return guarded([&] {
        const auto& cfg = engine->engine->config();
        std::vector<picl::RunMode> modes{cfg.mode};
        int workers = 1;
        if (options_json && *options_json) {
            const auto opts = picl::json::parse(options_json);
            if (opts.contains("modes")) {
                modes.clear();
                for (const auto& m : opts.at("modes")) modes.push_back(picl::parse_run_mode(m.get<std::string>()));
            }
            workers = opts.value("workers", 1);
        }
        const auto dataset = picl::load_dataset(dataset_path);
        const auto report = picl::evaluate(*engine->engine, cfg, dataset, modes, workers);
        picl::json transcripts = picl::json::array();
        for (const auto& t : report.transcripts) transcripts.push_back(t);
        put(out_json, picl::json{{"report", picl::report_to_json(report)},
                                 {"items_csv", picl::report_items_csv(report)},
                                 {"transcripts", transcripts}}
                          .dump());
        return PICL_OK;
    });
}

picl_result_t picl_engine_sweep(picl_engine_t* engine, const char* dataset_path, const char* parameter,
                                const int* values, size_t n_values, int workers, char** csv_out,
                                char** reports_json) {
    if (!engine || !dataset_path || !parameter || (!values && n_values > 0))
        return fail(PICL_ERR_NULL_POINTER, "null argument");
    return guarded([&] {
        const auto param = picl::parse_sweep_parameter(parameter);
        const std::vector<int> vals(values, values + n_values);
        const auto dataset = picl::load_dataset(dataset_path);
        const auto result = picl::sweep(*engine->engine, dataset, param, vals, workers);
        put(csv_out, picl::sweep_to_csv(result));
        if (reports_json) {
            picl::json arr = picl::json::array();
            for (std::size_t i = 0; i < result.reports.size(); ++i)
                arr.push_back({{"value", result.rows[i].value}, {"report", picl::report_to_json(result.reports[i])}});
            *reports_json = dup_string(arr.dump());
        }
        return PICL_OK;
    });
}

picl_result_t picl_engine_export_entropy(picl_engine_t* engine, const char* dataset_path, char** csv_out,
                                         size_t* rows) {
    if (!engine || !dataset_path) return fail(PICL_ERR_NULL_POINTER, "engine or dataset path is null");
    return guarded([&] {
        const auto dataset = picl::load_dataset(dataset_path);
        const auto exported = picl::export_entropy(*engine->engine, dataset);
        put(csv_out, picl::entropy_to_csv(exported));
        if (rows) *rows = exported.rows.size();
        if (!exported.warnings.empty()) g_last_error = exported.warnings.front();
        return PICL_OK;
    });
}

picl_result_t picl_pool_embed(const char* config_json, const char* pool_path, char** report_json) {
    if (!pool_path) return fail(PICL_ERR_NULL_POINTER, "pool path is null");
    return guarded([&] {
        const auto cfg = picl::validate_config(config_from(config_json));
        auto pool = picl::load_pool(pool_path, cfg.text_mode);
        const auto embedder = picl::make_embedder(cfg.embedder, pool);
        const auto report = picl::embed_pool(pool, *embedder, picl::default_sidecar_path(pool_path));
        put(report_json, embed_report_json(report, pool.size()).dump());
        return PICL_OK;
    });
}

}  // extern "C"
