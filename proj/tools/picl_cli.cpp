// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the engine only through the C API.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "picl/picl.h"

namespace {

using nlohmann::json;

/// Owns a string handed out by the C API.
struct CString {
    char* p = nullptr;
    ~CString() { picl_string_free(p); }
    std::string str() const { return p ? std::string(p) : std::string(); }
};

struct EngineHandle {
    picl_engine_t* p = nullptr;
    ~EngineHandle() { picl_engine_destroy(p); }
};

struct CommonOptions {
    std::string config_path;
    std::optional<std::string> mode;
    std::optional<std::string> selector;
    std::optional<int> r, k, n, shots, samples, max_tokens;
    std::optional<std::uint64_t> seed;
    std::optional<double> temperature, top_p, entropy_threshold;
    std::optional<std::string> mock_script, backend_url, model;
    std::vector<std::string> interrupt_words;
    std::string pool;
};

int report_error(picl_result_t rc) {
    std::fprintf(stderr, "error: %s: %s\n", picl_result_string(rc), picl_last_error());
    switch (rc) {
        case PICL_ERR_INVALID_ARGUMENT:
        case PICL_ERR_INVALID_CONFIG:
        case PICL_ERR_PARSE: return 2;
        default: return 1;
    }
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return json::parse(in);
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--mode", o.mode, "zero | static | picl");
    cmd->add_option("--selector", o.selector, "Static demonstration selector: random | similarity | bm25");
    cmd->add_option("--r", o.r, "Maximum interventions per generation");
    cmd->add_option("--k", o.k, "Demonstrations inserted per intervention");
    cmd->add_option("--n", o.n, "Retrieval candidates before reranking");
    cmd->add_option("--shots", o.shots, "Demonstrations in the static prompt");
    cmd->add_option("--seed", o.seed, "Sampling seed");
    cmd->add_option("--samples", o.samples, "Samples per item");
    cmd->add_option("--temperature", o.temperature);
    cmd->add_option("--top-p", o.top_p);
    cmd->add_option("--max-tokens", o.max_tokens);
    cmd->add_option("--entropy-threshold", o.entropy_threshold, "Only interrupt above this entropy (nats)");
    cmd->add_option("--interrupt-words", o.interrupt_words, "Interruption vocabulary")->delimiter(',');
    cmd->add_option("--mock-script", o.mock_script, "Use the scripted mock backend");
    cmd->add_option("--backend-url", o.backend_url, "OpenAI-compatible base URL, e.g. http://localhost:8000/v1");
    cmd->add_option("--model", o.model);
    cmd->add_option("--pool", o.pool, "Demonstration pool (JSONL)");
}

json build_config(const CommonOptions& o) {
    json cfg = o.config_path.empty() ? json::object() : read_json_file(o.config_path);
    json patch = json::object();
    if (o.mode) patch["mode"] = *o.mode;
    if (o.selector) patch["selector"] = *o.selector;
    if (o.r) patch["max_interventions"] = *o.r;
    if (o.k) patch["insertion_count"] = *o.k;
    if (o.n) patch["retrieval_candidates"] = *o.n;
    if (o.shots) patch["static_shot_count"] = *o.shots;
    if (o.seed) patch["seed"] = *o.seed;
    if (o.samples) patch["samples"] = *o.samples;
    if (o.temperature) patch["temperature"] = *o.temperature;
    if (o.top_p) patch["top_p"] = *o.top_p;
    if (o.max_tokens) patch["max_tokens"] = *o.max_tokens;
    if (o.entropy_threshold) patch["entropy_threshold"] = *o.entropy_threshold;
    if (!o.interrupt_words.empty()) patch["interruption_tokens"] = o.interrupt_words;
    if (o.mock_script) {
        patch["backend"]["kind"] = "mock";
        patch["backend"]["mock_script"] = *o.mock_script;
    }
    if (o.backend_url) {
        patch["backend"]["kind"] = "openai";
        patch["backend"]["url"] = *o.backend_url;
    }
    if (o.model) patch["backend"]["model"] = *o.model;
    cfg.merge_patch(patch);
    return cfg;
}

/// Creates the engine and loads the pool when one is given.
int open_engine(const CommonOptions& o, EngineHandle& engine, bool need_pool) {
    const auto cfg = build_config(o).dump();
    if (auto rc = picl_engine_create(cfg.c_str(), &engine.p); rc != PICL_OK) return report_error(rc);
    if (!o.pool.empty()) {
        CString report;
        if (auto rc = picl_engine_load_pool(engine.p, o.pool.c_str(), &report.p); rc != PICL_OK)
            return report_error(rc);
    } else if (need_pool) {
        std::fprintf(stderr, "warning: no --pool given; insertion and static modes have no demonstrations\n");
    }
    return 0;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const int v = std::stoi(item, &used);
        if (used != item.size()) throw CLI::ValidationError("--values", "not an integer: " + item);
        out.push_back(v);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Proactive in-context demonstration insertion for reasoning models"};
    app.set_version_flag("--version", std::string(picl_version()));
    app.require_subcommand(1);

    CommonOptions run_opts, eval_opts, sweep_opts, entropy_opts;

    auto* run = app.add_subcommand("run", "Generate a solution for one problem");
    add_common(run, run_opts);
    std::string question, question_file, query_id = "query", transcript_out;
    run->add_option("--question", question, "Problem text");
    run->add_option("--question-file", question_file, "File holding the problem text")->check(CLI::ExistingFile);
    run->add_option("--id", query_id);
    run->add_option("--out", transcript_out, "Transcript JSON (default: stdout)");

    auto* ev = app.add_subcommand("eval", "Evaluate a dataset in one or more modes");
    add_common(ev, eval_opts);
    std::string dataset, report_out, csv_out, transcripts_dir;
    std::vector<std::string> modes;
    int workers = 1;
    bool strict = false;
    ev->add_option("--dataset", dataset, "JSONL dataset")->required()->check(CLI::ExistingFile);
    ev->add_option("--modes", modes, "Modes to compare (default: --mode or config)")->delimiter(',');
    ev->add_option("--workers", workers)->check(CLI::PositiveNumber);
    ev->add_option("--out,--report", report_out, "Report JSON (default: stdout)");
    ev->add_option("--csv", csv_out, "Per-item CSV");
    ev->add_option("--transcripts", transcripts_dir, "Directory for per-item transcripts");
    ev->add_flag("--strict", strict, "Exit non-zero when any item failed");

    auto* sw = app.add_subcommand("sweep", "Vary r or k with everything else fixed");
    add_common(sw, sweep_opts);
    std::string sweep_dataset, param, values_text, sweep_out, sweep_reports;
    int sweep_workers = 1;
    sw->add_option("--dataset", sweep_dataset)->required()->check(CLI::ExistingFile);
    sw->add_option("--param", param, "r | k")->required()->check(CLI::IsMember({"r", "k"}));
    sw->add_option("--values", values_text, "Comma-separated values, e.g. 1,2,3,4")->required();
    sw->add_option("--workers", sweep_workers)->check(CLI::PositiveNumber);
    sw->add_option("--out", sweep_out, "CSV table (default: stdout)");
    sw->add_option("--report", sweep_reports, "Per-value reports as JSON");

    auto* en = app.add_subcommand("entropy", "Export per-token entropy of zero-shot generations");
    add_common(en, entropy_opts);
    std::string entropy_dataset, entropy_out;
    en->add_option("--dataset", entropy_dataset)->required()->check(CLI::ExistingFile);
    en->add_option("--out", entropy_out, "CSV (default: stdout)");

    auto* pool_cmd = app.add_subcommand("pool", "Demonstration pool utilities");
    pool_cmd->require_subcommand(1);
    auto* embed = pool_cmd->add_subcommand("embed", "Precompute the embedding cache for a pool");
    std::string embed_pool, embedder_kind = "lexical", embed_url, embed_model, embed_config;
    embed->add_option("--pool", embed_pool)->required()->check(CLI::ExistingFile);
    embed->add_option("--embedder", embedder_kind)->check(CLI::IsMember({"api", "lexical"}));
    embed->add_option("--embedder-url", embed_url, "Embedding endpoint (api embedder)");
    embed->add_option("--embedder-model", embed_model);
    embed->add_option("--config", embed_config)->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            if (question.empty() == question_file.empty()) {
                std::fprintf(stderr, "error: give exactly one of --question or --question-file\n");
                return 2;
            }
            if (!question_file.empty()) {
                std::ifstream in(question_file);
                question.assign(std::istreambuf_iterator<char>(in), {});
            }
            EngineHandle engine;
            if (int rc = open_engine(run_opts, engine, false)) return rc;
            const auto query = json{{"id", query_id}, {"question", question}}.dump();
            CString transcript;
            const auto rc = picl_engine_run(engine.p, query.c_str(), &transcript.p);
            if (transcript.p) write_text(transcript_out, transcript.str());
            if (rc != PICL_OK) return report_error(rc);
            return 0;
        }

        if (*ev) {
            EngineHandle engine;
            if (int rc = open_engine(eval_opts, engine, false)) return rc;
            json options{{"workers", workers}};
            if (!modes.empty()) options["modes"] = modes;
            CString out;
            const auto opts = options.dump();
            if (auto rc = picl_engine_evaluate(engine.p, dataset.c_str(), opts.c_str(), &out.p); rc != PICL_OK)
                return report_error(rc);
            const auto result = json::parse(out.str());
            write_text(report_out, result.at("report").dump(2) + "\n");
            if (!csv_out.empty()) write_text(csv_out, result.at("items_csv").get<std::string>());
            if (!transcripts_dir.empty()) {
                std::filesystem::create_directories(transcripts_dir);
                for (const auto& t : result.at("transcripts")) {
                    auto name = t.at("query_id").get<std::string>() + "." + t.at("mode").get<std::string>();
                    for (auto& c : name)
                        if (c == '/' || c == '\\') c = '_';
                    write_text((std::filesystem::path(transcripts_dir) / (name + ".json")).string(),
                               t.dump(2) + "\n");
                }
            }
            const auto failures = result.at("report").at("failures").get<std::size_t>();
            if (failures > 0) std::fprintf(stderr, "warning: %zu item(s) failed\n", failures);
            return strict && failures > 0 ? 3 : 0;
        }

        if (*sw) {
            EngineHandle engine;
            if (int rc = open_engine(sweep_opts, engine, true)) return rc;
            const auto values = parse_int_list(values_text);
            CString csv, reports;
            const auto rc = picl_engine_sweep(engine.p, sweep_dataset.c_str(), param.c_str(), values.data(),
                                              values.size(), sweep_workers, &csv.p,
                                              sweep_reports.empty() ? nullptr : &reports.p);
            if (rc != PICL_OK) return report_error(rc);
            write_text(sweep_out, csv.str());
            if (!sweep_reports.empty()) write_text(sweep_reports, json::parse(reports.str()).dump(2) + "\n");
            return 0;
        }

        if (*en) {
            EngineHandle engine;
            if (int rc = open_engine(entropy_opts, engine, false)) return rc;
            CString csv;
            std::size_t rows = 0;
            if (auto rc = picl_engine_export_entropy(engine.p, entropy_dataset.c_str(), &csv.p, &rows);
                rc != PICL_OK)
                return report_error(rc);
            if (*picl_last_error()) std::fprintf(stderr, "warning: %s\n", picl_last_error());
            write_text(entropy_out, csv.str());
            return 0;
        }

        if (*embed) {
            json cfg = embed_config.empty() ? json::object() : read_json_file(embed_config);
            cfg["embedder"]["kind"] = embedder_kind;
            if (!embed_url.empty()) cfg["embedder"]["url"] = embed_url;
            if (!embed_model.empty()) cfg["embedder"]["model"] = embed_model;
            CString report;
            const auto cfg_text = cfg.dump();
            if (auto rc = picl_pool_embed(cfg_text.c_str(), embed_pool.c_str(), &report.p); rc != PICL_OK)
                return report_error(rc);
            const auto r = json::parse(report.str());
            std::printf("%s: %zu demonstrations, %s, sidecar %s\n", embed_pool.c_str(),
                        r.at("demos").get<std::size_t>(),
                        r.at("cache_hit").get<bool>() ? "cache hit" : "embedded", r.at("sidecar").get<std::string>().c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
