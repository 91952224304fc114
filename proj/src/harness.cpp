// SPDX-License-Identifier: Apache-2.0

#include "harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "answer.hpp"
#include "text.hpp"
#include "uncertainty.hpp"

namespace picl {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Dataset load_dataset(const std::string& path) {
    Dataset ds;
    ds.name = std::filesystem::path(path).stem().string();
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto where = path + ": line " + std::to_string(lineno) + ": ";
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(where + "malformed JSON (" + e.what() + ")");
        }
        if (!j.is_object()) throw ParseError(where + "expected a JSON object");
        Query q;
        try {
            if (!j.contains("id")) throw ParseError(where + "missing field id");
            q.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
            if (j.contains("question")) q.text = j.at("question").get<std::string>();
            else if (j.contains("problem")) q.text = j.at("problem").get<std::string>();
            else throw ParseError(where + "missing field question");
            if (!j.contains("answer")) throw ParseError(where + "missing field answer");
            q.gold_answer = j.at("answer").is_string() ? j.at("answer").get<std::string>() : j.at("answer").dump();
        } catch (const json::exception& e) {
            throw ParseError(where + e.what());
        }
        if (j.contains("choices")) ds.answer_format = AnswerFormat::choice;
        ds.items.push_back(std::move(q));
    }
    check_items(ds);
    return ds;
}

void validate_dataset(const Dataset& dataset) {
    if (dataset.items.empty()) throw ParseError("dataset '" + dataset.name + "' is empty");
    check_items(dataset);
}

void check_items(const Dataset& dataset) {
    std::set<std::string> ids;
    for (const auto& q : dataset.items) {
        if (trim(q.id).empty()) throw ParseError("dataset item with empty id");
        if (!ids.insert(q.id).second) throw ParseError("duplicate dataset id '" + q.id + "'");
        if (trim(q.text).empty()) throw ParseError("dataset item '" + q.id + "' has empty text");
        if (!q.gold_answer) throw ParseError("dataset item '" + q.id + "' has no gold answer");
    }
}

bool answers_match(const std::optional<std::string>& extracted, const std::string& gold, AnswerFormat format) {
    if (!extracted) return false;
    if (format == AnswerFormat::choice) return canonicalize_choice(*extracted) == canonicalize_choice(gold);
    return canonicalize_answer(*extracted) == canonicalize_answer(gold);
}

ItemRecord record_from_transcript(const GenerationTranscript& t, const Query& q, int sample, AnswerFormat format) {
    ItemRecord r;
    r.query_id = q.id;
    r.mode = t.mode;
    r.sample = sample;
    r.extracted = t.extracted_answer;
    r.gold = q.gold_answer.value_or("");
    r.failed = t.failed;
    r.correct = !t.failed && answers_match(t.extracted_answer, r.gold, format);
    r.generated_tokens = t.token_counts.generated;
    r.inserted_tokens = t.token_counts.inserted;
    r.interventions = t.interventions.size();
    for (const auto& s : t.segments)
        if (std::holds_alternative<InsertedDemos>(s)) ++r.insertions;
    if (t.failed && !t.warnings.empty()) r.error = t.warnings.front();
    return r;
}

std::vector<ModeSummary> summarize(const std::vector<ItemRecord>& items, const std::vector<std::string>& mode_order) {
    std::vector<ModeSummary> out;
    for (const auto& mode : mode_order) {
        ModeSummary s;
        s.mode = mode;
        for (const auto& r : items) {
            if (r.mode != mode) continue;
            ++s.items;
            if (r.correct) ++s.correct;
            if (r.failed) ++s.failures;
            s.generated_tokens += r.generated_tokens;
            s.inserted_tokens += r.inserted_tokens;
        }
        s.accuracy = ratio(s.correct, s.items);
        s.avg_generated_tokens = ratio(s.generated_tokens, s.items);
        s.avg_inserted_tokens = ratio(s.inserted_tokens, s.items);
        s.avg_total_tokens = ratio(s.generated_tokens + s.inserted_tokens, s.items);
        out.push_back(s);
    }
    return out;
}

std::size_t EvalReport::failures() const {
    std::size_t n = 0;
    for (const auto& m : modes) n += m.failures;
    return n;
}

const ModeSummary* EvalReport::summary(const std::string& mode) const {
    for (const auto& m : modes)
        if (m.mode == mode) return &m;
    return nullptr;
}

EvalReport evaluate(const Engine& engine, const EngineConfig& config, const Dataset& dataset,
                    const std::vector<RunMode>& modes, int workers) {
    validate_dataset(dataset);
    validate_config(config);
    if (modes.empty()) throw std::invalid_argument("no modes to evaluate");

    struct Task {
        std::size_t item;
        std::size_t mode;
        int sample;
    };
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < dataset.items.size(); ++i)
        for (std::size_t m = 0; m < modes.size(); ++m)
            for (int s = 0; s < config.samples; ++s) tasks.push_back({i, m, s});

    std::vector<GenerationTranscript> transcripts(tasks.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t t = next++; t < tasks.size(); t = next++) {
            const auto& task = tasks[t];
            const auto& q = dataset.items[task.item];
            const auto ctx = engine.context(config, config.seed + static_cast<std::uint64_t>(task.sample));
            try {
                transcripts[t] = run_query(ctx, q, modes[task.mode]);
            } catch (const std::exception& e) {
                GenerationTranscript failed;
                failed.query_id = q.id;
                failed.mode = to_string(modes[task.mode]);
                failed.failed = true;
                failed.warnings.push_back(e.what());
                failed.token_counts.inserted_method = inserted_count_method(config.inserted_token_ratio);
                transcripts[t] = std::move(failed);
            }
        }
    };
    const auto n_workers = static_cast<std::size_t>(std::clamp(workers, 1, 256));
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < std::min(n_workers, tasks.size()); ++w) pool.emplace_back(work);
        work();
    }

    std::vector<std::size_t> order(tasks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ia = dataset.items[tasks[a].item].id;
        const auto& ib = dataset.items[tasks[b].item].id;
        if (ia != ib) return ia < ib;
        if (tasks[a].mode != tasks[b].mode) return tasks[a].mode < tasks[b].mode;
        return tasks[a].sample < tasks[b].sample;
    });

    EvalReport report;
    report.dataset = dataset.name;
    report.token_count_method = "generated: backend tokens; inserted: " +
                                inserted_count_method(config.inserted_token_ratio);
    for (auto i : order) {
        const auto& task = tasks[i];
        report.items.push_back(
            record_from_transcript(transcripts[i], dataset.items[task.item], task.sample, dataset.answer_format));
        report.transcripts.push_back(std::move(transcripts[i]));
    }
    std::vector<std::string> mode_names;
    for (auto m : modes) mode_names.push_back(to_string(m));
    report.modes = summarize(report.items, mode_names);
    return report;
}

json report_to_json(const EvalReport& report) {
    json modes = json::array();
    for (const auto& m : report.modes) {
        modes.push_back(json{{"mode", m.mode},
                             {"items", m.items},
                             {"correct", m.correct},
                             {"failures", m.failures},
                             {"accuracy", m.accuracy},
                             {"generated_tokens", m.generated_tokens},
                             {"inserted_tokens", m.inserted_tokens},
                             {"avg_generated_tokens", m.avg_generated_tokens},
                             {"avg_inserted_tokens", m.avg_inserted_tokens},
                             {"avg_total_tokens", m.avg_total_tokens}});
    }
    json items = json::array();
    for (const auto& r : report.items) {
        items.push_back(json{{"query_id", r.query_id},
                             {"mode", r.mode},
                             {"sample", r.sample},
                             {"extracted", r.extracted ? json(*r.extracted) : json(nullptr)},
                             {"gold", r.gold},
                             {"correct", r.correct},
                             {"failed", r.failed},
                             {"generated_tokens", r.generated_tokens},
                             {"inserted_tokens", r.inserted_tokens},
                             {"interventions", r.interventions},
                             {"insertions", r.insertions},
                             {"error", r.error}});
    }
    return json{{"dataset", report.dataset},
                {"token_count_method", report.token_count_method},
                {"failures", report.failures()},
                {"modes", modes},
                {"items", items}};
}

std::string report_items_csv(const EvalReport& report) {
    std::string out =
        "query_id,mode,sample,extracted,gold,correct,failed,generated_tokens,inserted_tokens,interventions,insertions\n";
    for (const auto& r : report.items) {
        out += csv_escape(r.query_id) + "," + r.mode + "," + std::to_string(r.sample) + "," +
               csv_escape(r.extracted.value_or("")) + "," + csv_escape(r.gold) + "," + (r.correct ? "1" : "0") + "," +
               (r.failed ? "1" : "0") + "," + std::to_string(r.generated_tokens) + "," +
               std::to_string(r.inserted_tokens) + "," + std::to_string(r.interventions) + "," +
               std::to_string(r.insertions) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------

SweepParameter parse_sweep_parameter(const std::string& s) {
    if (s == "r") return SweepParameter::r;
    if (s == "k") return SweepParameter::k;
    throw ParseError("sweep parameter must be r or k, got '" + s + "'");
}

SweepResult sweep(const Engine& engine, const Dataset& dataset, SweepParameter parameter, const std::vector<int>& values,
                  int workers) {
    if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
    if (std::set<int>(values.begin(), values.end()).size() != values.size())
        throw std::invalid_argument("sweep values must be distinct");
    SweepResult result;
    result.parameter = parameter;
    for (int v : values) {
        EngineConfig cfg = engine.config();
        cfg.mode = RunMode::picl;
        if (parameter == SweepParameter::r) cfg.max_interventions = v;
        else cfg.insertion_count = v;
        auto report = evaluate(engine, cfg, dataset, {RunMode::picl}, workers);
        const auto& s = report.modes.front();
        result.rows.push_back(
            SweepRow{v, s.accuracy, s.avg_total_tokens, s.avg_generated_tokens, s.avg_inserted_tokens});
        result.reports.push_back(std::move(report));
    }
    return result;
}

std::string sweep_to_csv(const SweepResult& result) {
    std::string out = std::string(result.parameter == SweepParameter::r ? "r" : "k") +
                      ",accuracy,avg_total_tokens,avg_generated_tokens,avg_inserted_tokens\n";
    for (const auto& row : result.rows) {
        out += std::to_string(row.value) + "," + format_double(row.accuracy) + "," +
               format_double(row.avg_total_tokens) + "," + format_double(row.avg_generated_tokens) + "," +
               format_double(row.avg_inserted_tokens) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------

EntropyExport export_entropy(const Engine& engine, const Dataset& dataset) {
    EntropyExport out;
    const auto& cfg = engine.config();
    for (const auto& q : dataset.items) {
        BackendRequest req;
        req.prompt = build_zero_shot_prompt(engine.templates(), q);
        req.temperature = cfg.temperature;
        req.top_p = cfg.top_p;
        req.max_tokens = cfg.max_tokens;
        req.want_logprobs = true;
        req.top_logprobs_n = cfg.top_logprobs;
        req.seed = cfg.seed;
        auto stream = engine.backend().stream_generate(req);
        std::string tail;
        std::size_t position = 0;
        while (auto ev = stream->next()) {
            tail += ev->text;
            const bool interrupt = detect_interrupt(*ev, cfg.interruption_tokens, tail).has_value();
            std::optional<EntropyResult> h;
            try {
                h = event_entropy(*ev);
            } catch (const std::invalid_argument& e) {
                out.warnings.push_back(q.id + " position " + std::to_string(position) + ": " + e.what());
            }
            if (h) {
                out.rows.push_back(EntropyRow{q.id, position, h->nats, h->buckets, h->truncated, ev->text, interrupt});
            } else {
                ++out.skipped;
            }
            ++position;
        }
    }
    if (out.rows.empty() && out.skipped > 0)
        out.warnings.insert(out.warnings.begin(), "backend returned no token distributions; no entropy recorded");
    else if (out.skipped > 0)
        out.warnings.push_back(std::to_string(out.skipped) + " steps had no distribution and were skipped");
    return out;
}

std::string entropy_to_csv(const EntropyExport& e) {
    std::string out;
    if (e.rows.empty())
        for (const auto& w : e.warnings) out += "# warning: " + w + "\n";
    out += "query_id,position,entropy_nats,support_size,truncated,token_text,is_interrupt\n";
    for (const auto& r : e.rows) {
        out += csv_escape(r.query_id) + "," + std::to_string(r.position) + "," + format_double(r.entropy_nats) + "," +
               std::to_string(r.support_size) + "," + (r.truncated ? "1" : "0") + "," + csv_escape(r.token_text) +
               "," + (r.is_interrupt ? "1" : "0") + "\n";
    }
    return out;
}

}  // namespace picl
