// SPDX-License-Identifier: Apache-2.0

// Evaluation pipeline: datasets, parallel (item x mode) runs, exact-match
// scoring, token accounting, r/k sweeps and entropy export.

#pragma once

#include <string>
#include <vector>

#include "config.hpp"
#include "core.hpp"
#include "engine.hpp"

namespace picl {

enum class AnswerFormat { exact, choice };

struct Dataset {
    std::string name;
    std::vector<Query> items;
    AnswerFormat answer_format = AnswerFormat::exact;
};

/// JSONL, one {"id", "question", "answer"} per line ("problem" is accepted
/// for "question"). Any line with a "choices" field switches the dataset
/// to single-letter answers. An empty file gives an empty dataset.
Dataset load_dataset(const std::string& path);

/// Unique non-empty ids, non-empty text and gold answers.
void check_items(const Dataset& dataset);

/// check_items plus at least one item; evaluation requires this.
void validate_dataset(const Dataset& dataset);

bool answers_match(const std::optional<std::string>& extracted, const std::string& gold, AnswerFormat format);

struct ItemRecord {
    std::string query_id;
    std::string mode;
    int sample = 0;
    std::optional<std::string> extracted;
    std::string gold;
    bool correct = false;
    bool failed = false;
    std::size_t generated_tokens = 0;
    std::size_t inserted_tokens = 0;
    std::size_t interventions = 0;
    std::size_t insertions = 0;
    std::string error;

    bool operator==(const ItemRecord&) const = default;
};

struct ModeSummary {
    std::string mode;
    std::size_t items = 0;
    std::size_t correct = 0;
    std::size_t failures = 0;
    double accuracy = 0.0;
    std::size_t generated_tokens = 0;
    std::size_t inserted_tokens = 0;
    double avg_generated_tokens = 0.0;
    double avg_inserted_tokens = 0.0;
    double avg_total_tokens = 0.0;

    bool operator==(const ModeSummary&) const = default;
};

struct EvalReport {
    std::string dataset;
    std::string token_count_method;
    std::vector<ModeSummary> modes;
    std::vector<ItemRecord> items;                  // sorted by (query id, mode order, sample)
    std::vector<GenerationTranscript> transcripts;  // aligned with items

    std::size_t failures() const;
    const ModeSummary* summary(const std::string& mode) const;
};

ItemRecord record_from_transcript(const GenerationTranscript& t, const Query& q, int sample, AnswerFormat format);

/// Per-mode aggregates from per-item records, in `mode_order`.
std::vector<ModeSummary> summarize(const std::vector<ItemRecord>& items, const std::vector<std::string>& mode_order);

/// Runs every (item, mode, sample) with up to `workers` threads. The result
/// does not depend on the worker count.
EvalReport evaluate(const Engine& engine, const EngineConfig& config, const Dataset& dataset,
                    const std::vector<RunMode>& modes, int workers);

json report_to_json(const EvalReport& report);
std::string report_items_csv(const EvalReport& report);

enum class SweepParameter { r, k };
SweepParameter parse_sweep_parameter(const std::string& s);

struct SweepRow {
    int value = 0;
    double accuracy = 0.0;
    double avg_total_tokens = 0.0;
    double avg_generated_tokens = 0.0;
    double avg_inserted_tokens = 0.0;

    bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
    SweepParameter parameter = SweepParameter::r;
    std::vector<SweepRow> rows;
    std::vector<EvalReport> reports;
};

/// One PICL evaluation per value with everything else fixed. Rejects an
/// empty or repeated value list.
SweepResult sweep(const Engine& engine, const Dataset& dataset, SweepParameter parameter, const std::vector<int>& values,
                  int workers);

std::string sweep_to_csv(const SweepResult& result);

struct EntropyRow {
    std::string query_id;
    std::size_t position = 0;
    double entropy_nats = 0.0;
    std::size_t support_size = 0;
    bool truncated = false;
    std::string token_text;
    bool is_interrupt = false;
};

struct EntropyExport {
    std::vector<EntropyRow> rows;
    std::size_t skipped = 0;  // events without a distribution
    std::vector<std::string> warnings;
};

/// Streams each item once with the zero-shot prompt and records entropy
/// for every step that has a distribution.
EntropyExport export_entropy(const Engine& engine, const Dataset& dataset);
std::string entropy_to_csv(const EntropyExport& e);

}  // namespace picl
