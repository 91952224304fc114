// SPDX-License-Identifier: Apache-2.0

// Domain types shared by every stage of the engine: queries, demonstrations,
// streamed tokens, confusion summaries and the transcript of one run.
// All of them are plain values; once built they are only read.

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace picl {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class RetrievalError : public Error {
public:
    using Error::Error;
};

class BackendError : public Error {
public:
    BackendError(const std::string& what, bool retryable, int attempts = 1)
        : Error(what), retryable_(retryable), attempts_(attempts) {}

    bool retryable() const noexcept { return retryable_; }
    int attempts() const noexcept { return attempts_; }

private:
    bool retryable_;
    int attempts_;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct Query {
    std::string id;
    std::string text;
    std::optional<std::string> gold_answer;

    bool operator==(const Query&) const = default;
};

struct Demonstration {
    std::string id;
    std::string problem;
    std::string solution;
    std::optional<std::vector<double>> embedding;

    bool operator==(const Demonstration&) const = default;
};

struct Alternative {
    std::string text;
    double logprob = 0.0;

    bool operator==(const Alternative&) const = default;
};

/// One streamed token. `top_alternatives` is empty when the backend gave
/// no distribution for this step (degraded mode).
struct TokenEvent {
    std::string text;
    std::optional<double> logprob;
    std::vector<Alternative> top_alternatives;

    bool has_distribution() const noexcept { return !top_alternatives.empty(); }
    bool operator==(const TokenEvent&) const = default;
};

/// Checks the TokenEvent invariants: logprobs <= 0, alternatives sorted
/// descending, sampled token present. Returns a description of the first
/// violation, or nullopt.
std::optional<std::string> check_token_event(const TokenEvent& event);

struct ConfusionSummary {
    std::string text;

    bool empty() const noexcept;
    bool operator==(const ConfusionSummary&) const = default;
};

struct InterventionRecord {
    std::size_t position = 0;
    std::string trigger_token;
    std::optional<double> entropy;
    ConfusionSummary summary;
    std::vector<std::string> inserted_demo_ids;
    std::string raw_response;
    std::vector<std::string> warnings;

    bool operator==(const InterventionRecord&) const = default;
};

struct GeneratedText {
    std::string text;
    bool operator==(const GeneratedText&) const = default;
};

struct InsertedDemos {
    std::vector<std::string> demo_ids;
    std::string text;
    bool operator==(const InsertedDemos&) const = default;
};

using Segment = std::variant<GeneratedText, InsertedDemos>;

const std::string& segment_text(const Segment& segment);

struct TokenCounts {
    std::size_t generated = 0;
    std::size_t inserted = 0;
    std::string inserted_method;

    bool operator==(const TokenCounts&) const = default;
};

struct GenerationTranscript {
    std::string query_id;
    std::string mode;
    std::vector<Segment> segments;
    std::vector<InterventionRecord> interventions;
    std::string final_text;
    std::optional<std::string> extracted_answer;
    TokenCounts token_counts;
    bool failed = false;
    std::vector<std::string> warnings;

    /// Concatenation of every segment's text; equals final_text for any
    /// transcript produced by the controller.
    std::string render() const;

    bool operator==(const GenerationTranscript&) const = default;
};

// ---------------------------------------------------------------------------
// JSON forms
// ---------------------------------------------------------------------------

void to_json(json& j, const Query& q);
void from_json(const json& j, Query& q);
void to_json(json& j, const Demonstration& d);
void from_json(const json& j, Demonstration& d);
void to_json(json& j, const Alternative& a);
void from_json(const json& j, Alternative& a);
void to_json(json& j, const TokenEvent& e);
void from_json(const json& j, TokenEvent& e);
void to_json(json& j, const ConfusionSummary& c);
void from_json(const json& j, ConfusionSummary& c);
void to_json(json& j, const InterventionRecord& r);
void from_json(const json& j, InterventionRecord& r);
void to_json(json& j, const Segment& s);
void from_json(const json& j, Segment& s);
void to_json(json& j, const TokenCounts& c);
void from_json(const json& j, TokenCounts& c);
void to_json(json& j, const GenerationTranscript& t);
void from_json(const json& j, GenerationTranscript& t);

/// Pretty-printed transcript JSON, stable key order, trailing newline.
std::string transcript_to_string(const GenerationTranscript& t);

}  // namespace picl
