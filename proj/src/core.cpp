// SPDX-License-Identifier: Apache-2.0

#include "core.hpp"

#include <algorithm>

#include "text.hpp"

namespace picl {

std::optional<std::string> check_token_event(const TokenEvent& event) {
    if (event.logprob && *event.logprob > 0.0) return "logprob must be <= 0";
    if (event.top_alternatives.empty()) return std::nullopt;
    bool found = false;
    for (std::size_t i = 0; i < event.top_alternatives.size(); ++i) {
        const auto& alt = event.top_alternatives[i];
        if (alt.logprob > 0.0) return "alternative logprob must be <= 0";
        if (i > 0 && alt.logprob > event.top_alternatives[i - 1].logprob)
            return "alternatives must be sorted by descending logprob";
        if (alt.text == event.text) found = true;
    }
    if (!found) return "sampled token missing from alternatives";
    return std::nullopt;
}

bool ConfusionSummary::empty() const noexcept { return trim(text).empty(); }

const std::string& segment_text(const Segment& segment) {
    return std::visit([](const auto& s) -> const std::string& { return s.text; }, segment);
}

std::string GenerationTranscript::render() const {
    std::string out;
    for (const auto& s : segments) out += segment_text(s);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
    if (v)
        j[key] = *v;
    else
        j[key] = nullptr;
}

}  // namespace

void to_json(json& j, const Query& q) {
    j = json{{"id", q.id}, {"text", q.text}};
    put_optional(j, "gold_answer", q.gold_answer);
}

void from_json(const json& j, Query& q) {
    q.id = j.at("id").get<std::string>();
    q.text = j.at("text").get<std::string>();
    q.gold_answer = optional_field<std::string>(j, "gold_answer");
}

void to_json(json& j, const Demonstration& d) {
    j = json{{"id", d.id}, {"problem", d.problem}, {"solution", d.solution}};
    if (d.embedding) j["embedding"] = *d.embedding;
}

void from_json(const json& j, Demonstration& d) {
    d.id = j.at("id").get<std::string>();
    d.problem = j.at("problem").get<std::string>();
    d.solution = j.at("solution").get<std::string>();
    d.embedding = optional_field<std::vector<double>>(j, "embedding");
}

void to_json(json& j, const Alternative& a) { j = json::array({a.text, a.logprob}); }

void from_json(const json& j, Alternative& a) {
    if (j.is_array()) {
        a.text = j.at(0).get<std::string>();
        a.logprob = j.at(1).get<double>();
    } else {
        a.text = j.at("text").get<std::string>();
        a.logprob = j.at("logprob").get<double>();
    }
}

void to_json(json& j, const TokenEvent& e) {
    j = json{{"text", e.text}, {"top_alternatives", e.top_alternatives}};
    put_optional(j, "logprob", e.logprob);
}

void from_json(const json& j, TokenEvent& e) {
    e.text = j.at("text").get<std::string>();
    e.logprob = optional_field<double>(j, "logprob");
    e.top_alternatives = j.value("top_alternatives", std::vector<Alternative>{});
}

void to_json(json& j, const ConfusionSummary& c) { j = c.text; }
void from_json(const json& j, ConfusionSummary& c) { c.text = j.get<std::string>(); }

void to_json(json& j, const InterventionRecord& r) {
    j = json{{"position", r.position},
             {"trigger_token", r.trigger_token},
             {"summary", r.summary},
             {"inserted_demo_ids", r.inserted_demo_ids},
             {"raw_response", r.raw_response},
             {"warnings", r.warnings}};
    put_optional(j, "entropy", r.entropy);
}

void from_json(const json& j, InterventionRecord& r) {
    r.position = j.at("position").get<std::size_t>();
    r.trigger_token = j.at("trigger_token").get<std::string>();
    r.entropy = optional_field<double>(j, "entropy");
    r.summary = j.at("summary").get<ConfusionSummary>();
    r.inserted_demo_ids = j.at("inserted_demo_ids").get<std::vector<std::string>>();
    r.raw_response = j.value("raw_response", std::string{});
    r.warnings = j.value("warnings", std::vector<std::string>{});
}

void to_json(json& j, const Segment& s) {
    if (const auto* g = std::get_if<GeneratedText>(&s)) {
        j = json{{"type", "generated"}, {"text", g->text}};
    } else {
        const auto& d = std::get<InsertedDemos>(s);
        j = json{{"type", "inserted_demos"}, {"demo_ids", d.demo_ids}, {"text", d.text}};
    }
}

void from_json(const json& j, Segment& s) {
    const auto type = j.at("type").get<std::string>();
    if (type == "generated") {
        s = GeneratedText{j.at("text").get<std::string>()};
    } else if (type == "inserted_demos") {
        s = InsertedDemos{j.at("demo_ids").get<std::vector<std::string>>(),
                          j.at("text").get<std::string>()};
    } else {
        throw ParseError("unknown segment type '" + type + "'");
    }
}

void to_json(json& j, const TokenCounts& c) {
    j = json{{"generated", c.generated}, {"inserted", c.inserted}, {"inserted_method", c.inserted_method}};
}

void from_json(const json& j, TokenCounts& c) {
    c.generated = j.at("generated").get<std::size_t>();
    c.inserted = j.at("inserted").get<std::size_t>();
    c.inserted_method = j.value("inserted_method", std::string{});
}

void to_json(json& j, const GenerationTranscript& t) {
    j = json{{"query_id", t.query_id},
             {"mode", t.mode},
             {"segments", t.segments},
             {"interventions", t.interventions},
             {"final_text", t.final_text},
             {"token_counts", t.token_counts},
             {"failed", t.failed},
             {"warnings", t.warnings}};
    put_optional(j, "extracted_answer", t.extracted_answer);
}

void from_json(const json& j, GenerationTranscript& t) {
    t.query_id = j.at("query_id").get<std::string>();
    t.mode = j.at("mode").get<std::string>();
    t.segments = j.at("segments").get<std::vector<Segment>>();
    t.interventions = j.at("interventions").get<std::vector<InterventionRecord>>();
    t.final_text = j.at("final_text").get<std::string>();
    t.extracted_answer = optional_field<std::string>(j, "extracted_answer");
    t.token_counts = j.at("token_counts").get<TokenCounts>();
    t.failed = j.value("failed", false);
    t.warnings = j.value("warnings", std::vector<std::string>{});
}

std::string transcript_to_string(const GenerationTranscript& t) {
    return json(t).dump(2) + "\n";
}

}  // namespace picl
