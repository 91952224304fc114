// SPDX-License-Identifier: Apache-2.0

#include "confusion.hpp"

#include "text.hpp"

namespace picl {

std::string build_detection_prompt(const PromptTemplates& templates, const Query& query,
                                   std::string_view partial_output) {
    return fill_template(templates.detection, {{"QUERY", query.text}, {"PARTIAL", std::string(partial_output)}});
}

namespace {

enum class Verdict { yes, no, none };

Verdict first_verdict(std::string_view text) {
    const std::string lowered = to_lower(text);
    std::size_t i = 0;
    while (i < lowered.size()) {
        if (!is_word_char(lowered[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < lowered.size() && is_word_char(lowered[j])) ++j;
        const std::string_view word(lowered.data() + i, j - i);
        if (word == "yes") return Verdict::yes;
        if (word == "no") return Verdict::no;
        i = j;
    }
    return Verdict::none;
}

}  // namespace

std::optional<std::string> extract_confusion_block(std::string_view text) {
    const std::string lowered = to_lower(text);
    const std::string_view key = "confusion";
    std::size_t from = 0;
    while (true) {
        const auto at = lowered.find(key, from);
        if (at == std::string::npos) return std::nullopt;
        from = at + key.size();
        std::size_t open = from;
        while (open < text.size() && (text[open] == ' ' || text[open] == '\t')) ++open;
        if (open >= text.size() || text[open] != '{') continue;
        int depth = 0;
        for (std::size_t i = open; i < text.size(); ++i) {
            if (text[i] == '{') {
                ++depth;
            } else if (text[i] == '}' && --depth == 0) {
                return std::string(text.substr(open + 1, i - open - 1));
            }
        }
        return std::nullopt;
    }
}

DetectionResult parse_detection_response(std::string_view text) {
    DetectionResult out;
    out.raw_response = std::string(text);
    switch (first_verdict(text)) {
        case Verdict::no:
            return out;
        case Verdict::none:
            out.warning = "detection response has no Yes/No verdict";
            return out;
        case Verdict::yes:
            break;
    }
    const auto block = extract_confusion_block(text);
    if (!block || trim(*block).empty()) {
        out.warning = "detection answered Yes without a parseable confusion{...} block";
        return out;
    }
    out.summary.text = trim(*block);
    return out;
}

DetectionResult detect_confusion(Backend& backend, const PromptTemplates& templates, const Query& query,
                                 std::string_view partial_output) {
    const auto prompt = build_detection_prompt(templates, query, partial_output);
    try {
        return parse_detection_response(backend.complete(prompt, CompletionOptions{0.0, 1.0, 256}));
    } catch (const BackendError& e) {
        DetectionResult out;
        out.warning = std::string("detection backend error: ") + e.what();
        return out;
    }
}

}  // namespace picl
