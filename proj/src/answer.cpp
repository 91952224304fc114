// SPDX-License-Identifier: Apache-2.0

#include "answer.hpp"

#include <cctype>

#include "text.hpp"

namespace picl {

ExtractedAnswer extract_boxed_answer(std::string_view text) {
    static constexpr std::string_view marker = "\\boxed{";
    const auto at = text.rfind(marker);
    if (at == std::string_view::npos) return {};
    const std::size_t open = at + marker.size() - 1;
    int depth = 0;
    for (std::size_t i = open; i < text.size(); ++i) {
        if (text[i] == '{') {
            ++depth;
        } else if (text[i] == '}' && --depth == 0) {
            return {std::string(text.substr(open + 1, i - open - 1)), std::nullopt};
        }
    }
    return {std::nullopt, "unbalanced braces after the last \\boxed{"};
}

std::string canonicalize_answer(std::string_view answer) {
    std::string s = collapse_whitespace(answer);
    while (s.size() >= 2 && s.front() == '$' && s.back() == '$') s = collapse_whitespace(s.substr(1, s.size() - 2));
    return s;
}

std::string canonicalize_choice(std::string_view answer) {
    std::string s = canonicalize_answer(answer);
    auto strip_wrapper = [&](std::string_view open, std::string_view close) {
        if (s.size() >= open.size() + close.size() && s.compare(0, open.size(), open) == 0 &&
            s.compare(s.size() - close.size(), close.size(), close) == 0) {
            s = trim(s.substr(open.size(), s.size() - open.size() - close.size()));
            return true;
        }
        return false;
    };
    bool changed = true;
    while (changed) {
        changed = strip_wrapper("\\text{", "}") || strip_wrapper("\\textbf{", "}") || strip_wrapper("(", ")") ||
                  strip_wrapper("[", "]");
        if (!s.empty() && (s.back() == '.' || s.back() == ':' || s.back() == ')')) {
            s.pop_back();
            s = trim(s);
            changed = true;
        }
    }
    const std::string lowered = to_lower(s);
    for (std::string_view prefix : {"option ", "answer ", "choice "}) {
        if (lowered.rfind(prefix, 0) == 0) {
            s = trim(s.substr(prefix.size()));
            break;
        }
    }
    if (s.size() == 1 && std::isalpha(static_cast<unsigned char>(s[0])))
        return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(s[0]))));
    return canonicalize_answer(s);
}

}  // namespace picl
