// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace picl {

struct ExtractedAnswer {
    std::optional<std::string> answer;
    std::optional<std::string> warning;
};

/// Contents of the last balanced \boxed{...}. When the last \boxed{ never
/// closes, no answer is returned and a warning is set.
ExtractedAnswer extract_boxed_answer(std::string_view text);

inline std::optional<std::string> extract_answer(std::string_view text) { return extract_boxed_answer(text).answer; }

/// Trim, collapse inner whitespace, strip enclosing '$' pairs. Idempotent.
std::string canonicalize_answer(std::string_view answer);

/// Reduces a multiple-choice answer such as "(B)", "B.", "\text{B}" or
/// "Option b" to a single uppercase letter; other text is canonicalized
/// as usual.
std::string canonicalize_choice(std::string_view answer);

}  // namespace picl
