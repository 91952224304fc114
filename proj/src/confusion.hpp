// SPDX-License-Identifier: Apache-2.0

// Confusion gate: ask the model whether its partial reasoning shows
// confusion and pull the summary out of a `confusion{...}` block. Any
// failure along the way reads as "no confusion" so generation carries on.

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "backend.hpp"
#include "core.hpp"
#include "prompts.hpp"

namespace picl {

std::string build_detection_prompt(const PromptTemplates& templates, const Query& query,
                                   std::string_view partial_output);

struct DetectionResult {
    ConfusionSummary summary;
    std::string raw_response;
    std::optional<std::string> warning;
};

/// Total: never throws.
DetectionResult parse_detection_response(std::string_view text);

/// Contents of the first balanced `confusion{...}` block, if any.
std::optional<std::string> extract_confusion_block(std::string_view text);

DetectionResult detect_confusion(Backend& backend, const PromptTemplates& templates, const Query& query,
                                 std::string_view partial_output);

}  // namespace picl
