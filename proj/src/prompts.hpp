// SPDX-License-Identifier: Apache-2.0

// Prompt templates and demonstration rendering. The default templates are
// the files under assets/prompts, compiled in; a config may point at
// replacement files.

#pragma once

#include <span>
#include <string>

#include "config.hpp"
#include "core.hpp"

namespace picl {

/// Marker line prefix for each demonstration and its trailer.
inline constexpr const char* k_problem_label = "Problem: ";
inline constexpr const char* k_solution_label = "Solution: ";
inline constexpr const char* k_insert_open = "\nRelevant example:\n";
inline constexpr const char* k_insert_close = "End of example.\n";
/// Placed after each demonstration in a static prompt.
inline constexpr const char* k_static_joiner = "\n";

struct PromptTemplates {
    std::string zero_shot;  // {{QUERY}}
    std::string few_shot;   // {{DEMOS}} {{QUERY}}
    std::string detection;  // {{QUERY}} {{PARTIAL}}

    static PromptTemplates builtin();
    /// Built-ins overridden by any file paths set in the config.
    static PromptTemplates from_config(const PromptSettings& settings);
};

/// "Problem: <x>\nSolution: <y>\n"
std::string render_demonstration(const Demonstration& demo);

/// The block spliced into a live generation for the given demonstrations.
std::string render_insertion(std::span<const Demonstration* const> demos);

std::string build_zero_shot_prompt(const PromptTemplates& t, const Query& q);

/// Demonstrations in selection order, each followed by the static joiner,
/// then the query.
std::string build_static_prompt(const PromptTemplates& t, std::span<const Demonstration* const> demos,
                                const Query& q);

}  // namespace picl
