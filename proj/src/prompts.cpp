// SPDX-License-Identifier: Apache-2.0

#include "prompts.hpp"

#include "prompt_assets.hpp"
#include "text.hpp"

namespace picl {

PromptTemplates PromptTemplates::builtin() {
    return PromptTemplates{assets::k_zero_shot, assets::k_few_shot, assets::k_detection};
}

PromptTemplates PromptTemplates::from_config(const PromptSettings& settings) {
    auto t = builtin();
    if (!settings.zero_shot_path.empty()) t.zero_shot = read_file(settings.zero_shot_path);
    if (!settings.few_shot_path.empty()) t.few_shot = read_file(settings.few_shot_path);
    if (!settings.detection_path.empty()) t.detection = read_file(settings.detection_path);
    return t;
}

std::string render_demonstration(const Demonstration& demo) {
    return std::string(k_problem_label) + demo.problem + "\n" + k_solution_label + demo.solution + "\n";
}

std::string render_insertion(std::span<const Demonstration* const> demos) {
    std::string out;
    for (const auto* d : demos) out += k_insert_open + render_demonstration(*d) + k_insert_close;
    return out;
}

std::string build_zero_shot_prompt(const PromptTemplates& t, const Query& q) {
    return fill_template(t.zero_shot, {{"QUERY", q.text}});
}

std::string build_static_prompt(const PromptTemplates& t, std::span<const Demonstration* const> demos,
                                const Query& q) {
    std::string rendered;
    for (const auto* d : demos) rendered += render_demonstration(*d) + k_static_joiner;
    return fill_template(t.few_shot, {{"DEMOS", rendered}, {"QUERY", q.text}});
}

}  // namespace picl
