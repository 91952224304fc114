// SPDX-License-Identifier: Apache-2.0

// Small string and file helpers used across modules.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace picl {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string collapse_whitespace(std::string_view s);

/// Letters, digits and any byte of a multi-byte UTF-8 sequence.
bool is_word_char(char c) noexcept;

/// Lowercased terms split on whitespace and punctuation.
std::vector<std::string> tokenize_terms(std::string_view s);

/// Number of whitespace-delimited words.
std::size_t count_words(std::string_view s);

/// Replaces {{NAME}} markers in one left-to-right pass; substituted values
/// are never rescanned. Unknown markers are left as they are.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

std::string csv_escape(std::string_view field);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);

}  // namespace picl
