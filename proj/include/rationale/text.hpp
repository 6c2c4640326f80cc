#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace rationale::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Lowercase word tokens: maximal runs of ASCII letters, digits and '_'.
/// Everything else is treated as punctuation or whitespace.
std::vector<std::string> word_tokens(std::string_view s);

/// True if `needle` occurs in `tokens` as a contiguous token sequence.
bool contains_phrase(const std::vector<std::string>& tokens,
                     const std::vector<std::string>& needle);

bool is_space(char c);

}  // namespace rationale::text
