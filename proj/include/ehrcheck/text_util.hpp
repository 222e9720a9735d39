#pragma once

// Small string helpers used across modules.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ehrcheck {

std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
bool contains_ci(std::string_view haystack, std::string_view needle);
/// Case-insensitive search for `word` bounded by non-alphanumerics.
bool contains_word_ci(std::string_view haystack, std::string_view word);
/// Whitespace-separated token count.
std::size_t count_tokens(std::string_view s);
std::string replace_all(std::string s, std::string_view from, std::string_view to);
/// Case-insensitive glob with `*` and `?`.
bool glob_match_ci(std::string_view pattern, std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 14695981039346656037ull);
std::string hex64(std::uint64_t v);

}  // namespace ehrcheck
