#pragma once

// Data files compiled into the library (prompt templates, default section
// filters, default lexicon).

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ehrcheck {

/// `name` is the path relative to data/, e.g. "prompts/ner.txt".
std::optional<std::string_view> embedded_asset(std::string_view name);
std::vector<std::string> embedded_asset_names();

}  // namespace ehrcheck
