#pragma once

// Renders query plans to SQLite-flavoured SQL.

#include <string>
#include <string_view>

#include "ehrcheck/query_plan.hpp"
#include "ehrcheck/schema.hpp"

namespace ehrcheck {

enum class SelectStyle {
  /// `SELECT *`, the human-readable audit form.
  Star,
  /// Every column listed and aliased as "alias.column"; used for execution.
  Qualified,
};

std::string sql_quote(std::string_view text);
std::string render_sql(const QueryPlan& plan, const SchemaProfile& profile, SelectStyle style = SelectStyle::Star);

/// The dictionary joins a plan uses, primary join first.
std::vector<Join> plan_joins(const QueryPlan& plan, const SchemaProfile& profile);

}  // namespace ehrcheck
