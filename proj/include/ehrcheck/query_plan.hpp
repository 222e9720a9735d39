#pragma once

// Structured query plans: the condition set that is rendered to SQL or
// evaluated by the row scan.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ehrcheck/cell.hpp"
#include "ehrcheck/schema.hpp"

namespace ehrcheck {

enum class WindowKind { ExactDate, ExactDateTime, DayRange, None };

/// Template family a window belongs to. The template matrix is indexed by
/// (event table, form).
enum class WindowForm { Exact, AdmissionAnchored, StayRange, CalculatedAnchored, NoTime };

std::string_view to_string(WindowKind kind);
std::string_view to_string(WindowForm form);
WindowKind parse_window_kind(std::string_view text);
WindowForm parse_window_form(std::string_view text);

/// A day bound: `anchor` shifted by `offset` days. `date` is the resolved
/// value; anchor and offset are kept so rendered SQL shows the arithmetic.
struct DayBound {
  Date date{};
  std::string anchor;  // "YYYY-MM-DD" or "YYYY-MM-DD HH:MM:SS"
  int offset = 0;

  static DayBound literal(Date d) { return DayBound{d, format_date(d), 0}; }
  static DayBound shifted(const DateTime& anchor, int offset);

  friend bool operator==(const DayBound&, const DayBound&) = default;
};

struct TimeWindow {
  WindowKind kind = WindowKind::None;
  WindowForm form = WindowForm::NoTime;
  DateTime exact{};  // ExactDate / ExactDateTime
  DayBound lo{}, hi{};  // DayRange

  static TimeWindow none() { return {}; }
  static TimeWindow exact_at(const DateTime& t);
  static TimeWindow range(DayBound lo, DayBound hi, WindowForm form);

  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

/// Identifies a maskable condition.
enum class ConditionId { Value, Unit, Time, Organism, Specimen };

std::string_view to_string(ConditionId id);
ConditionId parse_condition_id(std::string_view text);
const std::vector<ConditionId>& default_mask_order();
ColumnRole role_for(ConditionId id);

struct ValueCondition {
  ConditionId id = ConditionId::Value;
  CellValue value;

  friend bool operator==(const ValueCondition&, const ValueCondition&) = default;
};

struct QueryPlan {
  TablePair pair;
  std::int64_t admission_key = 0;
  /// Item condition: the dictionary label (or drug name) is one of these.
  std::vector<std::string> item_labels;
  TimeWindow window;
  /// Value, unit, organism and specimen equality conditions.
  std::vector<ValueCondition> conditions;
  /// Maskable condition ids in masking order.
  std::vector<ConditionId> maskable;
  /// Conditions removed by localization.
  std::vector<ConditionId> masked;
  std::string template_id;

  bool has_condition(ConditionId id) const;
  bool is_masked(ConditionId id) const;
  bool time_active() const { return window.kind != WindowKind::None && !is_masked(ConditionId::Time); }
  QueryPlan with_masked(const std::vector<ConditionId>& ids) const;

  friend bool operator==(const QueryPlan&, const QueryPlan&) = default;
};

nlohmann::json plan_to_json(const QueryPlan& plan);
/// Throws ParseError on malformed input.
QueryPlan plan_from_json(const nlohmann::json& j);

/// Throws SchemaError if the plan names tables, roles or joins the profile
/// does not have.
void check_plan(const QueryPlan& plan, const SchemaProfile& profile);

/// Columns of the event table a condition tests.
std::vector<std::string> condition_columns(const QueryPlan& plan, const SchemaProfile& profile, ConditionId id);

}  // namespace ehrcheck
