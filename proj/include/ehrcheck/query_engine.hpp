#pragma once

// Verification windows, the per-table template matrix, plan construction,
// plan verification and masking-based localization.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ehrcheck/extraction.hpp"
#include "ehrcheck/item_search.hpp"
#include "ehrcheck/notes.hpp"
#include "ehrcheck/query_plan.hpp"
#include "ehrcheck/record_store.hpp"

namespace ehrcheck {

struct TemplateSpec {
  std::string id;  // "<table>/<form>"
  std::string event_table;
  WindowForm form = WindowForm::NoTime;
};

/// Every (event table, form) cell the profile has a template for.
const std::vector<TemplateSpec>& template_matrix(ProfileName profile);
std::optional<TemplateSpec> find_template(ProfileName profile, std::string_view event_table, WindowForm form);

/// A mention that cannot be checked; `reason` is one of history, no-table,
/// no-item, no-template, stage-parse-failure, type3.
class Unverifiable : public std::runtime_error {
 public:
  Unverifiable(std::string reason, const std::string& detail)
      : std::runtime_error(detail), reason_(std::move(reason)) {}
  const std::string& reason() const { return reason_; }

 private:
  std::string reason_;
};

/// Exact time for a literal; anchor ±1 day for narrative anchors; the whole
/// stay for an undated mention in a discharge summary; chart date ±1 day for
/// an undated mention in other notes. Throws std::invalid_argument for a tag
/// outside the current stay or with an anchor that does not fit its regime.
TimeWindow compute_window(const TimeTag& tag, const Note& note);

/// Plan for one reformatted row. Type 1 rows carry value and unit
/// conditions; organism and specimen conditions apply whenever the row has
/// them. Throws Unverifiable (no-item, no-template).
QueryPlan build_plan(const ReformattedRow& row, EntityType type, const std::vector<ItemHit>& hits,
                     const TimeWindow& window, const Note& note, const SchemaProfile& profile);

enum class Verdict { Consistent, Inconsistent };
std::string_view to_string(Verdict v);

Verdict verify(const QueryPlan& plan, const RecordStore& store, ExecPath path = ExecPath::SqlPath);
/// Consistent iff every plan is (one plan per value of a multi-value reading).
Verdict verify_all(const std::vector<QueryPlan>& plans, const RecordStore& store, ExecPath path = ExecPath::SqlPath);

struct Relaxation {
  std::vector<ConditionId> masked;
  RowSet rows;
};

struct ErrorAttribution {
  bool missing = false;
  /// Set when no single relaxation finds rows but a joint one does.
  bool compound = false;
  std::vector<ColumnRef> error_columns;
  std::vector<Relaxation> witnesses;
};

nlohmann::json attribution_to_json(const ErrorAttribution& a);

/// Masks each maskable condition alone, in `order`; every relaxation that
/// finds rows contributes its columns. If none does, the smallest condition
/// subsets that find rows are flagged jointly as compound; if even full
/// relaxation finds nothing the entity is missing. Throws
/// std::invalid_argument if the plan already finds rows.
ErrorAttribution localize(const QueryPlan& plan, const RecordStore& store, ExecPath path = ExecPath::SqlPath,
                          const std::vector<ConditionId>& order = default_mask_order());

}  // namespace ehrcheck
