#include "ehrcheck/sql_dialect.hpp"

#include <algorithm>

#include "ehrcheck/text_util.hpp"

namespace ehrcheck {

namespace {

constexpr const char* kDay = "'%Y-%m-%d'";
constexpr const char* kSecond = "'%Y-%m-%d %H:%M:%S'";

std::string day_of(const std::string& expr) { return std::string("strftime(") + kDay + ", " + expr + ")"; }
std::string second_of(const std::string& expr) { return std::string("strftime(") + kSecond + ", " + expr + ")"; }

std::string render_bound(const DayBound& b) {
  if (b.offset == 0 && b.anchor == format_date(b.date)) return sql_quote(b.anchor);
  std::string mod = (b.offset >= 0 ? "+" : "") + std::to_string(b.offset) + (b.offset == 1 || b.offset == -1 ? " day" : " days");
  return day_of("date(" + sql_quote(b.anchor) + ", " + sql_quote(mod) + ")");
}

std::string render_literal(const CellValue& v) {
  if (const auto* d = std::get_if<Decimal>(&v)) return d->to_sql_literal();
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (const auto* t = std::get_if<DateTime>(&v)) return sql_quote(t->to_string());
  if (const auto* s = std::get_if<std::string>(&v)) return sql_quote(*s);
  return "NULL";
}

std::string render_in(const std::string& column, const std::vector<std::string>& labels) {
  if (labels.size() == 1) return column + " = " + sql_quote(labels.front());
  std::string s = column + " IN (";
  for (std::size_t i = 0; i < labels.size(); ++i) s += (i ? ", " : "") + sql_quote(labels[i]);
  return s + ")";
}

std::string render_time(const QueryPlan& plan, const TableSpec& t) {
  const auto& w = plan.window;
  const std::string& ev = t.name;
  if (t.has_interval_time()) {
    std::string s = ev + "." + *t.role_column(ColumnRole::StartTime);
    std::string e = "COALESCE(" + ev + "." + *t.role_column(ColumnRole::EndTime) + ", " + s + ")";
    std::string lo, hi;
    if (w.kind == WindowKind::ExactDateTime) {
      lo = hi = sql_quote(w.exact.full_string());
      return "NOT (" + second_of(e) + " < " + lo + " OR " + second_of(s) + " > " + hi + ")";
    }
    if (w.kind == WindowKind::ExactDate) {
      lo = hi = sql_quote(w.exact.date_string());
    } else {
      lo = render_bound(w.lo);
      hi = render_bound(w.hi);
    }
    return "NOT (" + day_of(e) + " < " + lo + " OR " + day_of(s) + " > " + hi + ")";
  }
  std::string c = ev + "." + *t.role_column(ColumnRole::PointTime);
  switch (w.kind) {
    case WindowKind::ExactDate: return day_of(c) + " = " + sql_quote(w.exact.date_string());
    case WindowKind::ExactDateTime: return second_of(c) + " = " + sql_quote(w.exact.full_string());
    case WindowKind::DayRange: return day_of(c) + " BETWEEN " + render_bound(w.lo) + " AND " + render_bound(w.hi);
    case WindowKind::None: break;
  }
  return "1";
}

}  // namespace

std::string sql_quote(std::string_view text) { return "'" + replace_all(std::string(text), "'", "''") + "'"; }

std::vector<Join> plan_joins(const QueryPlan& plan, const SchemaProfile& profile) {
  std::vector<Join> out;
  if (!plan.pair.dict_table) return out;
  for (const auto& j : profile.joins_for(plan.pair.event_table))
    if (iequals(j.dict_table, *plan.pair.dict_table)) out.push_back(j);
  return out;
}

std::string render_sql(const QueryPlan& plan, const SchemaProfile& profile, SelectStyle style) {
  check_plan(plan, profile);
  const auto& t = profile.table(plan.pair.event_table);
  auto joins = plan_joins(plan, profile);

  std::string select;
  if (style == SelectStyle::Star) {
    select = "*";
  } else {
    auto add = [&select](const std::string& alias, const TableSpec& spec) {
      for (const auto& c : spec.columns) {
        if (!select.empty()) select += ", ";
        select += alias + "." + c.name + " AS \"" + alias + "." + c.name + "\"";
      }
    };
    add(t.name, t);
    for (const auto& j : joins) add(j.alias, profile.table(j.dict_table));
  }

  std::string sql = "SELECT " + select + " FROM " + t.name;
  for (std::size_t i = 0; i < joins.size(); ++i) {
    const auto& j = joins[i];
    sql += i == 0 ? " JOIN " : " LEFT JOIN ";
    sql += j.dict_table;
    if (j.alias != j.dict_table) sql += " AS " + j.alias;
    sql += " ON " + t.name + "." + j.child_column + " = " + j.alias + "." + j.dict_column;
  }

  std::vector<std::string> where;
  where.push_back(t.name + "." + *t.role_column(ColumnRole::AdmissionKey) + " = " + std::to_string(plan.admission_key));
  for (auto id : {ConditionId::Value, ConditionId::Unit, ConditionId::Organism, ConditionId::Specimen}) {
    if (plan.is_masked(id)) continue;
    for (const auto& c : plan.conditions)
      if (c.id == id) where.push_back(t.name + "." + condition_columns(plan, profile, id).front() + " = " + render_literal(c.value));
  }
  if (plan.time_active()) where.push_back(render_time(plan, t));

  std::vector<std::string> item_terms;
  if (joins.empty()) {
    item_terms.push_back(render_in(t.name + "." + *t.role_column(ColumnRole::Label), plan.item_labels));
  } else {
    for (const auto& j : joins) {
      const auto& dict = profile.table(j.dict_table);
      auto cols = dict.role_columns(ColumnRole::Label);
      // Long titles read better first in the audit text.
      std::sort(cols.begin(), cols.end(), [](const auto& a, const auto& b) { return a > b; });
      for (const auto& c : cols) item_terms.push_back(render_in(j.alias + "." + c, plan.item_labels));
    }
  }
  if (item_terms.size() == 1) {
    where.push_back(item_terms.front());
  } else {
    std::string s = "(";
    for (std::size_t i = 0; i < item_terms.size(); ++i) s += (i ? " OR " : "") + item_terms[i];
    where.push_back(s + ")");
  }

  sql += " WHERE ";
  for (std::size_t i = 0; i < where.size(); ++i) sql += (i ? " AND " : "") + where[i];
  return sql;
}

}  // namespace ehrcheck
