#include "ehrcheck/query_plan.hpp"

#include <algorithm>

#include "ehrcheck/errors.hpp"
#include "ehrcheck/text_util.hpp"

namespace ehrcheck {

using nlohmann::json;

std::string_view to_string(WindowKind kind) {
  switch (kind) {
    case WindowKind::ExactDate: return "ExactDate";
    case WindowKind::ExactDateTime: return "ExactDateTime";
    case WindowKind::DayRange: return "DayRange";
    case WindowKind::None: return "None";
  }
  return "?";
}

std::string_view to_string(WindowForm form) {
  switch (form) {
    case WindowForm::Exact: return "Exact";
    case WindowForm::AdmissionAnchored: return "AdmissionAnchored";
    case WindowForm::StayRange: return "StayRange";
    case WindowForm::CalculatedAnchored: return "CalculatedAnchored";
    case WindowForm::NoTime: return "NoTime";
  }
  return "?";
}

WindowKind parse_window_kind(std::string_view text) {
  for (auto k : {WindowKind::ExactDate, WindowKind::ExactDateTime, WindowKind::DayRange, WindowKind::None})
    if (iequals(text, to_string(k))) return k;
  throw ParseError("unknown window kind '" + std::string(text) + "'");
}

WindowForm parse_window_form(std::string_view text) {
  for (auto f : {WindowForm::Exact, WindowForm::AdmissionAnchored, WindowForm::StayRange, WindowForm::CalculatedAnchored,
                 WindowForm::NoTime})
    if (iequals(text, to_string(f))) return f;
  throw ParseError("unknown window form '" + std::string(text) + "'");
}

DayBound DayBound::shifted(const DateTime& anchor, int offset) {
  return DayBound{add_days(anchor.date, offset), anchor.full_string(), offset};
}

TimeWindow TimeWindow::exact_at(const DateTime& t) {
  TimeWindow w;
  w.kind = t.has_time() ? WindowKind::ExactDateTime : WindowKind::ExactDate;
  w.form = WindowForm::Exact;
  w.exact = t;
  return w;
}

TimeWindow TimeWindow::range(DayBound lo, DayBound hi, WindowForm form) {
  TimeWindow w;
  w.kind = WindowKind::DayRange;
  w.form = form;
  w.lo = std::move(lo);
  w.hi = std::move(hi);
  return w;
}

std::string_view to_string(ConditionId id) {
  switch (id) {
    case ConditionId::Value: return "value";
    case ConditionId::Unit: return "unit";
    case ConditionId::Time: return "time";
    case ConditionId::Organism: return "organism";
    case ConditionId::Specimen: return "specimen";
  }
  return "?";
}

ConditionId parse_condition_id(std::string_view text) {
  for (auto id : default_mask_order())
    if (iequals(text, to_string(id))) return id;
  throw ParseError("unknown condition id '" + std::string(text) + "'");
}

const std::vector<ConditionId>& default_mask_order() {
  static const std::vector<ConditionId> order{ConditionId::Value, ConditionId::Unit, ConditionId::Time,
                                              ConditionId::Organism, ConditionId::Specimen};
  return order;
}

ColumnRole role_for(ConditionId id) {
  switch (id) {
    case ConditionId::Value: return ColumnRole::Value;
    case ConditionId::Unit: return ColumnRole::Unit;
    case ConditionId::Time: return ColumnRole::PointTime;
    case ConditionId::Organism: return ColumnRole::Organism;
    case ConditionId::Specimen: return ColumnRole::Specimen;
  }
  return ColumnRole::Value;
}

bool QueryPlan::has_condition(ConditionId id) const {
  if (id == ConditionId::Time) return window.kind != WindowKind::None;
  return std::any_of(conditions.begin(), conditions.end(), [id](const auto& c) { return c.id == id; });
}

bool QueryPlan::is_masked(ConditionId id) const { return std::find(masked.begin(), masked.end(), id) != masked.end(); }

QueryPlan QueryPlan::with_masked(const std::vector<ConditionId>& ids) const {
  QueryPlan p = *this;
  for (auto id : ids)
    if (!p.is_masked(id)) p.masked.push_back(id);
  return p;
}

namespace {

json cell_to_json(const CellValue& v) {
  struct Visitor {
    json operator()(Null) const { return json{{"kind", "Null"}}; }
    json operator()(const std::string& s) const { return json{{"kind", "Text"}, {"value", s}}; }
    json operator()(const Decimal& d) const { return json{{"kind", "Decimal"}, {"value", d.to_string()}}; }
    json operator()(const DateTime& d) const { return json{{"kind", "DateTime"}, {"value", d.to_string()}}; }
    json operator()(std::int64_t i) const { return json{{"kind", "Integer"}, {"value", i}}; }
  };
  return std::visit(Visitor{}, v);
}

CellValue cell_from_json(const json& j) {
  auto kind = j.at("kind").get<std::string>();
  if (kind == "Null") return Null{};
  if (kind == "Text") return j.at("value").get<std::string>();
  if (kind == "Integer") return j.at("value").get<std::int64_t>();
  auto text = j.at("value").get<std::string>();
  if (kind == "Decimal") {
    auto d = Decimal::parse(text);
    if (!d) throw ParseError("bad decimal '" + text + "' in plan");
    return *d;
  }
  if (kind == "DateTime") {
    auto d = DateTime::parse(text);
    if (!d) throw ParseError("bad datetime '" + text + "' in plan");
    return *d;
  }
  throw ParseError("unknown cell kind '" + kind + "' in plan");
}

json bound_to_json(const DayBound& b) {
  return json{{"date", format_date(b.date)}, {"anchor", b.anchor}, {"offset", b.offset}};
}

DayBound bound_from_json(const json& j) {
  DayBound b;
  auto d = parse_date(j.at("date").get<std::string>());
  if (!d) throw ParseError("bad window bound date in plan");
  b.date = *d;
  b.anchor = j.value("anchor", format_date(*d));
  b.offset = j.value("offset", 0);
  return b;
}

}  // namespace

json plan_to_json(const QueryPlan& plan) {
  json j;
  j["table"] = plan.pair.event_table;
  j["dict_table"] = plan.pair.dict_table ? json(*plan.pair.dict_table) : json(nullptr);
  j["admission_key"] = plan.admission_key;
  j["item_labels"] = plan.item_labels;
  json w{{"kind", to_string(plan.window.kind)}, {"form", to_string(plan.window.form)}};
  if (plan.window.kind == WindowKind::ExactDate || plan.window.kind == WindowKind::ExactDateTime)
    w["exact"] = plan.window.exact.to_string();
  if (plan.window.kind == WindowKind::DayRange) {
    w["lo"] = bound_to_json(plan.window.lo);
    w["hi"] = bound_to_json(plan.window.hi);
  }
  j["window"] = w;
  json conds = json::array();
  for (const auto& c : plan.conditions) conds.push_back(json{{"id", to_string(c.id)}, {"value", cell_to_json(c.value)}});
  j["conditions"] = conds;
  json maskable = json::array(), masked = json::array();
  for (auto id : plan.maskable) maskable.push_back(to_string(id));
  for (auto id : plan.masked) masked.push_back(to_string(id));
  j["maskable"] = maskable;
  j["masked"] = masked;
  j["template"] = plan.template_id;
  return j;
}

QueryPlan plan_from_json(const json& j) {
  try {
    QueryPlan p;
    p.pair.event_table = j.at("table").get<std::string>();
    if (j.contains("dict_table") && !j["dict_table"].is_null()) p.pair.dict_table = j["dict_table"].get<std::string>();
    p.admission_key = j.at("admission_key").get<std::int64_t>();
    p.item_labels = j.at("item_labels").get<std::vector<std::string>>();
    const auto& w = j.at("window");
    p.window.kind = parse_window_kind(w.at("kind").get<std::string>());
    p.window.form = parse_window_form(w.value("form", std::string("NoTime")));
    if (p.window.kind == WindowKind::ExactDate || p.window.kind == WindowKind::ExactDateTime) {
      auto t = DateTime::parse(w.at("exact").get<std::string>());
      if (!t) throw ParseError("bad exact window time in plan");
      p.window.exact = *t;
      if (t->has_time() != (p.window.kind == WindowKind::ExactDateTime))
        throw ParseError("exact window precision does not match its kind");
    }
    if (p.window.kind == WindowKind::DayRange) {
      p.window.lo = bound_from_json(w.at("lo"));
      p.window.hi = bound_from_json(w.at("hi"));
      if (p.window.hi.date < p.window.lo.date) throw ParseError("window lo after hi");
    }
    for (const auto& c : j.value("conditions", json::array()))
      p.conditions.push_back(ValueCondition{parse_condition_id(c.at("id").get<std::string>()), cell_from_json(c.at("value"))});
    for (const auto& m : j.value("maskable", json::array())) p.maskable.push_back(parse_condition_id(m.get<std::string>()));
    for (const auto& m : j.value("masked", json::array())) p.masked.push_back(parse_condition_id(m.get<std::string>()));
    p.template_id = j.value("template", std::string());
    return p;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed plan JSON: ") + e.what());
  }
}

std::vector<std::string> condition_columns(const QueryPlan& plan, const SchemaProfile& profile, ConditionId id) {
  const auto& t = profile.table(plan.pair.event_table);
  if (id == ConditionId::Time) {
    if (t.has_interval_time()) return {*t.role_column(ColumnRole::StartTime), *t.role_column(ColumnRole::EndTime)};
    if (auto c = t.role_column(ColumnRole::PointTime)) return {*c};
    return {};
  }
  if (auto c = t.role_column(role_for(id))) return {*c};
  return {};
}

void check_plan(const QueryPlan& plan, const SchemaProfile& profile) {
  if (!profile.is_legal(plan.pair)) throw SchemaError("plan targets illegal table pair " + to_string(plan.pair));
  const auto& t = profile.table(plan.pair.event_table);
  if (plan.item_labels.empty()) throw SchemaError("plan has an empty item condition");
  if (plan.window.kind != WindowKind::None && condition_columns(plan, profile, ConditionId::Time).empty())
    throw SchemaError("plan has a time window but " + t.name + " has no time column");
  for (const auto& c : plan.conditions) {
    if (c.id == ConditionId::Time) throw SchemaError("time is expressed by the window, not a value condition");
    if (condition_columns(plan, profile, c.id).empty())
      throw SchemaError("plan condition '" + std::string(to_string(c.id)) + "' has no column in " + t.name);
    if (is_null(c.value)) throw SchemaError("plan condition '" + std::string(to_string(c.id)) + "' compares with null");
    auto kind = t.column(condition_columns(plan, profile, c.id).front()).kind;
    bool ok = (kind == ValueKind::Decimal && std::holds_alternative<Decimal>(c.value)) ||
              (kind == ValueKind::Text && std::holds_alternative<std::string>(c.value)) ||
              (kind == ValueKind::Integer && std::holds_alternative<std::int64_t>(c.value));
    if (!ok) throw SchemaError("plan condition '" + std::string(to_string(c.id)) + "' has the wrong value kind");
  }
}

}  // namespace ehrcheck
