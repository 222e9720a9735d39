#include "ehrcheck/query_engine.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "ehrcheck/text_util.hpp"

namespace ehrcheck {

using nlohmann::json;

namespace {

std::vector<TemplateSpec> build_matrix(const std::vector<std::pair<std::string, std::vector<WindowForm>>>& rows) {
  std::vector<TemplateSpec> out;
  for (const auto& [table, forms] : rows)
    for (auto f : forms) out.push_back({table + "/" + std::string(to_string(f)), table, f});
  return out;
}

}  // namespace

const std::vector<TemplateSpec>& template_matrix(ProfileName profile) {
  using F = WindowForm;
  const std::vector<F> four{F::Exact, F::AdmissionAnchored, F::StayRange, F::CalculatedAnchored};
  const std::vector<F> three{F::Exact, F::AdmissionAnchored, F::StayRange};
  const std::vector<F> none{F::NoTime};
  static const std::vector<TemplateSpec> mimic = build_matrix({{"chartevents", four},
                                                               {"labevents", four},
                                                               {"inputevents_cv", three},
                                                               {"inputevents_mv", four},
                                                               {"microbiologyevents", three},
                                                               {"prescriptions", four},
                                                               {"outputevents", three},
                                                               {"procedures_icd", none},
                                                               {"diagnoses_icd", none}});
  static const std::vector<TemplateSpec> omop = build_matrix({{"measurement", four},
                                                              {"drug_exposure", four},
                                                              {"specimen", three},
                                                              {"condition_occurrence", none},
                                                              {"procedure_occurrence", none}});
  return profile == ProfileName::MimicStyle ? mimic : omop;
}

std::optional<TemplateSpec> find_template(ProfileName profile, std::string_view event_table, WindowForm form) {
  for (const auto& t : template_matrix(profile))
    if (iequals(t.event_table, event_table) && t.form == form) return t;
  return std::nullopt;
}

TimeWindow compute_window(const TimeTag& tag, const Note& note) {
  if (!tag.in_current_stay) throw std::invalid_argument("no window for a mention outside the current stay");
  auto around = [](const DateTime& d, WindowForm form) {
    return TimeWindow::range(DayBound::shifted(d, -1), DayBound::shifted(d, 1), form);
  };
  switch (tag.regime) {
    case TimeRegime::ExactTimestamp:
      if (!tag.anchor || tag.anchor->kind != AnchorKind::Literal)
        throw std::invalid_argument("exact timestamp without a literal anchor");
      return TimeWindow::exact_at(tag.anchor->literal);
    case TimeRegime::Narrative: {
      if (!tag.anchor || tag.anchor->kind == AnchorKind::Literal)
        throw std::invalid_argument("narrative time without a narrative anchor");
      switch (tag.anchor->kind) {
        case AnchorKind::Admission: return around(note.admit_time, WindowForm::AdmissionAnchored);
        case AnchorKind::Discharge:
        case AnchorKind::ChartDate: return around(note.chart_time, WindowForm::CalculatedAnchored);
        case AnchorKind::HospitalDay:
          if (tag.anchor->hospital_day < 1) throw std::invalid_argument("hospital day must be >= 1");
          return around(DateTime::on(add_days(note.admit_time.date, tag.anchor->hospital_day - 1)),
                        WindowForm::CalculatedAnchored);
        case AnchorKind::Yesterday:
          return around(DateTime::on(add_days(note.chart_time.date, -1)), WindowForm::CalculatedAnchored);
        case AnchorKind::Literal: break;
      }
      break;
    }
    case TimeRegime::Unspecified:
      if (note.category == NoteCategory::DischargeSummary)
        return TimeWindow::range(DayBound::literal(note.admit_time.date), DayBound::literal(note.chart_time.date),
                                 WindowForm::StayRange);
      return around(note.chart_time, WindowForm::CalculatedAnchored);
  }
  throw std::invalid_argument("unresolvable time anchor");
}

QueryPlan build_plan(const ReformattedRow& row, EntityType type, const std::vector<ItemHit>& hits,
                     const TimeWindow& window, const Note& note, const SchemaProfile& profile) {
  const auto& table = profile.table(row.pair.event_table);
  QueryPlan plan;
  plan.pair = row.pair;
  plan.admission_key = note.admission_key;
  for (const auto& h : hits_for_pair(hits, row.pair, profile))
    if (std::find(plan.item_labels.begin(), plan.item_labels.end(), h.label) == plan.item_labels.end())
      plan.item_labels.push_back(h.label);
  if (plan.item_labels.empty()) throw Unverifiable("no-item", "no item of " + to_string(row.pair) + " matches");

  bool timed = table.role_column(ColumnRole::PointTime) || table.has_interval_time();
  plan.window = timed ? window : TimeWindow::none();
  auto form = timed ? window.form : WindowForm::NoTime;
  if (timed && window.kind == WindowKind::None) form = WindowForm::NoTime;
  auto tmpl = find_template(profile.name, table.name, form);
  if (!tmpl)
    throw Unverifiable("no-template", "no " + std::string(to_string(form)) + " template for " + table.name);
  plan.template_id = tmpl->id;

  auto add = [&](ConditionId id, ColumnRole role) {
    auto it = row.cells.find(role);
    if (it == row.cells.end() || is_null(it->second)) return;
    auto col = table.role_column(role);
    if (!col) return;
    plan.conditions.push_back({id, it->second});
  };
  if (type == EntityType::Type1) {
    add(ConditionId::Value, ColumnRole::Value);
    add(ConditionId::Unit, ColumnRole::Unit);
  }
  add(ConditionId::Organism, ColumnRole::Organism);
  add(ConditionId::Specimen, ColumnRole::Specimen);
  for (auto id : default_mask_order())
    if (plan.has_condition(id)) plan.maskable.push_back(id);
  check_plan(plan, profile);
  return plan;
}

std::string_view to_string(Verdict v) { return v == Verdict::Consistent ? "Consistent" : "Inconsistent"; }

Verdict verify(const QueryPlan& plan, const RecordStore& store, ExecPath path) {
  return store.execute_plan(plan, path).empty() ? Verdict::Inconsistent : Verdict::Consistent;
}

Verdict verify_all(const std::vector<QueryPlan>& plans, const RecordStore& store, ExecPath path) {
  if (plans.empty()) return Verdict::Inconsistent;
  for (const auto& p : plans)
    if (verify(p, store, path) == Verdict::Inconsistent) return Verdict::Inconsistent;
  return Verdict::Consistent;
}

json attribution_to_json(const ErrorAttribution& a) {
  json cols = json::array();
  for (const auto& c : a.error_columns) cols.push_back(json{{"table", c.table}, {"column", c.column}});
  json witnesses = json::array();
  for (const auto& w : a.witnesses) {
    json masked = json::array();
    for (auto id : w.masked) masked.push_back(to_string(id));
    witnesses.push_back(json{{"masked", masked}, {"rows", w.rows.sorted_keys()}});
  }
  return json{{"missing", a.missing}, {"compound", a.compound}, {"error_columns", cols}, {"witnesses", witnesses}};
}

ErrorAttribution localize(const QueryPlan& plan, const RecordStore& store, ExecPath path,
                          const std::vector<ConditionId>& order) {
  if (!store.execute_plan(plan, path).empty()) throw std::invalid_argument("localize needs a plan that finds no rows");
  const auto& profile = store.profile();
  std::vector<ConditionId> maskable;
  for (auto id : order)
    if (std::find(plan.maskable.begin(), plan.maskable.end(), id) != plan.maskable.end() && !plan.is_masked(id))
      maskable.push_back(id);

  ErrorAttribution out;
  auto add_columns = [&](const std::vector<ConditionId>& ids) {
    for (auto id : ids)
      for (const auto& c : condition_columns(plan, profile, id)) {
        ColumnRef ref{plan.pair.event_table, c};
        if (std::find(out.error_columns.begin(), out.error_columns.end(), ref) == out.error_columns.end())
          out.error_columns.push_back(ref);
      }
  };
  for (auto id : maskable) {
    auto rows = store.execute_plan(plan.with_masked({id}), path);
    if (rows.empty()) continue;
    add_columns({id});
    out.witnesses.push_back({{id}, std::move(rows)});
  }
  if (!out.witnesses.empty()) return out;

  const auto m = maskable.size();
  for (std::size_t k = 2; k <= m && out.witnesses.empty(); ++k) {
    // Subsets of size k in mask order, lexicographic by position.
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
      std::vector<ConditionId> ids;
      for (auto i : idx) ids.push_back(maskable[i]);
      auto rows = store.execute_plan(plan.with_masked(ids), path);
      if (!rows.empty()) {
        add_columns(ids);
        out.witnesses.push_back({ids, std::move(rows)});
      }
      std::size_t pos = k;
      while (pos > 0 && idx[pos - 1] == m - k + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t i = pos; i < k; ++i) idx[i] = idx[i - 1] + 1;
    }
  }
  if (out.witnesses.empty()) {
    out.missing = true;
  } else {
    out.compound = true;
  }
  return out;
}

}  // namespace ehrcheck
