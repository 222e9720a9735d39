#include "ehrcheck/schema.hpp"

#include <algorithm>
#include <set>

#include "ehrcheck/text_util.hpp"

namespace ehrcheck {

std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::Label: return "Label";
    case ColumnRole::Value: return "Value";
    case ColumnRole::Unit: return "Unit";
    case ColumnRole::PointTime: return "PointTime";
    case ColumnRole::StartTime: return "StartTime";
    case ColumnRole::EndTime: return "EndTime";
    case ColumnRole::Organism: return "Organism";
    case ColumnRole::Specimen: return "Specimen";
    case ColumnRole::SubjectKey: return "SubjectKey";
    case ColumnRole::AdmissionKey: return "AdmissionKey";
    case ColumnRole::ItemKey: return "ItemKey";
    case ColumnRole::ConceptDomain: return "ConceptDomain";
  }
  return "?";
}

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::Text: return "Text";
    case ValueKind::Decimal: return "Decimal";
    case ValueKind::DateTime: return "DateTime";
    case ValueKind::Integer: return "Integer";
  }
  return "?";
}

bool is_time_role(ColumnRole role) {
  return role == ColumnRole::PointTime || role == ColumnRole::StartTime || role == ColumnRole::EndTime;
}

std::string to_string(const TablePair& pair) {
  return pair.dict_table ? "{" + pair.event_table + ", " + *pair.dict_table + "}" : "{" + pair.event_table + "}";
}

std::string to_string(const ColumnRef& ref) { return ref.table + "." + ref.column; }

std::string_view to_string(ProfileName name) { return name == ProfileName::MimicStyle ? "mimic" : "omop"; }

ProfileName parse_profile_name(std::string_view text) {
  auto t = to_lower(text);
  if (t == "mimic" || t == "mimicstyle" || t == "mimic-iii") return ProfileName::MimicStyle;
  if (t == "omop" || t == "omopstyle" || t == "mimic-omop") return ProfileName::OmopStyle;
  throw SchemaError("unknown profile '" + std::string(text) + "'");
}

std::optional<std::size_t> TableSpec::column_index(std::string_view col) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (iequals(columns[i].name, col)) return i;
  return std::nullopt;
}

const ColumnSpec& TableSpec::column(std::string_view col) const {
  auto i = column_index(col);
  if (!i) throw SchemaError("unknown column " + name + "." + std::string(col));
  return columns[*i];
}

std::optional<std::string> TableSpec::role_column(ColumnRole role) const {
  auto it = roles.find(role);
  if (it == roles.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> TableSpec::role_columns(ColumnRole role) const {
  std::vector<std::string> out;
  auto [lo, hi] = roles.equal_range(role);
  for (auto it = lo; it != hi; ++it) out.push_back(it->second);
  return out;
}

std::optional<ColumnRole> TableSpec::role_of(std::string_view col) const {
  for (const auto& [role, c] : roles)
    if (iequals(c, col)) return role;
  return std::nullopt;
}

const TableSpec* SchemaProfile::find_table(std::string_view n) const {
  for (const auto& t : tables)
    if (iequals(t.name, n)) return &t;
  return nullptr;
}

const TableSpec& SchemaProfile::table(std::string_view n) const {
  if (const auto* t = find_table(n)) return *t;
  throw SchemaError("unknown table '" + std::string(n) + "' in profile " + std::string(to_string(name)));
}

std::vector<Join> SchemaProfile::joins_for(std::string_view child) const {
  std::vector<Join> out;
  for (const auto& j : joins)
    if (iequals(j.child_table, child)) out.push_back(j);
  return out;
}

bool SchemaProfile::is_legal(const TablePair& pair) const {
  return std::find(legal_pairs.begin(), legal_pairs.end(), pair) != legal_pairs.end();
}

std::vector<std::string> SchemaProfile::event_tables() const {
  std::vector<std::string> out;
  for (const auto& p : legal_pairs) out.push_back(p.event_table);
  return out;
}

namespace {

using R = ColumnRole;
using K = ValueKind;

TableSpec make_table(std::string name, std::string pk, std::vector<ColumnSpec> cols,
                     std::vector<std::pair<ColumnRole, std::string>> roles, bool dictionary = false) {
  TableSpec t;
  t.name = std::move(name);
  t.primary_key = std::move(pk);
  t.columns = std::move(cols);
  for (auto& [r, c] : roles) t.roles.emplace(r, std::move(c));
  t.dictionary = dictionary;
  return t;
}

SchemaProfile mimic_profile() {
  SchemaProfile p;
  p.name = ProfileName::MimicStyle;
  auto point_event = [](std::string name, std::string value_col, std::string unit_col) {
    return make_table(name, "row_id",
                      {{"row_id", K::Integer},
                       {"subject_id", K::Integer},
                       {"hadm_id", K::Integer},
                       {"itemid", K::Integer},
                       {"charttime", K::DateTime},
                       {value_col, K::Decimal},
                       {unit_col, K::Text}},
                      {{R::SubjectKey, "subject_id"},
                       {R::AdmissionKey, "hadm_id"},
                       {R::ItemKey, "itemid"},
                       {R::PointTime, "charttime"},
                       {R::Value, value_col},
                       {R::Unit, unit_col}});
  };
  p.tables.push_back(point_event("chartevents", "valuenum", "valueuom"));
  p.tables.push_back(point_event("labevents", "valuenum", "valueuom"));
  p.tables.push_back(point_event("outputevents", "valuenum", "valueuom"));

  p.tables.push_back(make_table("inputevents_cv", "row_id",
                                {{"row_id", K::Integer},
                                 {"subject_id", K::Integer},
                                 {"hadm_id", K::Integer},
                                 {"itemid", K::Integer},
                                 {"charttime", K::DateTime},
                                 {"amount", K::Decimal},
                                 {"amountuom", K::Text},
                                 {"rate", K::Decimal},
                                 {"rateuom", K::Text}},
                                {{R::SubjectKey, "subject_id"},
                                 {R::AdmissionKey, "hadm_id"},
                                 {R::ItemKey, "itemid"},
                                 {R::PointTime, "charttime"},
                                 {R::Value, "amount"},
                                 {R::Unit, "amountuom"}}));
  p.tables.push_back(make_table("inputevents_mv", "row_id",
                                {{"row_id", K::Integer},
                                 {"subject_id", K::Integer},
                                 {"hadm_id", K::Integer},
                                 {"itemid", K::Integer},
                                 {"starttime", K::DateTime},
                                 {"endtime", K::DateTime},
                                 {"amount", K::Decimal},
                                 {"amountuom", K::Text},
                                 {"rate", K::Decimal},
                                 {"rateuom", K::Text}},
                                {{R::SubjectKey, "subject_id"},
                                 {R::AdmissionKey, "hadm_id"},
                                 {R::ItemKey, "itemid"},
                                 {R::StartTime, "starttime"},
                                 {R::EndTime, "endtime"},
                                 {R::Value, "amount"},
                                 {R::Unit, "amountuom"}}));
  p.tables.push_back(make_table("prescriptions", "row_id",
                                {{"row_id", K::Integer},
                                 {"subject_id", K::Integer},
                                 {"hadm_id", K::Integer},
                                 {"startdate", K::DateTime},
                                 {"enddate", K::DateTime},
                                 {"drug", K::Text},
                                 {"dose_val_rx", K::Decimal},
                                 {"dose_unit_rx", K::Text}},
                                {{R::SubjectKey, "subject_id"},
                                 {R::AdmissionKey, "hadm_id"},
                                 {R::StartTime, "startdate"},
                                 {R::EndTime, "enddate"},
                                 {R::Label, "drug"},
                                 {R::Value, "dose_val_rx"},
                                 {R::Unit, "dose_unit_rx"}}));
  p.tables.push_back(make_table("microbiologyevents", "row_id",
                                {{"row_id", K::Integer},
                                 {"subject_id", K::Integer},
                                 {"hadm_id", K::Integer},
                                 {"charttime", K::DateTime},
                                 {"spec_itemid", K::Integer},
                                 {"spec_type_desc", K::Text},
                                 {"org_itemid", K::Integer},
                                 {"org_name", K::Text}},
                                {{R::SubjectKey, "subject_id"},
                                 {R::AdmissionKey, "hadm_id"},
                                 {R::ItemKey, "spec_itemid"},
                                 {R::PointTime, "charttime"},
                                 {R::Organism, "org_name"},
                                 {R::Specimen, "spec_type_desc"}}));
  auto icd_event = [](std::string name) {
    return make_table(name, "row_id",
                      {{"row_id", K::Integer}, {"subject_id", K::Integer}, {"hadm_id", K::Integer}, {"icd9_code", K::Text}},
                      {{R::SubjectKey, "subject_id"}, {R::AdmissionKey, "hadm_id"}, {R::ItemKey, "icd9_code"}});
  };
  p.tables.push_back(icd_event("diagnoses_icd"));
  p.tables.push_back(icd_event("procedures_icd"));

  auto item_dict = [](std::string name) {
    return make_table(name, "row_id", {{"row_id", K::Integer}, {"itemid", K::Integer}, {"label", K::Text}},
                      {{R::ItemKey, "itemid"}, {R::Label, "label"}}, true);
  };
  auto icd_dict = [](std::string name) {
    return make_table(name, "row_id",
                      {{"row_id", K::Integer}, {"icd9_code", K::Text}, {"short_title", K::Text}, {"long_title", K::Text}},
                      {{R::ItemKey, "icd9_code"}, {R::Label, "short_title"}, {R::Label, "long_title"}}, true);
  };
  p.tables.push_back(item_dict("d_items"));
  p.tables.push_back(icd_dict("d_icd_diagnoses"));
  p.tables.push_back(icd_dict("d_icd_procedures"));
  p.tables.push_back(item_dict("d_labitems"));

  p.joins = {
      {"chartevents", "itemid", "d_items", "itemid", "d_items"},
      {"labevents", "itemid", "d_labitems", "itemid", "d_labitems"},
      {"outputevents", "itemid", "d_items", "itemid", "d_items"},
      {"inputevents_cv", "itemid", "d_items", "itemid", "d_items"},
      {"inputevents_mv", "itemid", "d_items", "itemid", "d_items"},
      {"microbiologyevents", "spec_itemid", "d_items", "itemid", "spec_items"},
      {"microbiologyevents", "org_itemid", "d_items", "itemid", "org_items"},
      {"diagnoses_icd", "icd9_code", "d_icd_diagnoses", "icd9_code", "d_icd_diagnoses"},
      {"procedures_icd", "icd9_code", "d_icd_procedures", "icd9_code", "d_icd_procedures"},
  };
  p.legal_pairs = {
      {"chartevents", "d_items"},        {"outputevents", "d_items"},   {"microbiologyevents", "d_items"},
      {"inputevents_cv", "d_items"},     {"diagnoses_icd", "d_icd_diagnoses"},
      {"procedures_icd", "d_icd_procedures"}, {"prescriptions", std::nullopt},
      {"inputevents_mv", "d_items"},     {"labevents", "d_labitems"},
  };
  p.item_sources = {
      {"d_labitems", {"label"}},
      {"d_items", {"label"}},
      {"prescriptions", {"drug"}},
      {"d_icd_procedures", {"long_title", "short_title"}},
      {"d_icd_diagnoses", {"long_title", "short_title"}},
  };
  return p;
}

SchemaProfile omop_profile() {
  SchemaProfile p;
  p.name = ProfileName::OmopStyle;
  p.tables.push_back(make_table("concept", "concept_id",
                                {{"concept_id", K::Integer}, {"concept_name", K::Text}, {"domain_id", K::Text}},
                                {{R::ItemKey, "concept_id"}, {R::Label, "concept_name"}, {R::ConceptDomain, "domain_id"}},
                                true));
  p.tables.push_back(make_table("measurement", "measurement_id",
                                {{"measurement_id", K::Integer},
                                 {"person_id", K::Integer},
                                 {"visit_occurrence_id", K::Integer},
                                 {"measurement_concept_id", K::Integer},
                                 {"measurement_datetime", K::DateTime},
                                 {"value_as_number", K::Decimal},
                                 {"unit_source_value", K::Text}},
                                {{R::SubjectKey, "person_id"},
                                 {R::AdmissionKey, "visit_occurrence_id"},
                                 {R::ItemKey, "measurement_concept_id"},
                                 {R::PointTime, "measurement_datetime"},
                                 {R::Value, "value_as_number"},
                                 {R::Unit, "unit_source_value"}}));
  // Dose and unit have no counterpart in the column mapping, so they carry no
  // role and drug exposures verify on item and time only.
  p.tables.push_back(make_table("drug_exposure", "drug_exposure_id",
                                {{"drug_exposure_id", K::Integer},
                                 {"person_id", K::Integer},
                                 {"visit_occurrence_id", K::Integer},
                                 {"drug_concept_id", K::Integer},
                                 {"drug_exposure_start_date", K::DateTime},
                                 {"drug_exposure_end_date", K::DateTime},
                                 {"quantity", K::Decimal},
                                 {"dose_unit_source_value", K::Text}},
                                {{R::SubjectKey, "person_id"},
                                 {R::AdmissionKey, "visit_occurrence_id"},
                                 {R::ItemKey, "drug_concept_id"},
                                 {R::StartTime, "drug_exposure_start_date"},
                                 {R::EndTime, "drug_exposure_end_date"}}));
  p.tables.push_back(make_table("specimen", "specimen_id",
                                {{"specimen_id", K::Integer},
                                 {"person_id", K::Integer},
                                 {"visit_occurrence_id", K::Integer},
                                 {"specimen_concept_id", K::Integer},
                                 {"specimen_datetime", K::DateTime}},
                                {{R::SubjectKey, "person_id"},
                                 {R::AdmissionKey, "visit_occurrence_id"},
                                 {R::ItemKey, "specimen_concept_id"},
                                 {R::PointTime, "specimen_datetime"}}));
  p.tables.push_back(make_table("condition_occurrence", "condition_occurrence_id",
                                {{"condition_occurrence_id", K::Integer},
                                 {"person_id", K::Integer},
                                 {"visit_occurrence_id", K::Integer},
                                 {"condition_concept_id", K::Integer}},
                                {{R::SubjectKey, "person_id"},
                                 {R::AdmissionKey, "visit_occurrence_id"},
                                 {R::ItemKey, "condition_concept_id"}}));
  p.tables.push_back(make_table("procedure_occurrence", "procedure_occurrence_id",
                                {{"procedure_occurrence_id", K::Integer},
                                 {"person_id", K::Integer},
                                 {"visit_occurrence_id", K::Integer},
                                 {"procedure_concept_id", K::Integer}},
                                {{R::SubjectKey, "person_id"},
                                 {R::AdmissionKey, "visit_occurrence_id"},
                                 {R::ItemKey, "procedure_concept_id"}}));
  p.joins = {
      {"measurement", "measurement_concept_id", "concept", "concept_id", "concept"},
      {"drug_exposure", "drug_concept_id", "concept", "concept_id", "concept"},
      {"specimen", "specimen_concept_id", "concept", "concept_id", "concept"},
      {"condition_occurrence", "condition_concept_id", "concept", "concept_id", "concept"},
      {"procedure_occurrence", "procedure_concept_id", "concept", "concept_id", "concept"},
  };
  p.legal_pairs = {{"measurement", "concept"},          {"drug_exposure", "concept"},
                   {"specimen", "concept"},             {"condition_occurrence", "concept"},
                   {"procedure_occurrence", "concept"}};
  p.item_sources = {{"concept", {"concept_name"}}};
  p.domain_for_event_table = {{"measurement", "Measurement"},
                              {"drug_exposure", "Drug"},
                              {"specimen", "Specimen"},
                              {"condition_occurrence", "Condition"},
                              {"procedure_occurrence", "Procedure"}};
  return p;
}

}  // namespace

SchemaProfile load_profile(ProfileName name) {
  SchemaProfile p = name == ProfileName::MimicStyle ? mimic_profile() : omop_profile();
  validate(p);
  return p;
}

void validate(const SchemaProfile& p) {
  std::set<std::string> names;
  for (const auto& t : p.tables) {
    if (!names.insert(to_lower(t.name)).second) throw SchemaError("duplicate table " + t.name);
    if (!t.has_column(t.primary_key)) throw SchemaError(t.name + ": primary key column missing");
    std::map<ColumnRole, int> counts;
    for (const auto& [role, col] : t.roles) {
      if (!t.has_column(col)) throw SchemaError(t.name + ": role " + std::string(to_string(role)) + " names unknown column " + col);
      ++counts[role];
    }
    for (const auto& [role, n] : counts) {
      bool icd_label = role == ColumnRole::Label && t.dictionary && t.has_column("short_title") && t.has_column("long_title");
      if (n > 1 && !(icd_label && n == 2))
        throw SchemaError(t.name + ": role " + std::string(to_string(role)) + " mapped to more than one column");
    }
    if (t.role_column(ColumnRole::PointTime) && t.role_column(ColumnRole::StartTime))
      throw SchemaError(t.name + ": both point and interval time roles");
    if (t.role_column(ColumnRole::StartTime).has_value() != t.role_column(ColumnRole::EndTime).has_value())
      throw SchemaError(t.name + ": interval time needs both start and end");
  }
  for (const auto& j : p.joins) {
    const auto* child = p.find_table(j.child_table);
    const auto* dict = p.find_table(j.dict_table);
    if (!child || !dict) throw SchemaError("join references unknown table " + j.child_table + "/" + j.dict_table);
    if (!child->has_column(j.child_column) || !dict->has_column(j.dict_column))
      throw SchemaError("join " + j.child_table + "." + j.child_column + " -> " + j.dict_table + "." + j.dict_column +
                        " references a missing column");
  }
  for (const auto& pair : p.legal_pairs) {
    const auto& ev = p.table(pair.event_table);
    if (!ev.role_column(ColumnRole::AdmissionKey)) throw SchemaError(ev.name + ": event table without admission key");
    if (pair.dict_table) {
      bool joined = false;
      for (const auto& j : p.joins_for(pair.event_table)) joined |= iequals(j.dict_table, *pair.dict_table);
      if (!joined) throw SchemaError("pair " + to_string(pair) + " has no join");
    } else if (!ev.role_column(ColumnRole::Label)) {
      throw SchemaError(ev.name + ": dictionary-less pair needs a label column");
    }
  }
  for (const auto& src : p.item_sources) {
    const auto& t = p.table(src.table);
    for (const auto& c : src.label_columns)
      if (!t.has_column(c)) throw SchemaError("item source " + src.table + "." + c + " missing");
  }
}

void apply_profile_overrides(SchemaProfile& profile, std::istream& in) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto text = trim(line);
    if (text.empty()) continue;
    auto eq = text.find('=');
    auto lhs = trim(text.substr(0, eq == std::string::npos ? 0 : eq));
    auto dot = lhs.find('.');
    if (eq == std::string::npos || dot == std::string::npos)
      throw SchemaError("profile override line " + std::to_string(lineno) + ": expected table.column = new_name");
    std::string table_name(lhs.substr(0, dot));
    std::string old_col(trim(lhs.substr(dot + 1)));
    std::string new_col(trim(text.substr(eq + 1)));
    if (new_col.empty()) throw SchemaError("profile override line " + std::to_string(lineno) + ": empty column name");
    auto* t = const_cast<TableSpec*>(profile.find_table(table_name));
    if (!t) throw SchemaError("profile override line " + std::to_string(lineno) + ": unknown table " + table_name);
    auto idx = t->column_index(old_col);
    if (!idx) throw SchemaError("profile override line " + std::to_string(lineno) + ": unknown column " + old_col);
    std::string old_name = t->columns[*idx].name;
    t->columns[*idx].name = new_col;
    for (auto& [role, c] : t->roles)
      if (c == old_name) c = new_col;
    if (t->primary_key == old_name) t->primary_key = new_col;
    for (auto& j : profile.joins) {
      if (iequals(j.child_table, t->name) && j.child_column == old_name) j.child_column = new_col;
      if (iequals(j.dict_table, t->name) && j.dict_column == old_name) j.dict_column = new_col;
    }
    for (auto& src : profile.item_sources)
      if (iequals(src.table, t->name))
        for (auto& c : src.label_columns)
          if (c == old_name) c = new_col;
  }
  validate(profile);
}

const SchemaMapping& standard_mapping() {
  static const SchemaMapping mapping = [] {
    SchemaMapping m;
    auto add = [&m](std::string mt, std::string mc, std::optional<std::pair<std::string, std::string>> o) {
      SchemaMapping::Pair pair{{std::move(mt), std::move(mc)}, std::nullopt};
      if (o) pair.omop = ColumnRef{o->first, o->second};
      m.pairs.push_back(std::move(pair));
    };
    using P = std::pair<std::string, std::string>;
    for (const char* t : {"chartevents", "labevents", "outputevents"}) {
      add(t, "charttime", P{"measurement", "measurement_datetime"});
      add(t, "valuenum", P{"measurement", "value_as_number"});
      add(t, "valueuom", P{"measurement", "unit_source_value"});
    }
    add("microbiologyevents", "charttime", P{"measurement", "measurement_datetime"});
    add("microbiologyevents", "charttime", P{"specimen", "specimen_datetime"});
    add("microbiologyevents", "org_name", P{"concept", "concept_name"});
    add("microbiologyevents", "spec_type_desc", P{"concept", "concept_name"});
    add("inputevents_mv", "starttime", P{"drug_exposure", "drug_exposure_start_date"});
    add("inputevents_mv", "endtime", P{"drug_exposure", "drug_exposure_end_date"});
    for (const char* c : {"amount", "amountuom", "rate", "rateuom"}) add("inputevents_mv", c, std::nullopt);
    add("inputevents_cv", "charttime", P{"drug_exposure", "drug_exposure_start_date"});
    add("inputevents_cv", "charttime", P{"drug_exposure", "drug_exposure_end_date"});
    for (const char* c : {"amount", "amountuom", "rate", "rateuom"}) add("inputevents_cv", c, std::nullopt);
    add("prescriptions", "startdate", P{"drug_exposure", "drug_exposure_start_date"});
    add("prescriptions", "enddate", P{"drug_exposure", "drug_exposure_end_date"});
    add("prescriptions", "dose_val_rx", std::nullopt);
    add("prescriptions", "dose_unit_rx", std::nullopt);
    add("prescriptions", "drug", P{"concept", "concept_name"});
    add("d_items", "label", P{"concept", "concept_name"});
    add("d_labitems", "label", P{"concept", "concept_name"});
    for (const char* t : {"d_icd_diagnoses", "d_icd_procedures"}) {
      add(t, "short_title", P{"concept", "concept_name"});
      add(t, "long_title", P{"concept", "concept_name"});
    }
    return m;
  }();
  return mapping;
}

std::vector<ColumnRef> translate_column(const SchemaMapping& mapping, const ColumnRef& src) {
  ColumnRef key{to_lower(src.table), to_lower(src.column)};
  std::vector<ColumnRef> out;
  bool known = false;
  for (const auto& pair : mapping.pairs) {
    if (pair.mimic == key) {
      known = true;
      if (pair.omop && std::find(out.begin(), out.end(), *pair.omop) == out.end()) out.push_back(*pair.omop);
    } else if (pair.omop && *pair.omop == key) {
      known = true;
      if (std::find(out.begin(), out.end(), pair.mimic) == out.end()) out.push_back(pair.mimic);
    }
  }
  if (!known) throw SchemaError("column " + to_string(src) + " is not covered by the schema mapping");
  return out;
}

}  // namespace ehrcheck
