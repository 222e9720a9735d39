#include "ehrcheck/synth_fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>

#include "ehrcheck/errors.hpp"
#include "ehrcheck/extraction.hpp"
#include "ehrcheck/text_util.hpp"

namespace ehrcheck {

using nlohmann::json;

int Rng::uniform(int lo, int hi) {
  if (hi < lo) throw std::invalid_argument("empty range");
  return std::uniform_int_distribution<int>(lo, hi)(engine_);
}

double Rng::real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

bool Rng::chance(double p) { return real(0.0, 1.0) < p; }

std::string_view to_string(ErrorClass c) {
  switch (c) {
    case ErrorClass::TimeShift: return "timeShift";
    case ErrorClass::ValuePerturb: return "valuePerturb";
    case ErrorClass::UnitSwap: return "unitSwap";
    case ErrorClass::MissingEntity: return "missingEntity";
    case ErrorClass::Compound: return "compound";
  }
  return "?";
}

void InjectionSpec::validate() const {
  for (int c : {notes, entities_per_note, time_shift, value_perturb, unit_swap, missing_entity, compound, type3_per_note,
                distractor_admissions})
    if (c < 0) throw std::invalid_argument("injection spec counts must be >= 0");
  if (time_shift_hours.empty()) throw std::invalid_argument("time_shift_hours must not be empty");
  for (int h : time_shift_hours)
    if (h < 1 || h > 12) throw std::invalid_argument("time shifts must be 1..12 hours");
  if (category_mix[0] + category_mix[1] + category_mix[2] <= 0 || category_mix[0] < 0 || category_mix[1] < 0 ||
      category_mix[2] < 0)
    throw std::invalid_argument("category mix needs a positive weight");
  if (total_injections() > notes * entities_per_note)
    throw std::invalid_argument("more injected errors (" + std::to_string(total_injections()) + ") than entities (" +
                                std::to_string(notes * entities_per_note) + ")");
}

namespace {

enum class Kind { Chart, Lab, Output, InputCv, InputMv, Rx, Micro, Dx, Px };

struct CatalogItem {
  Kind kind;
  const char* surface;
  const char* label;
  const char* unit = "";
  const char* alt_unit = "";
  double lo = 0;
  double hi = 0;
  int decimals = 0;
  const char* organism = "";
  const char* code = "";
  const char* short_title = "";
};

// Labels within one dictionary (and within one OMOP domain) stay below the
// search threshold against every other surface, so each surface finds only
// its own item.
const std::vector<CatalogItem>& catalog() {
  static const std::vector<CatalogItem> items{
      {Kind::Chart, "HR", "Heart Rate", "bpm", "/min", 55, 125, 0},
      {Kind::Chart, "SpO2", "O2 Saturation Pulseoxymetry", "%", "mmHg", 88, 100, 0},
      {Kind::Chart, "Temperature Fahrenheit", "Temperature Fahrenheit", "F", "C", 97, 102.5, 1},
      {Kind::Chart, "Wt", "Daily Weight", "kg", "lb", 50, 110, 1},
      {Kind::Chart, "Central Venous Pressure", "Central Venous Pressure", "mmHg", "cmH2O", 2, 18, 0},
      {Kind::Lab, "Hgb", "Hemoglobin", "g/dL", "g/L", 7, 15, 1},
      {Kind::Lab, "Potassium", "Potassium", "mEq/L", "mmol/L", 3, 5.5, 1},
      {Kind::Lab, "Cr", "Creatinine", "mg/dL", "umol/L", 0.5, 3, 1},
      {Kind::Lab, "Na", "Sodium", "mEq/L", "mmol/L", 128, 148, 0},
      {Kind::Lab, "Lactate", "Lactate", "mmol/L", "mg/dL", 0.8, 4.5, 1},
      {Kind::Lab, "Plt", "Platelet Count", "K/uL", "x10E9/L", 90, 400, 0},
      {Kind::Lab, "WBC", "White Blood Cells", "K/uL", "x10E9/L", 3, 18, 1},
      {Kind::Lab, "Magnesium", "Magnesium", "mg/dL", "mEq/L", 1.5, 2.8, 1},
      {Kind::Lab, "BUN", "Urea Nitrogen", "mg/dL", "mmol/L", 8, 60, 0},
      {Kind::Output, "UOP", "Foley", "mL", "L", 100, 900, 0},
      {Kind::Output, "Chest Tube", "Chest Tube", "mL", "cc", 20, 300, 0},
      {Kind::InputCv, "NS", "Normal Saline", "mL", "L", 250, 1000, 0},
      {Kind::InputCv, "LR", "Lactated Ringers", "mL", "L", 250, 1000, 0},
      {Kind::InputCv, "PRBC", "Packed Red Blood Cells", "mL", "units", 250, 350, 0},
      {Kind::InputMv, "Levophed", "Norepinephrine", "mg", "mcg", 1, 8, 1},
      {Kind::InputMv, "Propofol", "Propofol", "mg", "mcg", 50, 400, 0},
      {Kind::Rx, "Lasix", "Furosemide", "mg", "mL", 20, 80, 0},
      {Kind::Rx, "Lopressor", "Metoprolol Tartrate", "mg", "mcg", 12, 100, 0},
      {Kind::Rx, "Tylenol", "Acetaminophen", "mg", "g", 325, 1000, 0},
      {Kind::Rx, "Coumadin", "Warfarin", "mg", "mcg", 1, 10, 0},
      {Kind::Rx, "Zosyn", "Piperacillin-Tazobactam", "g", "mg", 2, 4.5, 2},
      {Kind::Rx, "Vancomycin", "Vancomycin", "mg", "g", 500, 1500, 0},
      {Kind::Rx, "Pantoprazole", "Pantoprazole", "mg", "mcg", 20, 80, 0},
      {Kind::Micro, "BLOOD CULTURE", "BLOOD CULTURE", "", "", 0, 0, 0, "ESCHERICHIA COLI"},
      {Kind::Micro, "STOOL", "STOOL", "", "", 0, 0, 0, "KLEBSIELLA PNEUMONIAE"},
      {Kind::Micro, "SPUTUM", "SPUTUM", "", "", 0, 0, 0, "STAPH AUREUS COAG +"},
      {Kind::Dx, "CHF", "Congestive heart failure, unspecified", "", "", 0, 0, 0, "", "4280", "CHF NOS"},
      {Kind::Dx, "UTI", "Urinary tract infection, site not specified", "", "", 0, 0, 0, "", "5990",
       "Urin tract infection NOS"},
      {Kind::Dx, "PNA", "Pneumonia, organism unspecified", "", "", 0, 0, 0, "", "486", "Pneumonia, organism NOS"},
      {Kind::Px, "ETT", "Insertion of endotracheal tube", "", "", 0, 0, 0, "", "9604", "Insert endotracheal tube"},
      {Kind::Px, "CVL", "Venous catheterization, not elsewhere classified", "", "", 0, 0, 0, "", "3893",
       "Venous cath NEC"},
      {Kind::Px, "EGD", "Other endoscopy of small intestine", "", "", 0, 0, 0, "", "4513", "Other small bowel endoscopy"},
  };
  return items;
}

const std::vector<std::string>& organisms() {
  static const std::vector<std::string> o{"ESCHERICHIA COLI", "KLEBSIELLA PNEUMONIAE", "STAPH AUREUS COAG +"};
  return o;
}

std::string alt_organism(const std::string& org) {
  const auto& o = organisms();
  auto it = std::find(o.begin(), o.end(), org);
  return o[static_cast<std::size_t>((it - o.begin()) + 1) % o.size()];
}

TablePair mimic_pair(Kind k) {
  switch (k) {
    case Kind::Chart: return {"chartevents", "d_items"};
    case Kind::Lab: return {"labevents", "d_labitems"};
    case Kind::Output: return {"outputevents", "d_items"};
    case Kind::InputCv: return {"inputevents_cv", "d_items"};
    case Kind::InputMv: return {"inputevents_mv", "d_items"};
    case Kind::Rx: return {"prescriptions", std::nullopt};
    case Kind::Micro: return {"microbiologyevents", "d_items"};
    case Kind::Dx: return {"diagnoses_icd", "d_icd_diagnoses"};
    case Kind::Px: return {"procedures_icd", "d_icd_procedures"};
  }
  return {};
}

TablePair omop_pair(Kind k) {
  switch (k) {
    case Kind::Chart:
    case Kind::Lab:
    case Kind::Output: return {"measurement", "concept"};
    case Kind::InputCv:
    case Kind::InputMv:
    case Kind::Rx: return {"drug_exposure", "concept"};
    case Kind::Micro: return {"specimen", "concept"};
    case Kind::Dx: return {"condition_occurrence", "concept"};
    case Kind::Px: return {"procedure_occurrence", "concept"};
  }
  return {};
}

TablePair pair_for(Kind k, ProfileName p) { return p == ProfileName::MimicStyle ? mimic_pair(k) : omop_pair(k); }

enum class Regime { ExactDateTime, ExactDate, Admission, HospitalDay, Yesterday, Unspecified, None };

WindowForm form_for(Regime r, NoteCategory c) {
  switch (r) {
    case Regime::ExactDateTime:
    case Regime::ExactDate: return WindowForm::Exact;
    case Regime::Admission: return WindowForm::AdmissionAnchored;
    case Regime::HospitalDay:
    case Regime::Yesterday: return WindowForm::CalculatedAnchored;
    case Regime::Unspecified:
      return c == NoteCategory::DischargeSummary ? WindowForm::StayRange : WindowForm::CalculatedAnchored;
    case Regime::None: return WindowForm::NoTime;
  }
  return WindowForm::NoTime;
}

struct Entity {
  const CatalogItem* item = nullptr;
  EntityType type = EntityType::Type1;
  Regime regime = Regime::Unspecified;
  int hospital_day = 0;
  DateTime when{};
  std::string time_text;
  std::string value_text;
  int line_no = 0;
  std::optional<ErrorClass> error;
  int hours = 0;
  TimeWindow window;
};

struct Draft {
  Note note;
  std::int64_t subject = 0;
  std::vector<Entity> entities;
  std::vector<std::pair<int, std::string>> type3;  // line, surface
};

std::string format_scaled(std::int64_t v, int decimals) {
  if (decimals == 0) return std::to_string(v);
  std::int64_t scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  auto frac = std::to_string(v % scale);
  return std::to_string(v / scale) + "." + std::string(static_cast<std::size_t>(decimals) - frac.size(), '0') + frac;
}

std::int64_t pow10(int d) {
  std::int64_t s = 1;
  for (int i = 0; i < d; ++i) s *= 10;
  return s;
}

std::string random_value(const CatalogItem& it, Rng& rng) {
  auto scale = pow10(it.decimals);
  auto lo = static_cast<int>(std::llround(it.lo * static_cast<double>(scale)));
  auto hi = static_cast<int>(std::llround(it.hi * static_cast<double>(scale)));
  return format_scaled(rng.uniform(lo, hi), it.decimals);
}

std::string perturbed_value(const CatalogItem& it, const std::string& text, Rng& rng) {
  auto d = Decimal::parse(text);
  auto scale = pow10(it.decimals);
  auto v = static_cast<std::int64_t>(std::llround(d->to_double() * static_cast<double>(scale)));
  // Step by at least 1 in the last shown digit (and never to zero or below).
  std::int64_t step = std::max<std::int64_t>(1, scale / 2) * rng.uniform(2, 9);
  std::int64_t out = v - step > 0 && rng.chance(0.5) ? v - step : v + step;
  return format_scaled(out, it.decimals);
}

DateTime plus_seconds(const DateTime& t, int seconds) {
  int s = t.seconds.value_or(0) + seconds;
  int days = s >= 0 ? s / 86400 : -((-s + 86399) / 86400);
  s -= days * 86400;
  return DateTime{add_days(t.date, days), s};
}

DateTime with_date(const DateTime& t, Date d) { return DateTime{d, t.seconds}; }

NoteCategory pick_category(const std::array<int, 3>& mix, Rng& rng) {
  int r = rng.uniform(1, mix[0] + mix[1] + mix[2]);
  if (r <= mix[0]) return NoteCategory::DischargeSummary;
  if (r <= mix[0] + mix[1]) return NoteCategory::PhysicianNote;
  return NoteCategory::NursingNote;
}

std::vector<Regime> allowed_regimes(const CatalogItem& it, NoteCategory c) {
  if (it.kind == Kind::Dx || it.kind == Kind::Px) return {Regime::None};
  std::vector<Regime> out;
  for (auto r : {Regime::ExactDateTime, Regime::ExactDate, Regime::Admission, Regime::HospitalDay, Regime::Yesterday,
                 Regime::Unspecified}) {
    if (it.kind == Kind::Rx && r == Regime::ExactDateTime) continue;  // prescriptions carry dates only
    auto form = form_for(r, c);
    if (find_template(ProfileName::MimicStyle, mimic_pair(it.kind).event_table, form)) out.push_back(r);
  }
  return out;
}

TimeTag tag_for(const Entity& e) {
  TimeTag t;
  switch (e.regime) {
    case Regime::ExactDateTime:
    case Regime::ExactDate:
      t.regime = TimeRegime::ExactTimestamp;
      t.anchor = TimeAnchor{AnchorKind::Literal, 0,
                            e.regime == Regime::ExactDate ? DateTime::on(e.when.date) : e.when};
      break;
    case Regime::Admission:
      t.regime = TimeRegime::Narrative;
      t.anchor = TimeAnchor{AnchorKind::Admission, 0, {}};
      break;
    case Regime::HospitalDay:
      t.regime = TimeRegime::Narrative;
      t.anchor = TimeAnchor{AnchorKind::HospitalDay, e.hospital_day, {}};
      break;
    case Regime::Yesterday:
      t.regime = TimeRegime::Narrative;
      t.anchor = TimeAnchor{AnchorKind::Yesterday, 0, {}};
      break;
    case Regime::Unspecified:
    case Regime::None: break;
  }
  return t;
}

int time_option(Regime r) {
  switch (r) {
    case Regime::ExactDateTime:
    case Regime::ExactDate: return 2;
    case Regime::Admission:
    case Regime::HospitalDay:
    case Regime::Yesterday: return 3;
    default: return 1;
  }
}

std::string entity_line(const Entity& e) {
  std::string tp;
  switch (e.regime) {
    case Regime::ExactDateTime: tp = " at " + e.time_text; break;
    case Regime::ExactDate: tp = " on " + e.time_text; break;
    case Regime::Admission: tp = " " + e.time_text; break;
    case Regime::HospitalDay: tp = " on " + e.time_text; break;
    case Regime::Yesterday: tp = " " + e.time_text; break;
    default: break;
  }
  const auto& it = *e.item;
  switch (it.kind) {
    case Kind::Micro: return std::string(it.surface) + " sent" + tp + " grew " + it.organism + ".";
    case Kind::Dx: return std::string("Managed ") + it.surface + " during this stay.";
    case Kind::Px: return std::string(it.surface) + " performed without complication.";
    case Kind::Rx:
    case Kind::InputCv:
    case Kind::InputMv:
      if (e.type == EntityType::Type2) return std::string(it.surface) + " started" + tp + ".";
      return std::string(it.surface) + " " + e.value_text + " " + it.unit + " given" + tp + ".";
    default: return std::string(it.surface) + " " + e.value_text + " " + it.unit + tp + ".";
  }
}

const std::vector<std::string>& filler_lines() {
  static const std::vector<std::string> f{
      "Patient resting comfortably in bed.",
      "Family at bedside and updated.",
      "Tolerating diet without difficulty.",
      "Ambulating with assistance of one.",
      "Pain controlled on current regimen.",
      "Skin intact without breakdown.",
      "Lungs clear to auscultation bilaterally.",
      "Alert and oriented to person and place.",
  };
  return f;
}

struct Type3Phrase {
  const char* surface;
  const char* line;
  const char* description;
};

const std::vector<Type3Phrase>& type3_phrases() {
  static const std::vector<Type3Phrase> t{
      {"overall condition", "Overall condition improving.", "general status"},
      {"mental status", "Mental status at baseline.", "cognition"},
      {"appetite", "Appetite fair.", "intake"},
  };
  return t;
}

struct Columns {
  std::vector<std::string> value, unit, time, organism;
};

std::vector<ColumnRef> role_refs(const TableSpec& t, std::initializer_list<ColumnRole> roles) {
  std::vector<ColumnRef> out;
  for (auto r : roles)
    for (const auto& c : t.role_columns(r)) out.push_back({t.name, c});
  return out;
}

std::vector<ColumnRef> time_refs(const TableSpec& t) {
  if (t.has_interval_time()) return role_refs(t, {ColumnRole::StartTime, ColumnRole::EndTime});
  return role_refs(t, {ColumnRole::PointTime});
}

// Columns a perturbation touches in `profile`; empty when the profile has no
// counterpart (the error is invisible there).
std::vector<ColumnRef> error_columns(const Entity& e, const SchemaProfile& profile) {
  const auto& t = profile.table(pair_for(e.item->kind, profile.name).event_table);
  switch (*e.error) {
    case ErrorClass::TimeShift: return time_refs(t);
    case ErrorClass::ValuePerturb:
      if (e.item->kind == Kind::Micro) return role_refs(t, {ColumnRole::Organism});
      return role_refs(t, {ColumnRole::Value});
    case ErrorClass::UnitSwap: return role_refs(t, {ColumnRole::Unit});
    case ErrorClass::Compound: return role_refs(t, {ColumnRole::Value, ColumnRole::Unit});
    case ErrorClass::MissingEntity: return {};
  }
  return {};
}

std::vector<ColumnRole> condition_roles(const Entity& e) {
  std::vector<ColumnRole> out;
  if (e.type == EntityType::Type1) out = {ColumnRole::Value, ColumnRole::Unit};
  if (e.item->kind == Kind::Micro) out = {ColumnRole::Organism, ColumnRole::Specimen};
  return out;
}

bool survives(const Entity& e, const SchemaProfile& mimic, const SchemaProfile& omop) {
  const auto& src = mimic.table(mimic_pair(e.item->kind).event_table);
  const auto& dst = omop.table(omop_pair(e.item->kind).event_table);
  for (auto r : condition_roles(e))
    if (src.role_column(r) && !dst.role_column(r)) return false;
  return true;
}

// ---- store construction ----

struct StoreBuilder {
  RecordStore store{load_profile(ProfileName::MimicStyle)};
  std::map<std::string, std::int64_t> next_id;
  std::map<std::string, std::int64_t> itemids;  // label -> itemid (d_items / d_labitems)

  std::int64_t id(const std::string& table) { return ++next_id[table]; }

  void dictionaries() {
    std::int64_t items = 220000, labs = 50800;
    for (const auto& it : catalog()) {
      auto pair = mimic_pair(it.kind);
      if (pair.dict_table == "d_items") {
        itemids[it.label] = ++items;
        store.insert_row("d_items", {id("d_items"), items, std::string(it.label)});
      } else if (pair.dict_table == "d_labitems") {
        itemids[it.label] = ++labs;
        store.insert_row("d_labitems", {id("d_labitems"), labs, std::string(it.label)});
      } else if (pair.dict_table) {
        store.insert_row(*pair.dict_table,
                         {id(*pair.dict_table), std::string(it.code), std::string(it.short_title), std::string(it.label)});
      }
    }
    for (const auto& o : organisms()) {
      itemids[o] = ++items;
      store.insert_row("d_items", {id("d_items"), items, o});
    }
  }

  // One event row. `when` is the (possibly shifted) event time; `end_days`
  // is the prescription length.
  void event(const CatalogItem& it, std::int64_t subject, std::int64_t hadm, const DateTime& when,
             const std::string& value, const std::string& unit, const std::string& organism, int end_days) {
    auto table = mimic_pair(it.kind).event_table;
    CellValue v = value.empty() ? CellValue(Null{}) : CellValue(*Decimal::parse(value));
    CellValue u = unit.empty() ? CellValue(Null{}) : CellValue(unit);
    switch (it.kind) {
      case Kind::Chart:
      case Kind::Lab:
      case Kind::Output:
        store.insert_row(table, {id(table), subject, hadm, itemids.at(it.label), when, v, u});
        break;
      case Kind::InputCv:
        store.insert_row(table, {id(table), subject, hadm, itemids.at(it.label), when, v, u, Null{}, Null{}});
        break;
      case Kind::InputMv:
        store.insert_row(table,
                         {id(table), subject, hadm, itemids.at(it.label), when, plus_seconds(when, 1800), v, u, Null{}, Null{}});
        break;
      case Kind::Rx:
        store.insert_row(table, {id(table), subject, hadm, DateTime::on(when.date),
                                 DateTime::on(add_days(when.date, end_days)), std::string(it.label), v, u});
        break;
      case Kind::Micro:
        store.insert_row(table, {id(table), subject, hadm, when, itemids.at(it.label), std::string(it.label),
                                 itemids.at(organism), organism});
        break;
      case Kind::Dx:
      case Kind::Px: store.insert_row(table, {id(table), subject, hadm, std::string(it.code)}); break;
    }
  }
};

DateTime shifted_time(const Entity& e) {
  if (e.regime == Regime::ExactDateTime) return plus_seconds(e.when, e.hours * 3600);
  if (e.regime == Regime::ExactDate) return with_date(e.when, add_days(e.when.date, 2));
  return with_date(e.when, add_days(e.window.hi.date, 2));
}

std::string iso(const DateTime& t) { return t.to_string(); }

}  // namespace

FixtureSet generate(const InjectionSpec& spec, ProfileName profile) {
  spec.validate();
  Rng rng(spec.seed);
  const auto mimic = load_profile(ProfileName::MimicStyle);
  const auto target = load_profile(profile);
  const auto base = *parse_date("2150-01-01");

  // ---- notes and entities ----
  std::vector<Draft> drafts;
  for (int i = 0; i < spec.notes; ++i) {
    Draft d;
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "note-%03d", i + 1);
    d.note.note_id = idbuf;
    d.note.category = pick_category(spec.category_mix, rng);
    d.note.admission_key = 100001 + i;
    d.subject = 10001 + i;
    Date d0 = add_days(base, rng.uniform(0, 300));
    d.note.admit_time = DateTime::at(d0, rng.uniform(0, 20), 5 * rng.uniform(0, 11), 0);
    int stay = rng.uniform(4, 8);
    int span = d.note.category == NoteCategory::DischargeSummary ? stay : rng.uniform(2, stay - 1);
    d.note.chart_time = DateTime::at(add_days(d0, span), d.note.category == NoteCategory::DischargeSummary ? 14 : 7, 30, 0);

    std::vector<std::size_t> order(catalog().size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    rng.shuffle(order);
    for (auto idx : order) {
      if (static_cast<int>(d.entities.size()) == spec.entities_per_note) break;
      const auto& it = catalog()[idx];
      auto regimes = allowed_regimes(it, d.note.category);
      if (regimes.empty()) continue;
      Entity e;
      e.item = &it;
      e.regime = rng.pick(regimes);
      bool drug = it.kind == Kind::Rx || it.kind == Kind::InputCv || it.kind == Kind::InputMv;
      if (it.kind == Kind::Micro || it.kind == Kind::Dx || it.kind == Kind::Px) e.type = EntityType::Type2;
      else if (drug && rng.chance(0.3)) e.type = EntityType::Type2;
      if (e.type == EntityType::Type1) e.value_text = random_value(it, rng);
      Date day = d0;
      switch (e.regime) {
        case Regime::ExactDateTime:
        case Regime::ExactDate:
        case Regime::Unspecified:
          day = e.regime == Regime::Unspecified && d.note.category != NoteCategory::DischargeSummary
                    ? add_days(d.note.chart_time.date, -rng.uniform(0, 1))
                    : add_days(d0, rng.uniform(0, span));
          break;
        case Regime::Admission: day = add_days(d0, rng.uniform(0, 1)); break;
        case Regime::HospitalDay:
          e.hospital_day = rng.uniform(2, span + 1);
          day = add_days(d0, e.hospital_day - 1);
          break;
        case Regime::Yesterday: day = add_days(d.note.chart_time.date, -1); break;
        case Regime::None: break;
      }
      e.when = it.kind == Kind::Rx ? DateTime::on(day) : DateTime::at(day, rng.uniform(0, 22), 5 * rng.uniform(0, 11), 0);
      switch (e.regime) {
        case Regime::ExactDateTime: e.time_text = bracket_date(e.when); break;
        case Regime::ExactDate: e.time_text = bracket_date(DateTime::on(day)); break;
        case Regime::Admission: e.time_text = "on admission"; break;
        case Regime::HospitalDay: e.time_text = "HD #" + std::to_string(e.hospital_day); break;
        case Regime::Yesterday: e.time_text = "yesterday"; break;
        default: break;
      }
      e.window = e.regime == Regime::None ? TimeWindow::none() : compute_window(tag_for(e), d.note);
      d.entities.push_back(std::move(e));
    }
    if (static_cast<int>(d.entities.size()) < spec.entities_per_note)
      throw std::invalid_argument("entities_per_note exceeds the fixture catalog");
    drafts.push_back(std::move(d));
  }

  // ---- injections ----
  std::vector<Entity*> all;
  for (auto& d : drafts)
    for (auto& e : d.entities) all.push_back(&e);
  auto eligible = [](const Entity& e, ErrorClass c) {
    switch (c) {
      case ErrorClass::Compound:
      case ErrorClass::UnitSwap: return e.type == EntityType::Type1 && *e.item->unit;
      case ErrorClass::ValuePerturb: return e.type == EntityType::Type1 || e.item->kind == Kind::Micro;
      case ErrorClass::TimeShift: return e.regime != Regime::None;
      case ErrorClass::MissingEntity: return true;
    }
    return false;
  };
  int exact_shifts = 0;
  for (auto [cls, count] : std::vector<std::pair<ErrorClass, int>>{{ErrorClass::Compound, spec.compound},
                                                                    {ErrorClass::UnitSwap, spec.unit_swap},
                                                                    {ErrorClass::ValuePerturb, spec.value_perturb},
                                                                    {ErrorClass::TimeShift, spec.time_shift},
                                                                    {ErrorClass::MissingEntity, spec.missing_entity}}) {
    std::vector<Entity*> pool;
    for (auto* e : all)
      if (!e->error && eligible(*e, cls)) pool.push_back(e);
    if (static_cast<int>(pool.size()) < count)
      throw std::invalid_argument("cannot place " + std::to_string(count) + " " + std::string(to_string(cls)) +
                                  " injections: only " + std::to_string(pool.size()) + " eligible entities");
    rng.shuffle(pool);
    if (cls == ErrorClass::TimeShift) {
      // Alternate hour shifts of exact timestamps with day-level shifts,
      // starting with an exact one.
      std::vector<Entity*> exact, other, mixed;
      for (auto* e : pool) (e->regime == Regime::ExactDateTime ? exact : other).push_back(e);
      for (std::size_t i = 0; i < std::max(exact.size(), other.size()); ++i) {
        if (i < exact.size()) mixed.push_back(exact[i]);
        if (i < other.size()) mixed.push_back(other[i]);
      }
      pool = std::move(mixed);
    }
    for (int k = 0; k < count; ++k) {
      auto* e = pool[static_cast<std::size_t>(k)];
      e->error = cls;
      if (cls == ErrorClass::TimeShift && e->regime == Regime::ExactDateTime)
        e->hours = spec.time_shift_hours[static_cast<std::size_t>(exact_shifts++) % spec.time_shift_hours.size()];
    }
  }

  // ---- note text ----
  for (auto& d : drafts) {
    std::vector<std::string> lines;
    switch (d.note.category) {
      case NoteCategory::DischargeSummary:
        lines.push_back("Admission Date: " + bracket_date(DateTime::on(d.note.admit_time.date)) +
                        "  Discharge Date: " + bracket_date(DateTime::on(d.note.chart_time.date)));
        break;
      case NoteCategory::PhysicianNote: lines.push_back("Physician Progress Note"); break;
      case NoteCategory::NursingNote: lines.push_back("Nursing Progress Note"); break;
    }
    lines.push_back("Past Medical History:");
    lines.push_back("Hypertension, hyperlipidemia, remote tobacco use.");
    lines.push_back(d.note.category == NoteCategory::DischargeSummary ? "Hospital Course:" : "Events:");
    std::vector<int> type3_slots;
    for (int k = 0; k < spec.type3_per_note; ++k) type3_slots.push_back(rng.uniform(0, spec.entities_per_note));
    for (std::size_t k = 0; k <= d.entities.size(); ++k) {
      for (int slot : type3_slots)
        if (slot == static_cast<int>(k)) {
          const auto& p = type3_phrases()[static_cast<std::size_t>(d.type3.size()) % type3_phrases().size()];
          lines.push_back(p.line);
          d.type3.emplace_back(static_cast<int>(lines.size()), p.surface);
        }
      if (k == d.entities.size()) break;
      if (rng.chance(0.4)) lines.push_back(rng.pick(filler_lines()));
      lines.push_back(entity_line(d.entities[k]));
      d.entities[k].line_no = static_cast<int>(lines.size());
    }
    if (d.note.category == NoteCategory::DischargeSummary) {
      lines.push_back("Discharge Instructions:");
      lines.push_back("Return if symptoms worsen.");
    } else {
      lines.push_back("Plan:");
      lines.push_back("Continue current management.");
    }
    for (std::size_t k = 0; k < lines.size(); ++k) d.note.lines.push_back(NoteLine{static_cast<int>(k) + 1, lines[k]});
  }

  // ---- database ----
  StoreBuilder sb;
  sb.dictionaries();
  for (auto& d : drafts) {
    std::set<const CatalogItem*> used;
    for (auto& e : d.entities) {
      used.insert(e.item);
      if (e.error == ErrorClass::MissingEntity) continue;
      auto when = e.error == ErrorClass::TimeShift ? shifted_time(e) : e.when;
      std::string value = e.value_text, unit = e.item->unit;
      if (e.type == EntityType::Type2 && *e.item->unit) value = random_value(*e.item, rng);
      if (e.error == ErrorClass::ValuePerturb || e.error == ErrorClass::Compound) {
        if (e.item->kind != Kind::Micro) value = perturbed_value(*e.item, value, rng);
      }
      if (e.error == ErrorClass::UnitSwap || e.error == ErrorClass::Compound) unit = e.item->alt_unit;
      std::string org = e.item->organism;
      if (e.item->kind == Kind::Micro && e.error == ErrorClass::ValuePerturb) org = alt_organism(org);
      sb.event(*e.item, d.subject, d.note.admission_key, when, value, unit, org, rng.uniform(0, 2));
    }
    // Rows for items the note does not mention never match its plans.
    for (const auto& it : catalog()) {
      if (used.count(&it) || !rng.chance(0.25)) continue;
      auto day = add_days(d.note.admit_time.date, rng.uniform(0, 3));
      sb.event(it, d.subject, d.note.admission_key, DateTime::at(day, rng.uniform(0, 22), 0, 0),
               *it.unit ? random_value(it, rng) : std::string(), it.unit, *it.organism ? it.organism : "", 1);
    }
  }
  for (int k = 0; k < spec.distractor_admissions; ++k) {
    std::int64_t hadm = 900001 + k;
    auto day = add_days(base, rng.uniform(0, 300));
    for (const auto& it : catalog())
      if (rng.chance(0.5))
        sb.event(it, 90001 + k, hadm, DateTime::at(add_days(day, rng.uniform(0, 5)), rng.uniform(0, 22), 0, 0),
                 *it.unit ? random_value(it, rng) : std::string(), it.unit, *it.organism ? it.organism : "", 1);
  }
  sb.store.freeze();

  FixtureSet fx{profile, profile == ProfileName::MimicStyle ? std::move(sb.store) : migrate_to_omop(sb.store), {}, {}, {}, {}, {}};

  // ---- script and gold ----
  ScriptBuilder script;
  script.set_default("self_correction", format_verdicts(std::vector<std::pair<std::string, bool>>(8, {"the cell matches", true})));
  auto patterns = default_section_patterns();
  for (auto& d : drafts) {
    auto filtered = apply_section_filter(d.note, patterns);
    EqualSplitter splitter;
    auto seg = segment(filtered, spec.segment, splitter);
    for (const auto& sub : seg.subtexts) {
      std::string answer;
      for (const auto& e : d.entities)
        if (e.line_no >= sub.core.first && e.line_no <= sub.core.last)
          answer += "Answer: " + format_ner_item(e.item->surface, e.type, e.type == EntityType::Type1
                                                                              ? std::vector<std::string>{e.value_text}
                                                                              : std::vector<std::string>{}) + "\n";
      for (const auto& [line, surface] : d.type3)
        if (line >= sub.core.first && line <= sub.core.last) {
          std::string desc;
          for (const auto& p : type3_phrases())
            if (surface == p.surface) desc = p.description;
          answer += "Answer: " + format_ner_item(surface, EntityType::Type3, {}, desc) + "\n";
        }
      if (answer.empty()) answer = "Answer: Nothing\n";
      script.add("ner", d.note.note_id, std::to_string(sub.core.first) + "-" + std::to_string(sub.core.last), answer);
    }

    GoldRecord gold;
    gold.note_id = d.note.note_id;
    gold.category = d.note.category;
    for (const auto& e : d.entities) {
      const std::string key = std::string(e.item->surface) + "@" + std::to_string(e.line_no);
      const auto& line_text = d.note.lines[static_cast<std::size_t>(e.line_no) - 1].text;
      script.add("time_filter", d.note.note_id, key,
                 format_time_answer(true, line_text, e.time_text, time_option(e.regime)));
      auto pair = pair_for(e.item->kind, profile);
      script.add("table_identification", d.note.note_id, key, format_table_answer({pair}));
      std::vector<std::pair<std::string, std::string>> cells, normalized;
      bool time_done = false;
      for (const auto& [name, role] : pseudo_columns(pair, target)) {
        std::optional<std::string> raw, norm;
        switch (role) {
          case ColumnRole::Label: raw = norm = e.item->surface; break;
          case ColumnRole::Value:
            if (e.type == EntityType::Type1) raw = norm = e.value_text;
            break;
          case ColumnRole::Unit:
            if (e.type == EntityType::Type1) raw = norm = std::string(e.item->unit);
            break;
          case ColumnRole::PointTime:
          case ColumnRole::StartTime:
            if (!e.time_text.empty() && !time_done) {
              raw = e.time_text;
              auto t = e.regime == Regime::ExactDateTime ? std::optional<DateTime>(e.when)
                                                         : resolve_time_text(e.time_text, d.note.admit_time, d.note.chart_time);
              norm = t ? iso(*t) : e.time_text;
              time_done = true;
            }
            break;
          case ColumnRole::Organism:
            if (*e.item->organism) raw = norm = std::string(e.item->organism);
            break;
          case ColumnRole::Specimen:
            if (e.item->kind == Kind::Micro) raw = norm = std::string(e.item->label);
            break;
          default: break;
        }
        if (raw) {
          cells.emplace_back(name, *raw);
          normalized.emplace_back(name, *norm);
        }
      }
      script.add("pseudo_table", d.note.note_id, key, format_pseudo_row(1, cells));
      script.add("reformat", d.note.note_id, key + "#1", format_reformat_answer(pair.event_table, normalized));

      GoldEntity g;
      g.surface = e.item->surface;
      g.type = e.type;
      g.line_no = e.line_no;
      g.time = e.time_text.empty() ? "NaN" : e.time_text;
      g.label = Label::Consistent;
      if (e.error) {
        auto cols = error_columns(e, target);
        bool visible = *e.error == ErrorClass::MissingEntity || !cols.empty();
        if (visible) {
          g.label = Label::Inconsistent;
          g.missing = *e.error == ErrorClass::MissingEntity;
          for (const auto& c : cols) g.error_columns.push_back(to_string(c));
          g.errors = g.missing ? 1 : static_cast<int>(cols.size());
          fx.injections.push_back(Injection{d.note.note_id, e.item->surface, e.line_no, *e.error, e.hours, cols});
        }
      }
      if (survives(e, mimic, load_profile(ProfileName::OmopStyle)))
        fx.omop_survivors.insert(d.note.note_id + "/" + key);
      gold.entities.push_back(std::move(g));
    }
    for (const auto& [line, surface] : d.type3) {
      GoldEntity g;
      g.surface = surface;
      g.type = EntityType::Type3;
      g.line_no = line;
      gold.entities.push_back(std::move(g));
    }
    std::sort(gold.entities.begin(), gold.entities.end(),
              [](const GoldEntity& a, const GoldEntity& b) { return a.line_no < b.line_no; });
    fx.gold.push_back(std::move(gold));
    fx.notes.push_back(std::move(d.note));
  }
  fx.script = script.json();
  return fx;
}

void write_fixtures(const FixtureSet& fx, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "db");
  write_store_csv(fx.store, dir / "db");
  auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
  };
  {
    auto out = open(dir / "notes.jsonl");
    for (const auto& n : fx.notes) write_note_jsonl(out, n);
  }
  open(dir / "script.json") << fx.script.dump(2) << '\n';
  {
    auto out = open(dir / "gold.jsonl");
    write_gold(out, fx.gold);
  }
  json inj = json::array();
  for (const auto& i : fx.injections) {
    json cols = json::array();
    for (const auto& c : i.columns) cols.push_back(to_string(c));
    inj.push_back(json{{"noteId", i.note_id},
                       {"entity", i.surface},
                       {"position", i.line_no},
                       {"error", to_string(i.error)},
                       {"hours", i.hours},
                       {"columns", cols}});
  }
  open(dir / "injections.json") << json{{"profile", to_string(fx.profile)}, {"injections", inj}}.dump(2) << '\n';
}

// ---- OMOP migration ----

RecordStore migrate_to_omop(const RecordStore& mimic) {
  const auto& src = mimic.profile();
  if (src.name != ProfileName::MimicStyle) throw std::invalid_argument("migration source must be a MIMIC-style store");
  const auto& mapping = standard_mapping();
  RecordStore out(load_profile(ProfileName::OmopStyle));
  const auto& dst = out.profile();

  auto cell = [&](const std::string& table, const Row& row, const std::string& column) -> const CellValue& {
    return row[*src.table(table).column_index(column)];
  };
  auto label_of = [&](const std::string& dict, const std::string& key_column, const CellValue& key,
                      const std::string& label_column) -> std::optional<std::string> {
    for (const auto& r : mimic.rows(dict))
      if (cell(dict, r, key_column) == key) return cell_to_string(cell(dict, r, label_column));
    return std::nullopt;
  };

  std::map<std::pair<std::string, std::string>, std::int64_t> concepts;  // (name, domain)
  std::int64_t next_concept = 2000000;
  auto concept_id = [&](const std::string& name, const std::string& domain) {
    auto key = std::make_pair(name, domain);
    auto it = concepts.find(key);
    if (it != concepts.end()) return it->second;
    concepts.emplace(key, ++next_concept);
    out.insert_row("concept", {next_concept, name, domain});
    return next_concept;
  };
  std::map<std::string, std::int64_t> ids;

  struct Route {
    const char* source;
    const char* dest;
    std::optional<std::string> dict;
    const char* dict_key;
    const char* label_column;
    const char* item_column;
  };
  const std::vector<Route> routes{
      {"chartevents", "measurement", "d_items", "itemid", "label", "itemid"},
      {"labevents", "measurement", "d_labitems", "itemid", "label", "itemid"},
      {"outputevents", "measurement", "d_items", "itemid", "label", "itemid"},
      {"inputevents_cv", "drug_exposure", "d_items", "itemid", "label", "itemid"},
      {"inputevents_mv", "drug_exposure", "d_items", "itemid", "label", "itemid"},
      {"prescriptions", "drug_exposure", std::nullopt, "", "", "drug"},
      {"microbiologyevents", "specimen", "d_items", "itemid", "label", "spec_itemid"},
      {"diagnoses_icd", "condition_occurrence", "d_icd_diagnoses", "icd9_code", "long_title", "icd9_code"},
      {"procedures_icd", "procedure_occurrence", "d_icd_procedures", "icd9_code", "long_title", "icd9_code"},
  };
  for (const auto& route : routes) {
    const auto& s = src.table(route.source);
    const auto& d = dst.table(route.dest);
    const auto& domain = dst.domain_for_event_table.at(route.dest);
    for (const auto& r : mimic.rows(route.source)) {
      std::string name;
      if (route.dict) {
        auto l = label_of(*route.dict, route.dict_key, cell(route.source, r, route.item_column), route.label_column);
        if (!l) continue;  // dangling item reference
        name = *l;
      } else {
        name = cell_to_string(cell(route.source, r, route.item_column));
      }
      Row row(d.columns.size(), Null{});
      row[*d.column_index(d.primary_key)] = ++ids[route.dest];
      row[*d.column_index(*d.role_column(ColumnRole::SubjectKey))] = cell(route.source, r, *s.role_column(ColumnRole::SubjectKey));
      row[*d.column_index(*d.role_column(ColumnRole::AdmissionKey))] =
          cell(route.source, r, *s.role_column(ColumnRole::AdmissionKey));
      row[*d.column_index(*d.role_column(ColumnRole::ItemKey))] = concept_id(name, domain);
      // Time, value and unit columns follow the column mapping.
      for (auto role : {ColumnRole::PointTime, ColumnRole::StartTime, ColumnRole::EndTime, ColumnRole::Value, ColumnRole::Unit}) {
        for (const auto& col : s.role_columns(role)) {
          for (const auto& ref : translate_column(mapping, {s.name, col})) {
            if (ref.table != d.name) continue;
            auto idx = *d.column_index(ref.column);
            row[idx] = cell(route.source, r, col);
          }
        }
      }
      out.insert_row(route.dest, std::move(row));
      // Organisms become measurements of the organism concept.
      if (std::string(route.source) == "microbiologyevents") {
        const auto& org = cell(route.source, r, *s.role_column(ColumnRole::Organism));
        if (is_null(org)) continue;
        const auto& m = dst.table("measurement");
        Row mrow(m.columns.size(), Null{});
        mrow[*m.column_index("measurement_id")] = ++ids["measurement"];
        mrow[*m.column_index("person_id")] = cell(route.source, r, "subject_id");
        mrow[*m.column_index("visit_occurrence_id")] = cell(route.source, r, "hadm_id");
        mrow[*m.column_index("measurement_concept_id")] = concept_id(cell_to_string(org), "Measurement");
        mrow[*m.column_index("measurement_datetime")] = cell(route.source, r, "charttime");
        out.insert_row("measurement", std::move(mrow));
      }
    }
  }
  // Dictionary entries no event uses still become concepts.
  for (const auto& r : mimic.rows("d_labitems")) concept_id(cell_to_string(cell("d_labitems", r, "label")), "Measurement");
  out.freeze();
  return out;
}

// ---- random stores and plans ----

namespace {

const std::vector<std::string>& random_units() {
  static const std::vector<std::string> u{"mg", "mL", "mmHg", "bpm", "%"};
  return u;
}

DateTime random_time(Rng& rng, Date base) {
  return DateTime::at(add_days(base, rng.uniform(0, 9)), rng.uniform(0, 23), 15 * rng.uniform(0, 3), 0);
}

CellValue random_cell(const ColumnSpec& c, const TableSpec& t, Rng& rng, Date base, const std::vector<std::int64_t>& item_keys,
                      const std::vector<std::string>& code_keys) {
  auto role = t.role_of(c.name);
  if (role == ColumnRole::SubjectKey) return static_cast<std::int64_t>(rng.uniform(1, 5));
  if (role == ColumnRole::AdmissionKey) return static_cast<std::int64_t>(rng.uniform(1, 20));
  if (role == ColumnRole::ItemKey && c.kind == ValueKind::Integer) return rng.pick(item_keys);
  if (role == ColumnRole::ItemKey) return rng.pick(code_keys);
  if (c.name == "org_itemid") return rng.chance(0.2) ? CellValue(Null{}) : CellValue(rng.pick(item_keys));
  switch (c.kind) {
    case ValueKind::Integer: return static_cast<std::int64_t>(rng.uniform(1, 50));
    case ValueKind::Decimal:
      if (rng.chance(0.1)) return Null{};
      return *Decimal::parse(std::to_string(rng.uniform(1, 12)) + (rng.chance(0.5) ? ".5" : ""));
    case ValueKind::DateTime: {
      if (role == ColumnRole::EndTime && rng.chance(0.15)) return Null{};
      auto t0 = random_time(rng, base);
      if (rng.chance(0.3)) return DateTime::on(t0.date);
      return t0;
    }
    case ValueKind::Text:
      if (role == ColumnRole::Unit) return rng.chance(0.1) ? CellValue(Null{}) : CellValue(rng.pick(random_units()));
      return std::string(rng.pick(std::vector<std::string>{"alpha", "beta", "gamma", "delta o'neil"}));
  }
  return Null{};
}

}  // namespace

RecordStore random_store(ProfileName profile_name, int rows, std::uint64_t seed) {
  if (rows < 0) throw std::invalid_argument("rows must be >= 0");
  Rng rng(seed);
  RecordStore store(load_profile(profile_name));
  const auto& p = store.profile();
  const Date base = *parse_date("2150-06-01");
  const std::vector<std::string> labels{"Heart Rate", "Sodium", "Furosemide", "BLOOD CULTURE", "ESCHERICHIA COLI",
                                        "Norepinephrine", "Foley", "Hemoglobin"};
  std::vector<std::int64_t> item_keys;
  std::vector<std::string> code_keys{"4280", "486", "9604"};
  std::int64_t dict_row = 0;
  for (const auto& t : p.tables) {
    if (!t.dictionary) continue;
    if (t.name == "concept") {
      const std::vector<std::string> domains{"Measurement", "Drug", "Specimen", "Condition", "Procedure"};
      std::int64_t id = 1000;
      for (const auto& label : labels)
        for (const auto& dmn : domains) {
          store.insert_row("concept", {++id, label, dmn});
          item_keys.push_back(id);
        }
    } else if (t.has_column("itemid")) {
      for (std::size_t i = 0; i < labels.size(); ++i) {
        auto id = static_cast<std::int64_t>(i + 1);
        store.insert_row(t.name, {++dict_row, id, labels[i]});
        if (std::find(item_keys.begin(), item_keys.end(), id) == item_keys.end()) item_keys.push_back(id);
      }
    } else {
      for (const auto& c : code_keys) store.insert_row(t.name, {++dict_row, c, "short " + c, "long title " + c});
    }
  }
  auto events = p.event_tables();
  for (int i = 0; i < rows; ++i) {
    const auto& t = p.table(events[static_cast<std::size_t>(i) % events.size()]);
    Row row;
    for (const auto& c : t.columns) {
      if (c.name == t.primary_key) {
        row.push_back(static_cast<std::int64_t>(i + 1));
        continue;
      }
      if (t.role_of(c.name) == ColumnRole::Label) {
        row.push_back(rng.pick(labels));
        continue;
      }
      if (t.role_of(c.name) == ColumnRole::Organism || t.role_of(c.name) == ColumnRole::Specimen) {
        row.push_back(rng.chance(0.1) ? CellValue(Null{}) : CellValue(rng.pick(labels)));
        continue;
      }
      row.push_back(random_cell(c, t, rng, base, item_keys, code_keys));
    }
    // Keep intervals ordered when both ends are present.
    if (t.has_interval_time()) {
      auto si = *t.column_index(*t.role_column(ColumnRole::StartTime));
      auto ei = *t.column_index(*t.role_column(ColumnRole::EndTime));
      if (auto* s = std::get_if<DateTime>(&row[si]); s && std::holds_alternative<DateTime>(row[ei])) {
        auto e = std::get<DateTime>(row[ei]);
        if (e.instant() < s->instant()) std::swap(row[si], row[ei]);
      }
    }
    store.insert_row(t.name, std::move(row));
  }
  store.freeze();
  return store;
}

QueryPlan random_plan(const RecordStore& store, const TemplateSpec& tmpl, Rng& rng) {
  const auto& p = store.profile();
  const auto& t = p.table(tmpl.event_table);
  QueryPlan plan;
  for (const auto& lp : p.legal_pairs)
    if (lp.event_table == t.name) plan.pair = lp;
  plan.template_id = tmpl.id;
  const auto& rows = store.rows(t.name);
  const Row* seed_row = rows.empty() ? nullptr : &rows[static_cast<std::size_t>(rng.uniform(0, static_cast<int>(rows.size()) - 1))];
  auto col = [&](ColumnRole role) -> std::optional<std::size_t> {
    auto c = t.role_column(role);
    if (!c) return std::nullopt;
    return t.column_index(*c);
  };
  plan.admission_key = seed_row && rng.chance(0.8) ? std::get<std::int64_t>((*seed_row)[*col(ColumnRole::AdmissionKey)])
                                                   : rng.uniform(1, 22);

  // Item labels from the dictionary (or the event table's own label column).
  std::vector<std::string> pool;
  if (plan.pair.dict_table) {
    const auto& dict = p.table(*plan.pair.dict_table);
    for (const auto& r : store.rows(dict.name))
      for (const auto& c : dict.role_columns(ColumnRole::Label)) pool.push_back(cell_to_string(r[*dict.column_index(c)]));
  } else {
    for (const auto& r : rows) pool.push_back(cell_to_string(r[*col(ColumnRole::Label)]));
  }
  if (pool.empty()) pool.push_back("Heart Rate");
  int n = rng.uniform(1, 2);
  for (int i = 0; i < n; ++i) {
    auto l = rng.pick(pool);
    if (std::find(plan.item_labels.begin(), plan.item_labels.end(), l) == plan.item_labels.end()) plan.item_labels.push_back(l);
  }

  // A window anchored on a stored time when possible.
  auto time_idx = col(ColumnRole::PointTime) ? col(ColumnRole::PointTime) : col(ColumnRole::StartTime);
  DateTime anchor = DateTime::at(*parse_date("2150-06-03"), 10, 0, 0);
  if (seed_row && time_idx)
    if (auto* d = std::get_if<DateTime>(&(*seed_row)[*time_idx])) anchor = *d;
  switch (tmpl.form) {
    case WindowForm::Exact:
      plan.window = TimeWindow::exact_at(rng.chance(0.5) ? anchor : DateTime::on(anchor.date));
      break;
    case WindowForm::AdmissionAnchored:
    case WindowForm::CalculatedAnchored: {
      auto a = rng.chance(0.5) ? anchor : DateTime::at(add_days(anchor.date, rng.uniform(-2, 2)), 8, 0, 0);
      plan.window = TimeWindow::range(DayBound::shifted(a, -1), DayBound::shifted(a, 1), tmpl.form);
      break;
    }
    case WindowForm::StayRange: {
      auto lo = add_days(anchor.date, -rng.uniform(0, 3));
      plan.window = TimeWindow::range(DayBound::literal(lo), DayBound::literal(add_days(lo, rng.uniform(0, 5))), tmpl.form);
      break;
    }
    case WindowForm::NoTime: plan.window = TimeWindow::none(); break;
  }

  auto maybe = [&](ConditionId id, ColumnRole role) {
    auto idx = col(role);
    if (!idx || !rng.chance(0.5)) return;
    CellValue v;
    if (seed_row && !is_null((*seed_row)[*idx]) && rng.chance(0.7)) {
      v = (*seed_row)[*idx];
    } else {
      auto kind = t.columns[*idx].kind;
      if (kind == ValueKind::Decimal) v = *Decimal::parse(std::to_string(rng.uniform(1, 12)));
      else v = rng.pick(random_units());
    }
    plan.conditions.push_back({id, v});
  };
  maybe(ConditionId::Value, ColumnRole::Value);
  maybe(ConditionId::Unit, ColumnRole::Unit);
  maybe(ConditionId::Organism, ColumnRole::Organism);
  maybe(ConditionId::Specimen, ColumnRole::Specimen);
  for (auto id : default_mask_order())
    if (plan.has_condition(id)) plan.maskable.push_back(id);
  for (auto id : plan.maskable)
    if (rng.chance(0.2)) plan.masked.push_back(id);
  check_plan(plan, p);
  return plan;
}

QueryPlan random_plan(const RecordStore& store, Rng& rng) {
  const auto& matrix = template_matrix(store.profile().name);
  return random_plan(store, rng.pick(matrix), rng);
}

}  // namespace ehrcheck
