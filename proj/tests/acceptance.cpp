// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Tolerances and time limits are fixed below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "ehrcheck/evaluator.hpp"
#include "ehrcheck/extraction.hpp"
#include "ehrcheck/item_search.hpp"
#include "ehrcheck/query_engine.hpp"
#include "ehrcheck/segmenter.hpp"
#include "ehrcheck/sql_dialect.hpp"
#include "ehrcheck/synth_fixtures.hpp"
#include "ehrcheck/text_util.hpp"
#include "ehrcheck/verifier.hpp"

using namespace ehrcheck;

namespace {

constexpr double kCosineTol = 1e-9;
constexpr double kPercentTol = 1e-9;

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// ---- shared scripted corpus ----

struct Corpus {
  FixtureSet fx;
  ItemIndex index;
  ExpansionLexicon lexicon = ExpansionLexicon::bundled();
  PromptLibrary prompts = PromptLibrary::bundled();
  ScriptedBackend backend;

  explicit Corpus(FixtureSet f) : fx(std::move(f)), index(fx.store), backend(fx.script) {}
  CorpusRun verify(int parallelism) {
    VerifierDeps deps{fx.store, index, lexicon, backend, prompts};
    return verify_corpus(fx.notes, deps, VerifierConfig{}, parallelism);
  }
};

std::string entity_key(const std::string& note, const std::string& surface, int line) {
  return note + "/" + surface + "@" + std::to_string(line);
}

std::string dump_reports(const CorpusRun& run) {
  std::string out;
  for (const auto& r : run.reports) out += report_to_json(r).dump() + "\n";
  return out;
}

InjectionSpec certificate_spec() {
  InjectionSpec s;  // 24 notes x 10 entities, 48 injections
  return s;
}

// ---- 1 ----

Outcome metrics_example() {
  Outcome o;
  auto mk_gold = [](std::vector<std::pair<std::string, Label>> es) {
    GoldRecord g{"worked-example", NoteCategory::DischargeSummary, {}};
    for (auto& [s, l] : es) g.entities.push_back(GoldEntity{s, EntityType::Type1, std::stoi(s.substr(1)), l});
    return g;
  };
  auto mk_report = [](std::vector<std::pair<std::string, Label>> es) {
    VerificationReport r;
    r.note_id = "worked-example";
    for (auto& [s, l] : es) {
      EntityResult e;
      e.surface = s;
      e.line_no = std::stoi(s.substr(1));
      e.label = l;
      r.entities.push_back(e);
    }
    return r;
  };
  auto g = mk_gold({{"e1", Label::Inconsistent}, {"e2", Label::Consistent}, {"e3", Label::Consistent}});
  auto r = mk_report({{"e1", Label::Inconsistent}, {"e3", Label::Inconsistent}, {"e4", Label::Consistent}});
  auto m = score_note(g, r);
  auto corpus = score_corpus({g}, {r});
  std::string got = fmt2(m.recall) + "/" + fmt2(m.precision) + "/" + (m.intersection ? fmt2(*m.intersection) : "-");
  o.require(got == "33.33/33.33/50.00", "got " + got);
  o.require(std::abs(corpus.total.recall - m.recall) < kPercentTol, "corpus mean differs from the single note");
  o.detail = o.ok ? "R/P/I = " + got : o.detail;
  return o;
}

// ---- 2 ----

Outcome template_coverage() {
  Outcome o;
  constexpr int kRows = 10000;
  constexpr int kPlans = 1000;
  int mismatches = 0, nonempty = 0, executed = 0;
  std::map<std::string, int> nonempty_per_template;
  for (auto profile : {ProfileName::MimicStyle, ProfileName::OmopStyle}) {
    auto store = random_store(profile, kRows, 20240);
    const auto& matrix = template_matrix(profile);
    if (profile == ProfileName::MimicStyle) o.require(matrix.size() == 27, "MIMIC matrix has " + std::to_string(matrix.size()) + " forms");
    std::size_t total = 0;
    for (const auto& t : store.profile().event_tables()) total += store.rows(t).size();
    o.require(total == kRows, "store has " + std::to_string(total) + " event rows");
    Rng rng(profile == ProfileName::MimicStyle ? 1 : 2);
    for (int i = 0; i < kPlans; ++i) {
      const auto& tmpl = matrix[static_cast<std::size_t>(i) % matrix.size()];
      auto plan = random_plan(store, tmpl, rng);
      auto sql = render_sql(plan, store.profile());
      o.require(!sql.empty(), tmpl.id + " rendered empty SQL");
      auto a = store.execute_plan(plan, ExecPath::SqlPath);
      auto b = store.execute_plan(plan, ExecPath::ScanPath);
      ++executed;
      if (!a.same_rows(b)) {
        ++mismatches;
        o.require(false, tmpl.id + " SqlPath/ScanPath mismatch on " + plan_to_json(plan).dump());
      }
      if (!a.empty()) {
        ++nonempty;
        ++nonempty_per_template[tmpl.id];
      }
    }
    for (const auto& t : matrix)
      o.require(nonempty_per_template.count(t.id) > 0, t.id + " never returned a row");
    nonempty_per_template.clear();
  }
  if (o.ok)
    o.detail = std::to_string(executed) + " plans over 27+13 forms, " + std::to_string(mismatches) + " mismatches, " +
               std::to_string(nonempty) + " non-empty";
  return o;
}

// ---- 3, 4, 8, 9 ----

Outcome plumbing(Corpus& c, CorpusRun& run) {
  Outcome o;
  std::size_t entities = 0;
  for (const auto& g : c.fx.gold)
    for (const auto& e : g.entities) entities += e.type != EntityType::Type3;
  std::map<ErrorClass, int> by_class;
  for (const auto& i : c.fx.injections) ++by_class[i.error];
  o.require(c.fx.notes.size() >= 20, "fewer than 20 notes");
  o.require(entities >= 200, "fewer than 200 verifiable entities");
  o.require(c.fx.injections.size() >= 40, "fewer than 40 injections");
  for (auto k : {ErrorClass::TimeShift, ErrorClass::ValuePerturb, ErrorClass::UnitSwap, ErrorClass::MissingEntity})
    o.require(by_class[k] > 0, std::string("no ") + std::string(to_string(k)) + " injection");
  run = c.verify(1);
  auto m = score_corpus(c.fx.gold, run.reports);
  for (const auto& r : run.reports) o.require(!r.error, r.note_id + ": " + r.error.value_or(""));
  for (const auto& [id, t] : m.per_note)
    o.require(t.recall == 100.0 && t.precision == 100.0, id + " scored " + fmt2(t.recall) + "/" + fmt2(t.precision));
  o.require(m.total.recall == 100.0 && m.total.precision == 100.0,
            "total " + fmt2(m.total.recall) + "/" + fmt2(m.total.precision));
  if (o.ok)
    o.detail = std::to_string(c.fx.notes.size()) + " notes, " + std::to_string(entities) + " entities, " +
               std::to_string(c.fx.injections.size()) + " injections; recall " + fmt2(m.total.recall) + ", precision " +
               fmt2(m.total.precision);
  return o;
}

void check_localization(const Corpus& c, const CorpusRun& run, Outcome& o, int& single, int& one_hour, int& missing) {
  std::map<std::string, const EntityResult*> found;
  for (const auto& r : run.reports)
    for (const auto& e : r.entities) found[entity_key(r.note_id, e.surface, e.line_no)] = &e;
  for (const auto& inj : c.fx.injections) {
    if (inj.error == ErrorClass::Compound) continue;
    auto key = entity_key(inj.note_id, inj.surface, inj.line_no);
    auto it = found.find(key);
    o.require(it != found.end(), key + " not in the report");
    if (it == found.end()) continue;
    const auto& e = *it->second;
    o.require(e.label == Label::Inconsistent && e.attribution.has_value(), key + " not localized");
    if (!e.attribution) continue;
    if (inj.error == ErrorClass::MissingEntity) {
      ++missing;
      o.require(e.attribution->missing && e.attribution->error_columns.empty(), key + " missing=false");
      continue;
    }
    ++single;
    if (inj.error == ErrorClass::TimeShift && inj.hours == 1) ++one_hour;
    std::set<std::string> want, got;
    for (const auto& col : inj.columns) want.insert(to_string(col));
    std::string listed;
    for (const auto& col : e.attribution->error_columns) {
      got.insert(to_string(col));
      listed += " " + to_string(col);
    }
    o.require(want == got && !e.attribution->missing && !e.attribution->compound,
              key + " (" + std::string(to_string(inj.error)) + ") localized to" + listed);
  }
}

// The certificate corpus plus one made only of one-hour shifts and missing
// entities.
Outcome localization(const Corpus& c, const CorpusRun& run) {
  Outcome o;
  int single = 0, one_hour = 0, missing = 0;
  check_localization(c, run, o, single, one_hour, missing);
  InjectionSpec spec;
  spec.seed = 8;
  spec.notes = 20;
  spec.value_perturb = spec.unit_swap = spec.compound = 0;
  spec.time_shift = 24;
  spec.missing_entity = 10;
  spec.time_shift_hours = {1};
  Corpus shifted(generate(spec, ProfileName::MimicStyle));
  check_localization(shifted, shifted.verify(1), o, single, one_hour, missing);
  o.require(one_hour >= 10, "only " + std::to_string(one_hour) + " one-hour shifts");
  if (o.ok)
    o.detail = std::to_string(single) + " single-field perturbations (" + std::to_string(one_hour) +
               " one-hour shifts) exact, " + std::to_string(missing) + " missing=true";
  return o;
}

Outcome omop_transfer(const CorpusRun& mimic_run, const FixtureSet& mimic_fx) {
  Outcome o;
  Corpus omop(generate(certificate_spec(), ProfileName::OmopStyle));
  auto run = omop.verify(1);
  std::map<std::string, Label> a, b;
  for (const auto& r : mimic_run.reports)
    for (const auto& e : r.entities) a[entity_key(r.note_id, e.surface, e.line_no)] = e.label;
  for (const auto& r : run.reports)
    for (const auto& e : r.entities) b[entity_key(r.note_id, e.surface, e.line_no)] = e.label;
  std::size_t verifiable = 0;
  for (const auto& g : mimic_fx.gold)
    for (const auto& e : g.entities) verifiable += e.type != EntityType::Type3;
  int compared = 0, inconsistent = 0;
  for (const auto& key : mimic_fx.omop_survivors) {
    o.require(a.count(key) && b.count(key), key + " missing from a report");
    if (!a.count(key) || !b.count(key)) continue;
    o.require(a[key] == b[key], key + ": " + std::string(to_string(a[key])) + " vs " + std::string(to_string(b[key])));
    ++compared;
    inconsistent += a[key] == Label::Inconsistent;
  }
  o.require(compared * 2 >= static_cast<int>(verifiable), "fewer than half of the entities survive the mapping");
  if (o.ok)
    o.detail = std::to_string(compared) + "/" + std::to_string(verifiable) + " surviving entities agree (" +
               std::to_string(inconsistent) + " inconsistent)";
  return o;
}

Outcome determinism(Corpus& c, const CorpusRun& serial) {
  Outcome o;
  auto parallel = c.verify(8);
  auto x = dump_reports(serial), y = dump_reports(parallel);
  o.require(x == y, "reports differ between parallelism 1 and 8");
  if (o.ok) o.detail = std::to_string(serial.reports.size()) + " reports, " + std::to_string(x.size()) + " bytes identical";
  return o;
}

// ---- 5 ----

Note random_note(Rng& rng, int target_tokens) {
  static const std::vector<std::string> words{"pt", "with", "hx", "of", "CHF", "HR", "110", "bpm", "lasix", "given",
                                              "BP", "stable", "on", "RA", "afebrile", "WBC", "12.1", "cont", "monitor"};
  Note n;
  n.note_id = "seg";
  int tokens = 0, line = 0;
  while (tokens < target_tokens) {
    int len = std::min(rng.uniform(0, 40), target_tokens - tokens);
    std::string text;
    for (int i = 0; i < len; ++i) text += (i ? " " : "") + rng.pick(words);
    n.lines.push_back({++line, text});
    tokens += len;
  }
  return n;
}

Outcome segmentation() {
  Outcome o;
  Rng rng(5);
  const std::vector<int> ls{128, 300, 512, 1000, 2048, 6000};
  int singles = 0, max_rounds = 0;
  EqualSplitter splitter;
  for (int i = 0; i < 100; ++i) {
    auto note = random_note(rng, rng.uniform(200, 5000));
    SegmentOptions opts{rng.pick(ls), rng.uniform(2, 4), rng.uniform(0, 60)};
    auto tag = "note " + std::to_string(i) + " (l=" + std::to_string(opts.max_tokens) + ")";
    auto r = segment(note, opts, splitter);
    max_rounds = std::max(max_rounds, r.rounds);
    o.require(r.rounds <= static_cast<int>(note.lines.size()) + 1, tag + " took " + std::to_string(r.rounds) + " rounds");
    o.require(!r.subtexts.empty(), tag + " produced no sub-text");
    if (r.subtexts.empty()) continue;
    int next = note.lines.front().line_no;
    for (const auto& s : r.subtexts) {
      o.require(s.core.first == next, tag + " core gap or overlap at line " + std::to_string(next));
      o.require(s.core.first <= s.core.last, tag + " empty core");
      o.require(s.full.first <= s.core.first && s.core.last <= s.full.last, tag + " core outside full range");
      o.require(!s.oversized && s.core_tokens() <= static_cast<std::size_t>(opts.max_tokens),
                tag + " core of " + std::to_string(s.core_tokens()) + " tokens");
      next = s.core.last + 1;
    }
    o.require(next == note.lines.back().line_no + 1, tag + " cores do not reach the last line");
    if (note.token_count() <= static_cast<std::size_t>(opts.max_tokens)) {
      ++singles;
      o.require(r.subtexts.size() == 1, tag + " fits in l but was split");
    }
  }
  o.require(singles > 0, "no note fit in l");
  if (o.ok)
    o.detail = "100 notes, " + std::to_string(singles) + " single-subtext cases, max " + std::to_string(max_rounds) + " rounds";
  return o;
}

// ---- 6 ----

Outcome item_search() {
  Outcome o;
  double c = bigram_cosine("temp", "temperature");
  o.require(std::abs(c - 3.0 / std::sqrt(30.0)) <= kCosineTol, "cosine(temp, temperature) = " + std::to_string(c));
  Rng rng(9);
  InjectionSpec spec;
  spec.notes = 2;
  spec.entities_per_note = 4;
  spec.time_shift = spec.value_perturb = spec.unit_swap = spec.missing_entity = spec.compound = 0;
  auto fx = generate(spec, ProfileName::MimicStyle);
  ItemIndex index(fx.store);
  std::vector<std::string> labels;
  for (const auto& t : fx.store.profile().tables) {
    if (!t.dictionary) continue;
    for (const auto& row : fx.store.rows(t.name))
      for (const auto& col : t.role_columns(ColumnRole::Label))
        if (auto* s = std::get_if<std::string>(&row[*t.column_index(col)])) labels.push_back(*s);
  }
  auto mutate = [&](std::string s) {
    switch (rng.uniform(0, 3)) {
      case 0: return s.substr(0, static_cast<std::size_t>(rng.uniform(1, static_cast<int>(s.size()))));
      case 1: return to_lower(s);
      case 2: return s + " " + rng.pick(labels).substr(0, 3);
      default: {
        std::string out;
        for (int i = 0; i < rng.uniform(2, 8); ++i) out += static_cast<char>('a' + rng.uniform(0, 25));
        return out;
      }
    }
  };
  auto ids = [](const std::vector<ItemHit>& hits) {
    std::set<std::string> out;
    for (const auto& h : hits) out.insert(h.source_table + "|" + h.label_column + "|" + h.item_key + "|" + h.label);
    return out;
  };
  auto subset = [](const std::set<std::string>& a, const std::set<std::string>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
  };
  for (int draw = 0; draw < 1000; ++draw) {
    auto label = rng.pick(labels);
    auto entity = mutate(label);
    o.require(std::abs(bigram_cosine(entity, entity) - 1.0) <= kCosineTol || normalize_for_bigrams(entity).size() < 2,
              "identity fails for '" + entity + "'");
    ExpansionLexicon small, big;
    int n = rng.uniform(0, 3);
    for (int i = 0; i < n; ++i) {
      auto from = rng.chance(0.5) ? entity : mutate(rng.pick(labels));
      auto to = rng.chance(0.5) ? rng.pick(labels) : mutate(rng.pick(labels));
      small.add(ExpansionLexicon::Kind::Abbreviation, from, to);
      big.add(ExpansionLexicon::Kind::Abbreviation, from, to);
    }
    big.add(rng.chance(0.5) ? ExpansionLexicon::Kind::Abbreviation : ExpansionLexicon::Kind::Brand, entity,
            rng.chance(0.7) ? rng.pick(labels) : mutate(rng.pick(labels)));
    double t1 = rng.real(0.05, 0.95), t2 = rng.real(0.05, 0.95);
    if (t2 < t1) std::swap(t1, t2);
    ItemSearchOptions lo{t1, rng.chance(0.3), false}, hi = lo;
    hi.threshold = t2;
    auto at_lo = ids(index.search(entity, small, lo));
    auto at_hi = ids(index.search(entity, small, hi));
    o.require(subset(at_hi, at_lo), "threshold monotonicity fails for '" + entity + "'");
    auto expanded = ids(index.search(entity, big, lo));
    o.require(subset(at_lo, expanded), "expansion monotonicity fails for '" + entity + "'");
  }
  if (o.ok) o.detail = "cosine = " + std::to_string(c) + ", 1000 draws over " + std::to_string(labels.size()) + " labels";
  return o;
}

// ---- 7 ----

// Day-window rules restated directly over dates so the check does not reuse
// compute_window.
struct OracleWindow {
  bool exact = false;
  DateTime at{};
  Date lo{}, hi{};

  bool accepts(const DateTime& t) const {
    if (exact) return at.has_time() ? t.has_time() && t == at : t.date == at.date;
    return lo <= t.date && t.date <= hi;
  }
};

OracleWindow oracle_window(const TimeTag& tag, const Note& note) {
  using std::chrono::days;
  OracleWindow w;
  auto around = [&](Date d) {
    w.lo = d - days(1);
    w.hi = d + days(1);
  };
  if (tag.regime == TimeRegime::ExactTimestamp) {
    w.exact = true;
    w.at = tag.anchor->literal;
  } else if (tag.regime == TimeRegime::Narrative) {
    switch (tag.anchor->kind) {
      case AnchorKind::Admission: around(note.admit_time.date); break;
      case AnchorKind::Discharge:
      case AnchorKind::ChartDate: around(note.chart_time.date); break;
      case AnchorKind::HospitalDay: around(note.admit_time.date + days(tag.anchor->hospital_day - 1)); break;
      case AnchorKind::Yesterday: around(note.chart_time.date - days(1)); break;
      case AnchorKind::Literal: break;
    }
  } else if (note.category == NoteCategory::DischargeSummary) {
    w.lo = note.admit_time.date;
    w.hi = note.chart_time.date;
  } else {
    around(note.chart_time.date);
  }
  return w;
}

Outcome time_windows() {
  Outcome o;
  using std::chrono::days;
  Rng rng(77);
  const Date base = *parse_date("2150-03-10");
  const std::int64_t hadm = 5001;
  RecordStore store(load_profile(ProfileName::MimicStyle));
  std::vector<std::pair<std::string, std::string>> targets{{"chartevents", "d_items"}, {"labevents", "d_labitems"}};
  for (const auto& [event, dict] : targets) {
    const auto& d = store.profile().table(dict);
    Row drow;
    for (const auto& c : d.columns) {
      auto role = d.role_of(c.name);
      if (role == ColumnRole::Label) drow.push_back(std::string("Heart Rate"));
      else if (c.kind == ValueKind::Integer) drow.push_back(std::int64_t{1});
      else drow.push_back(Null{});
    }
    store.insert_row(dict, drow);
  }
  std::int64_t pk = 0;
  std::vector<DateTime> stamps;
  for (int day = -4; day <= 16; ++day)
    for (int s : {0, 1, 3600, 43200, 86399}) stamps.push_back(DateTime{base + days(day), s});
  for (int i = 0; i < 400; ++i) stamps.push_back(DateTime{base + days(rng.uniform(-4, 16)), rng.uniform(0, 86399)});
  for (const auto& [event, dict] : targets) {
    const auto& t = store.profile().table(event);
    for (const auto& ts : stamps)
      for (std::int64_t adm : {hadm, hadm + 1}) {
        Row row;
        for (const auto& c : t.columns) {
          auto role = t.role_of(c.name);
          if (c.name == t.primary_key) row.push_back(++pk);
          else if (role == ColumnRole::AdmissionKey) row.push_back(adm);
          else if (role == ColumnRole::ItemKey) row.push_back(std::int64_t{1});
          else if (role == ColumnRole::PointTime) row.push_back(ts);
          else if (c.kind == ValueKind::Integer) row.push_back(std::int64_t{1});
          else row.push_back(Null{});
        }
        store.insert_row(event, row);
      }
  }
  store.freeze();

  int draws = 0, accepted_rows = 0;
  for (int draw = 0; draw < 600; ++draw) {
    Note note;
    note.note_id = "tw";
    note.admission_key = hadm;
    note.category = static_cast<NoteCategory>(rng.uniform(0, 2));
    note.admit_time = DateTime{base + days(rng.uniform(0, 3)), rng.uniform(0, 86399)};
    note.chart_time = DateTime{note.admit_time.date + days(rng.uniform(0, 9)), rng.uniform(0, 86399)};
    if (note.chart_time.instant() < note.admit_time.instant()) note.chart_time = note.admit_time;
    TimeTag tag;
    switch (rng.uniform(0, 2)) {
      case 0: {
        tag.regime = TimeRegime::ExactTimestamp;
        DateTime lit = rng.chance(0.5) ? rng.pick(stamps) : DateTime{base + days(rng.uniform(-4, 16)), rng.uniform(0, 86399)};
        if (rng.chance(0.3)) lit = DateTime::on(lit.date);
        tag.anchor = TimeAnchor{AnchorKind::Literal, 0, lit};
        break;
      }
      case 1: {
        tag.regime = TimeRegime::Narrative;
        auto kind = static_cast<AnchorKind>(rng.uniform(0, 4));
        tag.anchor = TimeAnchor{kind, kind == AnchorKind::HospitalDay ? rng.uniform(1, 8) : 0, {}};
        break;
      }
      default: tag.regime = TimeRegime::Unspecified;
    }
    auto window = compute_window(tag, note);
    auto expect = oracle_window(tag, note);
    for (const auto& [event, dict] : targets) {
      const auto& table = store.profile().table(event);
      QueryPlan plan;
      for (const auto& lp : store.profile().legal_pairs)
        if (lp.event_table == event) plan.pair = lp;
      plan.admission_key = hadm;
      plan.item_labels = {"Heart Rate"};
      plan.window = window;
      auto tmpl = find_template(ProfileName::MimicStyle, event, window.form);
      o.require(tmpl.has_value(), "no template for " + event);
      if (!tmpl) continue;
      plan.template_id = tmpl->id;
      auto pk_idx = *table.column_index(table.primary_key);
      auto time_idx = *table.column_index(*table.role_column(ColumnRole::PointTime));
      auto adm_idx = *table.column_index(*table.role_column(ColumnRole::AdmissionKey));
      std::set<std::int64_t> want;
      for (const auto& row : store.rows(event))
        if (std::get<std::int64_t>(row[adm_idx]) == hadm && expect.accepts(std::get<DateTime>(row[time_idx])))
          want.insert(std::get<std::int64_t>(row[pk_idx]));
      for (auto path : {ExecPath::SqlPath, ExecPath::ScanPath}) {
        std::set<std::int64_t> got;
        for (const auto& row : store.execute_plan(plan, path).rows) got.insert(std::get<std::int64_t>(row[pk_idx]));
        o.require(got == want, "draw " + std::to_string(draw) + " " + event + " " + std::string(to_string(path)) +
                                   ": " + std::to_string(got.size()) + " rows accepted, oracle " +
                                   std::to_string(want.size()) + " (" + time_tag_to_json(tag).dump() + ")");
      }
      accepted_rows += static_cast<int>(want.size());
    }
    ++draws;
  }
  if (o.ok)
    o.detail = std::to_string(draws) + " draws x 2 tables x 2 paths, " + std::to_string(accepted_rows) +
               " accepted rows all inside their windows, none outside missed";
  return o;
}

// ---- driver ----

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0: no limit of its own
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  std::unique_ptr<Corpus> corpus;
  CorpusRun serial;
  double corpus_setup_s = 0.0;
  auto ensure_corpus = [&] {
    if (corpus) return;
    auto t0 = std::chrono::steady_clock::now();
    corpus = std::make_unique<Corpus>(generate(certificate_spec(), ProfileName::MimicStyle));
    corpus_setup_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  // Criteria 4, 8 and 9 reuse the serial run of criterion 3.
  auto ensure_serial = [&] {
    ensure_corpus();
    if (serial.reports.empty()) serial = corpus->verify(1);
  };

  std::vector<Criterion> criteria{
      {1, "metrics example", 1.0, metrics_example},
      {2, "template coverage", 60.0, template_coverage},
      {3, "plumbing certificate", 120.0,
       [&] {
         ensure_corpus();
         return plumbing(*corpus, serial);
       }},
      {4, "localization exactness", 0.0, [&] {
         ensure_serial();
         return localization(*corpus, serial);
       }},
      {5, "segmentation properties", 0.0, segmentation},
      {6, "item search properties", 0.0, item_search},
      {7, "time-window conformance", 0.0, time_windows},
      {8, "OMOP label transfer", 0.0, [&] {
         ensure_serial();
         return omop_transfer(serial, corpus->fx);
       }},
      {9, "determinism", 0.0, [&] {
         ensure_serial();
         return determinism(*corpus, serial);
       }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.id == 3) secs += corpus_setup_s;
    if (c.limit_s > 0 && secs >= c.limit_s) {
      if (o.ok) o.detail = "took " + std::to_string(secs) + " s";
      o.ok = false;
    }
    failed += !o.ok;
    char timing[64];
    if (c.limit_s > 0) std::snprintf(timing, sizeof timing, "%.2f s, limit %.0f s", secs, c.limit_s);
    else std::snprintf(timing, sizeof timing, "%.2f s", secs);
    std::printf("%s [%d] %s: %s (%s)\n", o.ok ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), timing);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
