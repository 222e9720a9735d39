#include <gtest/gtest.h>

#include <random>

#include "ehrcheck/extraction.hpp"
#include "ehrcheck/text_util.hpp"

using namespace ehrcheck;

namespace {

Note make_note(const std::vector<std::string>& lines, std::string id = "F1") {
  Note n;
  n.note_id = std::move(id);
  n.category = NoteCategory::DischargeSummary;
  n.admission_key = 100;
  n.admit_time = *DateTime::parse("2199-01-10 08:00:00");
  n.chart_time = *DateTime::parse("2199-01-20 10:00:00");
  for (std::size_t i = 0; i < lines.size(); ++i) n.lines.push_back({static_cast<int>(i) + 1, lines[i]});
  return n;
}

SubText whole(const Note& n) {
  EqualSplitter eq;
  auto r = segment(n, SegmentOptions{}, eq);
  EXPECT_EQ(r.subtexts.size(), 1u);
  return r.subtexts.front();
}

struct Fixture {
  ScriptBuilder script;
  PromptLibrary prompts = PromptLibrary::bundled();
  SchemaProfile profile = load_profile(ProfileName::MimicStyle);
  Transcript transcript;
  std::unique_ptr<ScriptedBackend> backend;
  std::unique_ptr<StageContext> ctx;

  StageContext& context() {
    backend = std::make_unique<ScriptedBackend>(script.json());
    ctx = std::make_unique<StageContext>(StageContext{*backend, prompts, profile, &transcript});
    return *ctx;
  }
};

}  // namespace

TEST(Ner, CategoryOneWithValue) {
  auto note = make_note({"Vitals:", "t 99.6 hr 88"});
  auto sub = whole(note);
  std::vector<std::string> log;
  auto m = parse_ner_answer("Answer: t - category 1 (numeric value: 99.6)", sub, log);
  ASSERT_TRUE(m);
  ASSERT_EQ(m->size(), 1u);
  EXPECT_EQ((*m)[0].surface, "t");
  EXPECT_EQ((*m)[0].type, EntityType::Type1);
  EXPECT_EQ((*m)[0].raw_values, std::vector<std::string>{"99.6"});
  EXPECT_EQ((*m)[0].line_no, 2);
}

TEST(Ner, NothingAndMissingAnswer) {
  auto sub = whole(make_note({"nothing to see"}));
  std::vector<std::string> log;
  auto m = parse_ner_answer("Answer: Nothing\nAnswer: Nothing", sub, log);
  ASSERT_TRUE(m);
  EXPECT_TRUE(m->empty());
  EXPECT_FALSE(parse_ner_answer("I could not find anything.", sub, log));
}

TEST(Ner, SlashedReadingYieldsOneMentionPerNumber) {
  auto sub = whole(make_note({"Exam:", "BP: 120/80 (90)"}));
  std::vector<std::string> log;
  auto m = parse_ner_answer("Answer: BP - category 1 (numeric value: 120, 80, 90)", sub, log);
  ASSERT_TRUE(m);
  ASSERT_EQ(m->size(), 3u);
  EXPECT_EQ((*m)[0].raw_values[0], "120");
  EXPECT_EQ((*m)[1].raw_values[0], "80");
  EXPECT_EQ((*m)[2].raw_values[0], "90");
  for (const auto& x : *m) EXPECT_EQ(x.line_no, 2);
  auto slashed = parse_ner_answer("Answer: BP - category 1 (numeric value: 120/80)", sub, log);
  ASSERT_TRUE(slashed);
  EXPECT_EQ(slashed->size(), 2u);
}

TEST(Ner, GrammarViolationsAreDroppedAndLogged) {
  auto sub = whole(make_note({"HR 88, lasix given, mood good"}));
  std::vector<std::string> log;
  auto m = parse_ner_answer(
      "Answer: HR - category 1 (numeric value: 88), lasix - category 2, HR - category 1, bogus item, "
      "mood - category 3 (description: good), ghost - category 2",
      sub, log);
  ASSERT_TRUE(m);
  ASSERT_EQ(m->size(), 3u);
  EXPECT_EQ((*m)[1].surface, "lasix");
  EXPECT_TRUE((*m)[1].raw_values.empty());
  EXPECT_EQ((*m)[2].type, EntityType::Type3);
  EXPECT_EQ((*m)[2].description, "good");
  EXPECT_EQ(log.size(), 3u);  // HR without value, bogus item, ghost not found
}

TEST(Ner, RepeatedSurfaceIsPlacedOnDistinctLinesAndOrdinalsCount) {
  auto sub = whole(make_note({"HR 88", "later", "HR 88 again", "HR 92"}));
  std::vector<std::string> log;
  auto m = parse_ner_answer("Answer: HR - category 1 (numeric value: 88), HR - category 1 (numeric value: 88), "
                            "HR - category 1 (numeric value: 92)",
                            sub, log);
  ASSERT_TRUE(m);
  auto merged = merge_mentions(*m);
  ASSERT_EQ(merged.size(), 3u);
  EXPECT_EQ(merged[0].line_no, 1);
  EXPECT_EQ(merged[1].line_no, 3);
  EXPECT_EQ(merged[2].line_no, 4);
  EXPECT_EQ(merged[2].ordinal, 3);
  auto twice = *m;
  twice.insert(twice.end(), m->begin(), m->end());
  EXPECT_EQ(merge_mentions(twice).size(), 3u);
}

TEST(TimeFilter, AnswerGrammar) {
  std::vector<std::string> log;
  auto a = parse_time_answer(format_time_answer(true, "on admission", "admission", 3), log);
  EXPECT_TRUE(a.parsed);
  EXPECT_EQ(a.tag.regime, TimeRegime::Narrative);
  EXPECT_EQ(a.tag.anchor->kind, AnchorKind::Admission);
  EXPECT_TRUE(a.tag.in_current_stay);

  auto b = parse_time_answer(format_time_answer(true, "Hgb 13.3", "[**2200-07-01**] 09:25AM", 2), log);
  EXPECT_EQ(b.tag.regime, TimeRegime::ExactTimestamp);
  EXPECT_EQ(b.tag.anchor->literal, *DateTime::parse("2200-07-01 09:25:00"));

  auto c = parse_time_answer(format_time_answer(true, "lasix given", "", 1), log);
  EXPECT_EQ(c.tag, TimeTag::unspecified());

  auto d = parse_time_answer(format_time_answer(false, "h/o MI", "2190", 1), log);
  EXPECT_FALSE(d.tag.in_current_stay);

  auto e = parse_time_answer(format_time_answer(true, "x", "HD #3", 3), log);
  EXPECT_EQ(e.tag.anchor->kind, AnchorKind::HospitalDay);
  EXPECT_EQ(e.tag.anchor->hospital_day, 3);

  log.clear();
  auto bad = parse_time_answer("the entity happened at some point", log);
  EXPECT_FALSE(bad.parsed);
  EXPECT_EQ(bad.tag.regime, TimeRegime::Unspecified);
  EXPECT_TRUE(bad.tag.in_current_stay);
  EXPECT_FALSE(log.empty());
  auto bad2 = parse_time_answer(format_time_answer(true, "x", "sometime", 3), log);
  EXPECT_EQ(bad2.tag, TimeTag::unspecified());
}

TEST(TimeText, Resolution) {
  auto admit = *DateTime::parse("2199-01-10 08:00:00");
  auto chart = *DateTime::parse("2199-01-20 10:00:00");
  EXPECT_EQ(resolve_time_text("[**2208-11-08**] 8:00 PM", admit, chart), DateTime::parse("2208-11-08 20:00:00"));
  EXPECT_EQ(resolve_time_text("HD #3", admit, chart), DateTime::parse("2199-01-12"));
  EXPECT_EQ(resolve_time_text("2199-01-15", admit, chart), DateTime::parse("2199-01-15"));
  EXPECT_EQ(resolve_time_text("yesterday", admit, chart), DateTime::parse("2199-01-19"));
  EXPECT_EQ(resolve_time_text("[**1-14**]", admit, chart), DateTime::parse("2199-01-14"));
  EXPECT_EQ(resolve_time_text("12:15 AM 2199-01-15", admit, chart), DateTime::parse("2199-01-15"));
  EXPECT_EQ(resolve_time_text("2199-01-15 12:15 AM", admit, chart), DateTime::parse("2199-01-15 00:15:00"));
  EXPECT_FALSE(resolve_time_text("sometime", admit, chart));
  EXPECT_FALSE(resolve_time_text("2199-02-30", admit, chart));
  EXPECT_EQ(bracket_date(*DateTime::parse("2199-01-15 09:05:00")), "[**2199-01-15**] 09:05");
}

TEST(TableIdentification, AnswerGrammar) {
  auto profile = load_profile(ProfileName::MimicStyle);
  std::vector<std::string> log;
  auto a = parse_table_answer("Selected-Table: [{chartevents, d_items}]", profile, log);
  ASSERT_TRUE(a);
  ASSERT_EQ(a->size(), 1u);
  EXPECT_EQ((*a)[0], (TablePair{"chartevents", "d_items"}));
  auto b = parse_table_answer("Selected-Table: [{Diagnoses_icd, D_icd_diagnoses}, {prescriptions}]", profile, log);
  ASSERT_EQ(b->size(), 2u);
  EXPECT_EQ((*b)[1], (TablePair{"prescriptions", std::nullopt}));
  auto none = parse_table_answer("Selected-Table: [none]", profile, log);
  ASSERT_TRUE(none);
  EXPECT_TRUE(none->empty());
  log.clear();
  auto illegal = parse_table_answer("Selected-Table: [{chartevents, d_labitems}, {labevents, d_labitems}]", profile, log);
  ASSERT_EQ(illegal->size(), 1u);
  EXPECT_EQ(log.size(), 1u);
  EXPECT_FALSE(parse_table_answer("chartevents", profile, log));
}

TEST(PseudoRows, AnswerGrammar) {
  auto profile = load_profile(ProfileName::MimicStyle);
  std::vector<std::string> log;
  TablePair rx{"prescriptions", std::nullopt};
  auto rows = parse_pseudo_rows(
      "Mentioned [1]. DRUG: Ibuprofen, STARTDATE: NaN, ENDDATE: NaN, DOSE_VAL_RX: 400, DOSE_UNIT_RX: mg", rx, profile, log);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].cells.at(ColumnRole::Label), "Ibuprofen");
  EXPECT_EQ(rows[0].cells.at(ColumnRole::Value), "400");
  EXPECT_EQ(rows[0].cells.at(ColumnRole::Unit), "mg");
  EXPECT_FALSE(rows[0].cells.count(ColumnRole::StartTime));

  TablePair lab{"labevents", "d_labitems"};
  auto hgb = parse_pseudo_rows("Mentioned [1]. LABEL: Hgb, VALUENUM: 13.3, VALUEUOM: NaN, CHARTTIME: [**2200-07-01**] 09:25AM",
                               lab, profile, log);
  ASSERT_EQ(hgb.size(), 1u);
  EXPECT_EQ(hgb[0].cells.at(ColumnRole::PointTime), "[**2200-07-01**] 09:25AM");
  EXPECT_EQ(hgb[0].cells.at(ColumnRole::Value), "13.3");

  log.clear();
  EXPECT_TRUE(parse_pseudo_rows("no rows here", lab, profile, log).empty());
  EXPECT_FALSE(log.empty());
  auto two = parse_pseudo_rows("Mentioned [1]. LABEL: BP, VALUENUM: 120\nMentioned [2]. LABEL: BP, VALUENUM: 80",
                               TablePair{"chartevents", "d_items"}, profile, log);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[1].ordinal, 2);
}

TEST(SelfCorrection, ClearsUnconfirmedAndUnquotedCells) {
  Fixture f;
  auto note = make_note({"Labs:", "Hgb 13.3 on [**2200-07-01**]"});
  auto sub = whole(note);
  EntityMention m{"Hgb", EntityType::Type1, 2, 1, {"13.3"}, {}, {}, {}, {}, {}};
  PseudoRow row;
  row.pair = {"labevents", "d_labitems"};
  row.cells = {{ColumnRole::Label, "Hgb"}, {ColumnRole::Value, "13.3"}, {ColumnRole::Unit, "g/dL"},
               {ColumnRole::PointTime, "[**2200-07-01**]"}};
  // Questions are numbered in role order: Label, Value, Unit, PointTime.
  f.script.add("self_correction", "F1", row_key(m, row),
               format_verdicts({{"a", true}, {"b", true}, {"c", false}, {"d", true}}));
  auto& ctx = f.context();
  auto out = self_correct(row, m, sub, note, ctx);
  EXPECT_EQ(out.cells.size(), 3u);
  EXPECT_FALSE(out.cells.count(ColumnRole::Unit));
  EXPECT_FALSE(out.confirmed.at(ColumnRole::Unit));
  EXPECT_TRUE(out.confirmed.at(ColumnRole::Value));

  PseudoRow empty;
  empty.pair = row.pair;
  EXPECT_EQ(self_correct(empty, m, sub, note, ctx), empty);
}

TEST(SelfCorrection, SoundnessProperty) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> words{"Hgb", "13.3", "g/dL", "mg", "400", "HR", "88", "blood", "E. coli", "urine"};
  for (int trial = 0; trial < 200; ++trial) {
    Fixture f;
    std::string line;
    for (int i = 0; i < 4; ++i) line += words[rng() % words.size()] + " ";
    auto note = make_note({line});
    auto sub = whole(note);
    EntityMention m{"x", EntityType::Type2, 1, 1, {}, {}, {}, {}, {}, {}};
    PseudoRow row;
    row.pair = {"microbiologyevents", "d_items"};
    std::vector<std::pair<std::string, bool>> verdicts;
    for (auto role : {ColumnRole::Label, ColumnRole::Organism, ColumnRole::Specimen}) {
      row.cells[role] = words[rng() % words.size()];
      verdicts.emplace_back("q", rng() % 4 != 0);
    }
    f.script.add("self_correction", "F1", row_key(m, row), format_verdicts(verdicts));
    auto out = self_correct(row, m, sub, note, f.context());
    for (const auto& [role, text] : out.cells) EXPECT_TRUE(contains_ci(sub.text, text)) << text;
  }
}

TEST(Reformat, ResolvesTimesAndTypesValues) {
  Fixture f;
  auto note = make_note({"HR 88 on HD #3"});
  EntityMention m{"HR", EntityType::Type1, 1, 1, {"88"}, {}, {}, {}, {}, {}};
  PseudoRow row;
  row.pair = {"chartevents", "d_items"};
  row.cells = {{ColumnRole::Value, "88"}, {ColumnRole::PointTime, "HD #3"}};
  // The backend leaves the time unresolved; the local normalizer steps in.
  f.script.add("reformat", "F1", row_key(m, row), "Chartevents.VALUENUM = 88.0\nChartevents.CHARTTIME = HD #3\n");
  auto out = reformat_values(row, m, note, f.context());
  EXPECT_EQ(std::get<Decimal>(out.cells.at(ColumnRole::Value)), *Decimal::parse("88"));
  EXPECT_EQ(std::get<DateTime>(out.cells.at(ColumnRole::PointTime)), *DateTime::parse("2199-01-12"));
  EXPECT_FALSE(out.time_dropped);

  Fixture g;
  PseudoRow fig;
  fig.pair = {"chartevents", "d_items"};
  fig.cells = {{ColumnRole::PointTime, "[**2208-11-08**] 8:00 PM"}};
  g.script.add("reformat", "F1", row_key(m, fig), "Chartevents.CHARTTIME = 2208-11-08 20:00:00\n");
  auto o2 = reformat_values(fig, m, note, g.context());
  EXPECT_EQ(std::get<DateTime>(o2.cells.at(ColumnRole::PointTime)), *DateTime::parse("2208-11-08 20:00:00"));
  EXPECT_EQ(o2.cells.size(), 1u);

  Fixture h;
  PseudoRow bad;
  bad.pair = {"chartevents", "d_items"};
  bad.cells = {{ColumnRole::PointTime, "sometime"}, {ColumnRole::Unit, "bpm"}};
  h.script.add("reformat", "F1", row_key(m, bad), "Chartevents.CHARTTIME = unknown\nChartevents.VALUENUM = 5\n");
  auto o3 = reformat_values(bad, m, note, h.context());
  EXPECT_TRUE(o3.time_dropped);
  EXPECT_EQ(o3.cells.size(), 1u);  // no fabricated value
  EXPECT_EQ(std::get<std::string>(o3.cells.at(ColumnRole::Unit)), "bpm");
}

TEST(Stages, ScriptedCallsAreDeterministicAndTranscribed) {
  Fixture f;
  auto note = make_note({"Vitals:", "HR 88, RR 16"});
  auto sub = whole(note);
  f.script.add("ner", "F1", "1-2", "Answer: HR - category 1 (numeric value: 88), RR - category 1 (numeric value: 16)");
  f.script.add("time_filter", "F1", "HR@2", format_time_answer(true, "HR 88", "", 1));
  f.script.add("table_identification", "F1", "HR@2", format_table_answer({{"chartevents", "d_items"}}));
  auto& ctx = f.context();
  auto a = recognize_entities(sub, ctx);
  auto b = recognize_entities(sub, ctx);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(filter_time(a[0], sub, note, ctx), TimeTag::unspecified());
  auto pairs = identify_tables(a[0], sub, ctx);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_THROW(identify_tables(a[1], sub, ctx), BackendError);
  EXPECT_EQ(f.transcript.records().size(), 4u);
  EXPECT_EQ(f.transcript.records()[0].stage, "ner");
}

TEST(LlmSplitter, UsesScriptedRangesAndFallsBack) {
  ScriptBuilder s;
  s.add("segmentation", "N1", "1-6", "[section1: 1-2, section2: 3-4, section3: 5-6]");
  ScriptedBackend backend(s.json());
  auto prompts = PromptLibrary::bundled();
  LlmSplitter splitter(backend, prompts, "N1");
  std::vector<NoteLine> prefix;
  for (int i = 1; i <= 6; ++i) prefix.push_back({i, "w"});
  auto r = splitter.split(prefix, 3);
  ASSERT_TRUE(r);
  EXPECT_EQ((*r)[1], (LineRange{3, 4}));
  prefix.push_back({7, "w"});
  EXPECT_FALSE(splitter.split(prefix, 3));
}
