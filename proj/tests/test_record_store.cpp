#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "ehrcheck/errors.hpp"
#include "ehrcheck/record_store.hpp"
#include "ehrcheck/sql_dialect.hpp"

using namespace ehrcheck;

namespace {

RecordStore bp_store() {
  RecordStore s(load_profile(ProfileName::MimicStyle));
  std::istringstream items("row_id,itemid,label\n1,51,BP\n2,52,Heart Rate\n");
  std::istringstream chart(
      "row_id,subject_id,hadm_id,itemid,charttime,valuenum,valueuom\n"
      "10,7,12345,51,2000-11-11 08:00:00,94,mmHg\n"
      "11,7,12345,51,2000-11-12 08:00:00,94,mmHg\n"
      "12,7,12345,52,2000-11-11 08:00:00,94,bpm\n"
      "13,7,99999,51,2000-11-11 08:00:00,94,mmHg\n");
  s.ingest_csv("d_items", items);
  s.ingest_csv("chartevents", chart);
  s.freeze();
  return s;
}

QueryPlan bp_plan() {
  QueryPlan p;
  p.pair = {"chartevents", "d_items"};
  p.admission_key = 12345;
  p.item_labels = {"BP"};
  p.window = TimeWindow::exact_at(*DateTime::parse("2000-11-11"));
  p.conditions = {{ConditionId::Value, *Decimal::parse("94.0")}, {ConditionId::Unit, std::string("mmHg")}};
  p.maskable = {ConditionId::Value, ConditionId::Unit, ConditionId::Time};
  return p;
}

}  // namespace

TEST(Csv, CountsRowsAndAcceptsHeaderOnly) {
  RecordStore s(load_profile(ProfileName::MimicStyle));
  std::istringstream three(
      "ROW_ID,SUBJECT_ID,HADM_ID,ITEMID,CHARTTIME,VALUENUM,VALUEUOM,EXTRA\n"
      "1,1,1,1,2000-01-01 00:00:00,1,a,x\n2,1,1,1,2000-01-01,,\"b,c\",y\n3,1,1,1,,2.5,\"\",z\n");
  EXPECT_EQ(s.ingest_csv("chartevents", three), 3u);
  std::istringstream header("row_id,subject_id,hadm_id,itemid,charttime,valuenum,valueuom\n");
  EXPECT_EQ(s.ingest_csv("chartevents", header), 0u);
  const auto& rows = s.rows("chartevents");
  EXPECT_EQ(std::get<std::string>(rows[1][6]), "b,c");
  EXPECT_TRUE(is_null(rows[1][5]));
  EXPECT_EQ(std::get<std::string>(rows[2][6]), "");
}

TEST(Csv, InvalidDateNamesLine) {
  RecordStore s(load_profile(ProfileName::MimicStyle));
  std::istringstream bad(
      "row_id,subject_id,hadm_id,itemid,charttime,valuenum,valueuom\n"
      "1,1,1,1,2000-01-01,1,a\n"
      "2,1,1,1,2101-13-40,1,a\n");
  try {
    s.ingest_csv("chartevents", bad);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("charttime"), std::string::npos);
  }
}

TEST(Csv, MissingColumnIsSchemaError) {
  RecordStore s(load_profile(ProfileName::MimicStyle));
  std::istringstream bad("row_id,subject_id,hadm_id,itemid,charttime,valuenum\n");
  EXPECT_THROW(s.ingest_csv("chartevents", bad), SchemaError);
}

TEST(Csv, QuotedNewlinesKeepLineCount) {
  RecordStore s(load_profile(ProfileName::MimicStyle));
  std::istringstream in("row_id,itemid,label\n1,1,\"two\nlines\"\n2,x,bad\n");
  try {
    s.ingest_csv("d_items", in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4);
  }
}

TEST(RecordStore, BloodPressurePlanReturnsOneJoinedRow) {
  auto s = bp_store();
  auto plan = bp_plan();
  EXPECT_EQ(render_sql(plan, s.profile()),
            "SELECT * FROM chartevents JOIN d_items ON chartevents.itemid = d_items.itemid WHERE chartevents.hadm_id = "
            "12345 AND chartevents.valuenum = 94.0 AND chartevents.valueuom = 'mmHg' AND strftime('%Y-%m-%d', "
            "chartevents.charttime) = '2000-11-11' AND d_items.label = 'BP'");
  auto sql = s.execute_plan(plan, ExecPath::SqlPath);
  auto scan = s.execute_plan(plan, ExecPath::ScanPath);
  ASSERT_EQ(sql.size(), 1u);
  EXPECT_TRUE(sql.same_rows(scan));
  EXPECT_EQ(sql.keys[0], "10|1");
  EXPECT_EQ(sql.rows[0], scan.rows[0]);
}

TEST(RecordStore, AdmissionOnlyPlanOverEmptyTable) {
  RecordStore s(load_profile(ProfileName::MimicStyle));
  s.freeze();
  QueryPlan p;
  p.pair = {"labevents", "d_labitems"};
  p.admission_key = 1;
  p.item_labels = {"Glucose"};
  EXPECT_TRUE(s.execute_plan(p, ExecPath::SqlPath).empty());
  EXPECT_TRUE(s.execute_plan(p, ExecPath::ScanPath).empty());
}

TEST(RecordStore, MaskingWidensResult) {
  auto s = bp_store();
  auto plan = bp_plan();
  plan.window = TimeWindow::exact_at(*DateTime::parse("2000-11-13"));
  EXPECT_TRUE(s.execute_plan(plan, ExecPath::SqlPath).empty());
  auto relaxed = plan.with_masked({ConditionId::Time});
  EXPECT_EQ(s.execute_plan(relaxed, ExecPath::SqlPath).size(), 2u);
  EXPECT_EQ(s.execute_plan(relaxed, ExecPath::ScanPath).size(), 2u);
}

TEST(RecordStore, IntervalOverlapAndNullEnd) {
  RecordStore s(load_profile(ProfileName::MimicStyle));
  auto d = [](const char* t) { return CellValue{*DateTime::parse(t)}; };
  auto dec = [](const char* t) { return CellValue{*Decimal::parse(t)}; };
  s.insert_row("prescriptions", {std::int64_t{1}, std::int64_t{1}, std::int64_t{5}, d("2100-01-01"), d("2100-01-05"),
                                 std::string("Lasix"), dec("40"), std::string("mg")});
  s.insert_row("prescriptions", {std::int64_t{2}, std::int64_t{1}, std::int64_t{5}, d("2100-01-10"), CellValue{Null{}},
                                 std::string("Lasix"), dec("40"), std::string("mg")});
  s.freeze();
  QueryPlan p;
  p.pair = {"prescriptions", std::nullopt};
  p.admission_key = 5;
  p.item_labels = {"Lasix"};
  auto range = [&](const char* lo, const char* hi) {
    p.window = TimeWindow::range(DayBound::literal(*parse_date(lo)), DayBound::literal(*parse_date(hi)), WindowForm::StayRange);
    auto a = s.execute_plan(p, ExecPath::SqlPath);
    auto b = s.execute_plan(p, ExecPath::ScanPath);
    EXPECT_TRUE(a.same_rows(b)) << lo << ".." << hi;
    return a.sorted_keys();
  };
  EXPECT_EQ(range("2100-01-05", "2100-01-06"), std::vector<std::string>{"1"});
  EXPECT_EQ(range("2099-12-30", "2099-12-31"), std::vector<std::string>{});
  EXPECT_EQ(range("2100-01-06", "2100-01-09"), std::vector<std::string>{});
  EXPECT_EQ(range("2100-01-10", "2100-01-10"), std::vector<std::string>{"2"});
  EXPECT_EQ(range("2100-01-11", "2100-01-12"), std::vector<std::string>{});
  EXPECT_EQ(range("2099-01-01", "2101-01-01"), (std::vector<std::string>{"1", "2"}));
}

TEST(RecordStore, AnchoredBoundsRenderArithmetic) {
  auto s = bp_store();
  auto plan = bp_plan();
  auto admit = *DateTime::parse("2000-11-12 10:00:00");
  plan.window = TimeWindow::range(DayBound::shifted(admit, -1), DayBound::shifted(admit, 1), WindowForm::AdmissionAnchored);
  auto sql = render_sql(plan, s.profile());
  EXPECT_NE(sql.find("date('2000-11-12 10:00:00', '-1 day')"), std::string::npos) << sql;
  auto a = s.execute_plan(plan, ExecPath::SqlPath);
  EXPECT_EQ(a.size(), 2u);
  EXPECT_TRUE(a.same_rows(s.execute_plan(plan, ExecPath::ScanPath)));
}

TEST(RecordStore, MicrobiologyJoinsDictionaryTwice) {
  RecordStore s(load_profile(ProfileName::MimicStyle));
  s.insert_row("d_items", {std::int64_t{1}, std::int64_t{70}, std::string("Blood Culture")});
  s.insert_row("d_items", {std::int64_t{2}, std::int64_t{80}, std::string("Escherichia Coli")});
  s.insert_row("microbiologyevents", {std::int64_t{1}, std::int64_t{1}, std::int64_t{3}, *DateTime::parse("2100-01-01"),
                                      std::int64_t{70}, std::string("Blood Culture"), std::int64_t{80},
                                      std::string("Escherichia Coli")});
  s.insert_row("microbiologyevents", {std::int64_t{2}, std::int64_t{1}, std::int64_t{3}, *DateTime::parse("2100-01-02"),
                                      std::int64_t{70}, std::string("Blood Culture"), CellValue{Null{}}, CellValue{Null{}}});
  s.freeze();
  QueryPlan p;
  p.pair = {"microbiologyevents", "d_items"};
  p.admission_key = 3;
  for (const char* label : {"Blood Culture", "Escherichia Coli"}) {
    p.item_labels = {label};
    auto a = s.execute_plan(p, ExecPath::SqlPath);
    EXPECT_TRUE(a.same_rows(s.execute_plan(p, ExecPath::ScanPath)));
    EXPECT_EQ(a.size(), std::string(label) == "Blood Culture" ? 2u : 1u);
  }
  auto sql = render_sql(p, s.profile());
  EXPECT_NE(sql.find("JOIN d_items AS spec_items"), std::string::npos);
  EXPECT_NE(sql.find("LEFT JOIN d_items AS org_items"), std::string::npos);
}

TEST(RecordStore, IcdLabelMatchesEitherTitle) {
  RecordStore s(load_profile(ProfileName::MimicStyle));
  s.insert_row("d_icd_diagnoses", {std::int64_t{1}, std::string("486"), std::string("Pneumonia NOS"),
                                   std::string("Pneumonia, organism unspecified")});
  s.insert_row("diagnoses_icd", {std::int64_t{1}, std::int64_t{1}, std::int64_t{3}, std::string("486")});
  s.freeze();
  QueryPlan p;
  p.pair = {"diagnoses_icd", "d_icd_diagnoses"};
  p.admission_key = 3;
  for (const char* label : {"Pneumonia NOS", "Pneumonia, organism unspecified"}) {
    p.item_labels = {label};
    EXPECT_EQ(s.execute_plan(p, ExecPath::SqlPath).size(), 1u);
    EXPECT_EQ(s.execute_plan(p, ExecPath::ScanPath).size(), 1u);
  }
}

TEST(RecordStore, QuotesInLabelsAreEscaped) {
  RecordStore s(load_profile(ProfileName::MimicStyle));
  s.insert_row("d_labitems", {std::int64_t{1}, std::int64_t{5}, std::string("O'Brien index")});
  s.insert_row("labevents", {std::int64_t{1}, std::int64_t{1}, std::int64_t{3}, std::int64_t{5}, *DateTime::parse("2100-01-01"),
                             *Decimal::parse("1"), std::string("x")});
  s.freeze();
  QueryPlan p;
  p.pair = {"labevents", "d_labitems"};
  p.admission_key = 3;
  p.item_labels = {"O'Brien index"};
  EXPECT_EQ(s.execute_plan(p, ExecPath::SqlPath).size(), 1u);
}

TEST(RecordStore, ParallelScanMatchesSerialReference) {
  RecordStore s(load_profile(ProfileName::MimicStyle));
  std::mt19937_64 rng(3);
  for (int i = 1; i <= 20; ++i) s.insert_row("d_labitems", {std::int64_t{i}, std::int64_t{i}, "item" + std::to_string(i % 7)});
  for (int i = 1; i <= 5000; ++i) {
    auto day = add_days(*parse_date("2100-01-01"), static_cast<int>(rng() % 20));
    s.insert_row("labevents", {std::int64_t{i}, std::int64_t{1}, std::int64_t{static_cast<std::int64_t>(rng() % 3)},
                               std::int64_t{static_cast<std::int64_t>(1 + rng() % 20)}, DateTime::at(day, 1, 0, 0),
                               Decimal::from_int(static_cast<std::int64_t>(rng() % 10)), std::string("u")});
  }
  s.freeze();
  QueryPlan p;
  p.pair = {"labevents", "d_labitems"};
  p.admission_key = 1;
  p.item_labels = {"item3", "item4"};
  auto par = s.scan(p, true);
  auto ser = s.scan(p, false);
  EXPECT_GT(par.size(), 0u);
  EXPECT_EQ(par.keys, ser.keys);
  EXPECT_TRUE(par.same_rows(s.execute_plan(p, ExecPath::SqlPath)));
}

TEST(RecordStore, PlanJsonRoundTrip) {
  auto plan = bp_plan();
  plan.masked = {ConditionId::Unit};
  EXPECT_EQ(plan_from_json(plan_to_json(plan)), plan);
  auto admit = *DateTime::parse("2000-11-12 10:00:00");
  plan.window = TimeWindow::range(DayBound::shifted(admit, -1), DayBound::shifted(admit, 1), WindowForm::AdmissionAnchored);
  EXPECT_EQ(plan_from_json(plan_to_json(plan)), plan);
  EXPECT_THROW(plan_from_json(nlohmann::json{{"table", 3}}), ParseError);
}

TEST(RecordStore, RejectsUnknownConditionColumn) {
  auto s = bp_store();
  QueryPlan p = bp_plan();
  p.pair = {"diagnoses_icd", "d_icd_diagnoses"};
  EXPECT_THROW(s.execute_plan(p, ExecPath::ScanPath), SchemaError);
}
