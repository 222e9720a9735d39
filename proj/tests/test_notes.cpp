#include <gtest/gtest.h>

#include <sstream>

#include "ehrcheck/errors.hpp"
#include "ehrcheck/notes.hpp"

using namespace ehrcheck;

namespace {

std::string record(const std::string& id, const std::string& text, const std::string& extra = "") {
  return R"({"noteId":")" + id + R"(","category":"Discharge summary","hadm_id":12345,)" + extra +
         R"("admittime":"2199-01-10 10:00:00","charttime":"2199-01-20 00:00:00","text":")" + text + "\"}\n";
}

Note sample() {
  std::istringstream in(record("n1",
                               "Admission Date: [**2199-01-10**]\\nPast Medical History:\\nHTN\\nDM2\\n"
                               "Brief Hospital Course:\\nHR 90\\nPlan:\\nfollow up\\nLabs:\\nWBC 11"));
  return ingest_notes(in).at(0);
}

}  // namespace

TEST(Notes, NumbersLinesFromOne) {
  std::istringstream in(record("a", "one\\ntwo\\nthree\\nfour\\nfive"));
  auto notes = ingest_notes(in);
  ASSERT_EQ(notes.size(), 1u);
  ASSERT_EQ(notes[0].lines.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(notes[0].lines[i].line_no, i + 1);
  EXPECT_EQ(notes[0].category, NoteCategory::DischargeSummary);
  EXPECT_EQ(notes[0].admission_key, 12345);
}

TEST(Notes, MissingAdmitTimeIsError) {
  std::istringstream in(R"({"noteId":"a","category":"Nursing","hadm_id":1,"charttime":"2100-01-01","text":"x"})");
  EXPECT_THROW(ingest_notes(in), ParseError);
}

TEST(Notes, ChartBeforeAdmitIsError) {
  std::istringstream in(
      R"({"noteId":"a","category":"Nursing","hadm_id":1,"admittime":"2100-01-02","charttime":"2100-01-01","text":"x"})");
  EXPECT_THROW(ingest_notes(in), ParseError);
}

TEST(Notes, PreservesInputOrder) {
  std::istringstream in(record("b", "x") + record("a", "y"));
  auto notes = ingest_notes(in);
  ASSERT_EQ(notes.size(), 2u);
  EXPECT_EQ(notes[0].note_id, "b");
  EXPECT_EQ(notes[1].note_id, "a");
}

TEST(Notes, LenientIngestSkipsBadRecords) {
  std::istringstream in(record("a", "x") + "{not json}\n" + record("b", "y"));
  std::vector<NoteIngestError> errors;
  auto notes = ingest_notes_lenient(in, errors);
  EXPECT_EQ(notes.size(), 2u);
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_EQ(errors[0].line, 2);
}

TEST(Notes, CategoriesAreLenient) {
  EXPECT_EQ(parse_note_category("discharge_summary"), NoteCategory::DischargeSummary);
  EXPECT_EQ(parse_note_category("Physician "), NoteCategory::PhysicianNote);
  EXPECT_EQ(parse_note_category("Nursing/other"), NoteCategory::NursingNote);
  EXPECT_THROW(parse_note_category("Radiology"), ParseError);
}

TEST(SectionFilter, RemovesPastMedicalHistoryBlock) {
  auto n = sample();
  auto f = apply_section_filter(n, {"Past Medical History"});
  std::vector<int> kept;
  for (const auto& l : f.lines) kept.push_back(l.line_no);
  EXPECT_EQ(kept, (std::vector<int>{1, 5, 6, 7, 8, 9, 10}));
  for (const auto& l : f.lines) EXPECT_EQ(l.text, n.find_line(l.line_no)->text);
}

TEST(SectionFilter, EmptyPatternListIsIdentity) {
  auto n = sample();
  EXPECT_EQ(apply_section_filter(n, {}), n);
}

TEST(SectionFilter, MatchAllRemovesEverything) {
  std::istringstream in(record("a", "Notes:\\nabc\\ndef"));
  auto n = ingest_notes(in).at(0);
  EXPECT_TRUE(apply_section_filter(n, {"*"}).lines.empty());
}

TEST(SectionFilter, IsIdempotentAndGlobAware) {
  auto n = sample();
  std::vector<std::string> pats{"past * history", "PLAN"};
  auto once = apply_section_filter(n, pats);
  EXPECT_EQ(apply_section_filter(once, pats), once);
  EXPECT_EQ(once.lines.size(), 5u);
}

TEST(SectionFilter, DefaultListIsBundled) {
  auto pats = default_section_patterns();
  EXPECT_NE(std::find(pats.begin(), pats.end(), "Past Medical History"), pats.end());
}

TEST(SectionFilter, InlinePatternLabelOpensSection) {
  std::istringstream in(record("a", "HR 90\\nPMH: HTN, DM\\nCAD\\nLabs:\\nWBC 11"));
  auto f = apply_section_filter(ingest_notes(in).at(0), {"PMH"});
  ASSERT_EQ(f.lines.size(), 3u);
  EXPECT_EQ(f.lines[1].line_no, 4);
}

TEST(Notes, JsonlRoundTripKeepsNumbering) {
  auto f = apply_section_filter(sample(), {"Past Medical History"});
  std::ostringstream out;
  write_note_jsonl(out, f);
  std::istringstream in(out.str());
  auto back = ingest_notes(in).at(0);
  EXPECT_EQ(back.find_line(5)->text, f.find_line(5)->text);
  EXPECT_EQ(back.lines.size(), 10u);
}
