#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "ehrcheck/errors.hpp"
#include "ehrcheck/evaluator.hpp"

namespace ehrcheck {
namespace {

GoldRecord gold(const std::string& id, std::vector<std::pair<std::string, Label>> ents,
                NoteCategory c = NoteCategory::DischargeSummary) {
  GoldRecord g;
  g.note_id = id;
  g.category = c;
  int line = 0;
  for (auto& [s, l] : ents) {
    GoldEntity e;
    e.surface = s;
    e.line_no = ++line;
    e.label = l;
    g.entities.push_back(e);
  }
  return g;
}

// Lines follow the entity name ("e3" sits on line 3) so gold and report agree.
VerificationReport report(const std::string& id, std::vector<std::pair<std::string, Label>> ents,
                          NoteCategory c = NoteCategory::DischargeSummary) {
  VerificationReport r;
  r.note_id = id;
  r.category = c;
  for (auto& [s, l] : ents) {
    EntityResult e;
    e.surface = s;
    e.type = EntityType::Type1;
    e.line_no = std::stoi(s.substr(1));
    e.label = l;
    r.entities.push_back(e);
  }
  return r;
}

GoldRecord gold_lines(const std::string& id, std::vector<std::pair<std::string, Label>> ents) {
  auto g = gold(id, ents);
  for (auto& e : g.entities) e.line_no = std::stoi(e.surface.substr(1));
  return g;
}

constexpr auto I = Label::Inconsistent;
constexpr auto C = Label::Consistent;

TEST(Evaluator, WorkedExample) {
  auto g = gold_lines("n1", {{"e1", I}, {"e2", C}, {"e3", C}});
  auto r = report("n1", {{"e1", I}, {"e3", I}, {"e4", C}});
  auto m = score_note(g, r);
  EXPECT_NEAR(m.recall, 100.0 / 3, 1e-9);
  EXPECT_NEAR(m.precision, 100.0 / 3, 1e-9);
  ASSERT_TRUE(m.intersection);
  EXPECT_NEAR(*m.intersection, 50.0, 1e-9);
  EXPECT_EQ(m.correct, 1);
  EXPECT_EQ(m.matched, 2);
}

TEST(Evaluator, PerfectAndEmpty) {
  auto g = gold_lines("n1", {{"e1", I}, {"e2", C}});
  auto m = score_note(g, report("n1", {{"e1", I}, {"e2", C}}));
  EXPECT_EQ(m.recall, 100.0);
  EXPECT_EQ(m.precision, 100.0);
  EXPECT_EQ(*m.intersection, 100.0);
  auto e = score_note(g, report("n1", {}));
  EXPECT_EQ(e.recall, 0.0);
  EXPECT_EQ(e.precision, 0.0);
  EXPECT_FALSE(e.intersection);
}

TEST(Evaluator, Type3AndUnverifiable) {
  auto g = gold_lines("n1", {{"e1", I}, {"e2", C}});
  g.entities[1].type = EntityType::Type3;
  auto r = report("n1", {{"e1", I}, {"e2", C}, {"e5", C}});
  r.entities[1].type = EntityType::Type3;
  r.entities[2].label = Label::Unverifiable;
  auto m = score_note(g, r);
  EXPECT_EQ(m.gold, 1);
  EXPECT_EQ(m.recognized, 2);
  EXPECT_EQ(m.correct, 1);
  EXPECT_EQ(m.precision, 50.0);
}

TEST(Evaluator, MatchRules) {
  auto g = gold_lines("n1", {{"e1", I}});
  auto r = report("n1", {{"e1", I}});
  r.entities[0].line_no = 7;
  r.entities[0].surface = "  E1 ";
  EXPECT_EQ(score_note(g, r).correct, 0);
  EXPECT_EQ(score_note(g, r, MatchRule::SurfaceOnly).correct, 1);
  EXPECT_EQ(parse_match_rule("surface"), MatchRule::SurfaceOnly);
  EXPECT_THROW(parse_match_rule("fuzzy"), ConfigError);
}

TEST(Evaluator, NoteIdMismatchThrows) {
  EXPECT_THROW(score_note(gold("a", {}), report("b", {})), EvaluationError);
}

TEST(Evaluator, PermutationInvarianceAndIdentity) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<std::string, Label>> ge, re;
    for (int i = 1; i <= 8; ++i) {
      if (rng() % 3) ge.emplace_back("e" + std::to_string(i), rng() % 2 ? C : I);
      if (rng() % 3) re.emplace_back("e" + std::to_string(i), rng() % 2 ? C : I);
    }
    auto g = gold_lines("n", ge);
    auto r = report("n", re);
    auto m = score_note(g, r);
    EXPECT_LE(m.correct, std::min(m.gold, m.recognized));
    EXPECT_LE(m.correct, m.matched);
    std::shuffle(g.entities.begin(), g.entities.end(), rng);
    std::shuffle(r.entities.begin(), r.entities.end(), rng);
    auto m2 = score_note(g, r);
    EXPECT_EQ(m.correct, m2.correct);
    EXPECT_EQ(m.matched, m2.matched);
    EXPECT_EQ(m.recall, m2.recall);
    EXPECT_EQ(m.precision, m2.precision);
  }
}

TEST(Evaluator, CorpusMeanAndCategories) {
  std::vector<GoldRecord> golds{gold_lines("a", {{"e1", I}}), gold_lines("b", {{"e1", I}})};
  golds[1].category = NoteCategory::NursingNote;
  std::vector<VerificationReport> reports{report("a", {{"e1", I}}), report("b", {})};
  auto m = score_corpus(golds, reports);
  EXPECT_EQ(m.total.recall, 50.0);
  EXPECT_EQ(m.total.notes, 2);
  EXPECT_EQ(*m.total.intersection, 100.0);
  EXPECT_EQ(m.total.intersection_notes, 1);
  EXPECT_EQ(m.by_category.at(NoteCategory::NursingNote).recall, 0.0);
  auto one = score_corpus({golds[0]}, {reports[0]});
  EXPECT_EQ(one.total.recall, 100.0);
  auto table = format_metrics_table(m);
  EXPECT_NE(table.find("Total"), std::string::npos);
  EXPECT_NE(table.find("50.00"), std::string::npos);
  EXPECT_EQ(metrics_to_json(m)["total"]["recall"].get<double>(), 50.0);
}

TEST(Evaluator, UnmatchedNotesAreNamed) {
  try {
    score_corpus({gold("a", {}), gold("b", {})}, {report("a", {})});
    FAIL();
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("b (no report)"), std::string::npos);
  }
}

TEST(Evaluator, GoldJsonRoundTrip) {
  auto g = gold_lines("n1", {{"e1", I}, {"e2", C}});
  g.entities[0].error_columns = {"chartevents.charttime"};
  g.entities[0].errors = 1;
  g.entities[1].type = EntityType::Type2;
  std::stringstream ss;
  write_gold(ss, {g});
  auto back = read_gold(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].entities[0].error_columns, g.entities[0].error_columns);
  EXPECT_EQ(back[0].entities[1].type, EntityType::Type2);
  std::stringstream bad("{\"noteId\":\"x\",\"category\":\"nursing\",\"entities\":[{\"entity\":\"a\",\"entity_type\":4,"
                        "\"position\":1,\"tag\":\"consistent\"}]}\n");
  EXPECT_THROW(read_gold(bad), ParseError);
}

}  // namespace
}  // namespace ehrcheck
