#pragma once

// Prompt-driven extraction stages: entity recognition, time filtering, table
// identification, pseudo-row creation, self-correction and value
// reformatting. Each stage renders a prompt, calls the backend and parses the
// answer with a strict grammar; anything that does not parse is dropped and
// logged.

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ehrcheck/cell.hpp"
#include "ehrcheck/llm_gateway.hpp"
#include "ehrcheck/notes.hpp"
#include "ehrcheck/schema.hpp"
#include "ehrcheck/segmenter.hpp"

namespace ehrcheck {

enum class EntityType { Type1 = 1, Type2 = 2, Type3 = 3 };

struct EntityMention {
  std::string surface;
  EntityType type = EntityType::Type2;
  int line_no = 0;
  /// 1-based count of this surface among the note's mentions, in line order.
  int ordinal = 1;
  /// One value per mention; "120/80" becomes two mentions.
  std::vector<std::string> raw_values;
  std::optional<std::string> raw_unit;
  std::optional<std::string> raw_time_expr;
  std::optional<std::string> organism;
  std::optional<std::string> specimen;
  std::string description;  // Type3 only

  friend bool operator==(const EntityMention&, const EntityMention&) = default;
};

/// "surface@line", the script key of per-entity stages.
std::string entity_key(const EntityMention& m);
nlohmann::json mention_to_json(const EntityMention& m);

enum class TimeRegime { ExactTimestamp, Narrative, Unspecified };
enum class AnchorKind { Admission, Discharge, ChartDate, HospitalDay, Yesterday, Literal };

std::string_view to_string(TimeRegime r);
std::string_view to_string(AnchorKind a);

struct TimeAnchor {
  AnchorKind kind = AnchorKind::ChartDate;
  int hospital_day = 0;  // HospitalDay only, 1-based
  DateTime literal{};    // Literal only

  friend bool operator==(const TimeAnchor&, const TimeAnchor&) = default;
};

struct TimeTag {
  TimeRegime regime = TimeRegime::Unspecified;
  std::optional<TimeAnchor> anchor;
  bool in_current_stay = true;

  static TimeTag unspecified() { return {}; }
  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

nlohmann::json time_tag_to_json(const TimeTag& t);

struct PseudoRow {
  TablePair pair;
  int ordinal = 1;  // the k of "Mentioned [k]"
  /// Raw text per role as quoted from the note.
  std::map<ColumnRole, std::string> cells;
  std::string evidence_quote;
  std::map<ColumnRole, bool> confirmed;

  friend bool operator==(const PseudoRow&, const PseudoRow&) = default;
};

struct ReformattedRow {
  TablePair pair;
  int ordinal = 1;
  std::map<ColumnRole, CellValue> cells;
  /// A time cell could not be resolved and was dropped.
  bool time_dropped = false;
};

/// Appends "#k" to the entity key: the script key of per-row stages.
std::string row_key(const EntityMention& m, const PseudoRow& row);

/// One prompt/answer exchange with what was parsed from it.
struct StageRecord {
  std::string stage;
  std::string key;
  std::string prompt;
  std::string answer;
  nlohmann::json parsed;
  std::vector<std::string> log;
};

/// Per-note audit sink. Thread-safe.
class Transcript {
 public:
  void add(StageRecord r);
  std::vector<StageRecord> records() const;
  nlohmann::json to_json() const;

 private:
  mutable std::mutex mu_;
  std::vector<StageRecord> records_;
};

struct StageContext {
  Backend& backend;
  const PromptLibrary& prompts;
  const SchemaProfile& profile;
  Transcript* transcript = nullptr;
};

// ---- answer grammars (pure) ----

/// NER answer: one or more "Answer:" lines, each a comma-separated list of
/// `name - category N (numeric value: V, ...)` items or "Nothing". Mentions
/// are placed on the first core line of `sub` containing the name as a
/// whole word (and the value, for numbers); the full range is the fallback.
/// Returns nullopt when no "Answer:" line is present.
std::optional<std::vector<EntityMention>> parse_ner_answer(std::string_view answer, const SubText& sub,
                                                           std::vector<std::string>& log);

struct TimeAnswer {
  TimeTag tag;
  std::string time_text;
  bool parsed = false;
};

/// Time-filter answer: "[Answer 1] Yes|No", a "Time: `...'" line and
/// "[Answer 3] 1|2|3" (1 indeterminate, 2 written date, 3 narrative).
TimeAnswer parse_time_answer(std::string_view answer, std::vector<std::string>& log);

/// Narrative anchor named by a time expression, if any.
std::optional<TimeAnchor> parse_narrative_anchor(std::string_view text);

/// "Selected-Table: [{a, b}, {prescriptions}]" or "[none]". Illegal pairs are
/// dropped. Returns nullopt when the line is missing.
std::optional<std::vector<TablePair>> parse_table_answer(std::string_view answer, const SchemaProfile& profile,
                                                         std::vector<std::string>& log);

/// Column names (upper case) offered for a table pair, with their roles.
std::vector<std::pair<std::string, ColumnRole>> pseudo_columns(const TablePair& pair, const SchemaProfile& profile);

/// "Mentioned [k]. COLUMN: value, COLUMN: value" lines. NaN/None/empty
/// values are absent.
std::vector<PseudoRow> parse_pseudo_rows(std::string_view answer, const TablePair& pair, const SchemaProfile& profile,
                                         std::vector<std::string>& log);

/// Per-question "[k] ..." blocks, each with an "Answer: Yes|No" line.
/// Questions without a well-formed verdict are No.
std::map<int, bool> parse_verdicts(std::string_view answer, std::vector<std::string>& log);

/// "table.COLUMN = value" (or ": value") lines keyed by upper-case column.
std::map<std::string, std::string> parse_reformat_answer(std::string_view answer);

/// Resolves a time expression against note metadata: bracketed or plain
/// YYYY-MM-DD with an optional clock time (12- or 24-hour), MM-DD or M/D in
/// the chart year, HD #k, yesterday, today, admission, discharge.
std::optional<DateTime> resolve_time_text(std::string_view text, const DateTime& admit, const DateTime& chart);

// ---- answer formatting (inverse of the grammars, used for fixtures) ----

std::string format_ner_item(const std::string& surface, EntityType type, const std::vector<std::string>& values,
                            const std::string& description = {});
std::string format_time_answer(bool in_stay, const std::string& quote, const std::string& time_text, int option);
std::string format_table_answer(const std::vector<TablePair>& pairs);
std::string format_pseudo_row(int k, const std::vector<std::pair<std::string, std::string>>& cells);
std::string format_verdicts(const std::vector<std::pair<std::string, bool>>& questions);
std::string format_reformat_answer(const std::string& table, const std::vector<std::pair<std::string, std::string>>& cells);

// ---- stages ----

std::vector<EntityMention> recognize_entities(const SubText& sub, StageContext& ctx);
TimeTag filter_time(const EntityMention& m, const SubText& sub, const Note& note, StageContext& ctx);
std::vector<TablePair> identify_tables(const EntityMention& m, const SubText& sub, StageContext& ctx);
std::vector<PseudoRow> build_pseudo_rows(const EntityMention& m, const SubText& sub, const TablePair& pair,
                                         StageContext& ctx);
/// Clears every cell without a Yes verdict or whose text does not occur in
/// the sub-text.
PseudoRow self_correct(const PseudoRow& row, const EntityMention& m, const SubText& sub, const Note& note,
                       StageContext& ctx);
/// Typed, schema-conformant values. Cells the backend answer omits or
/// garbles fall back to the local normalizer; unresolvable time cells are
/// dropped and flagged.
ReformattedRow reformat_values(const PseudoRow& row, const EntityMention& m, const Note& note, StageContext& ctx);

/// Merges mentions from overlapping sub-texts: identical (surface, line,
/// value) collapse, then ordinals are assigned in line order.
std::vector<EntityMention> merge_mentions(std::vector<EntityMention> mentions);

/// Splitter backed by the segmentation prompt. Script key "first-last".
class LlmSplitter : public Splitter {
 public:
  LlmSplitter(Backend& backend, const PromptLibrary& prompts, std::string note_id, Transcript* transcript = nullptr)
      : backend_(backend), prompts_(prompts), note_id_(std::move(note_id)), transcript_(transcript) {}
  std::optional<std::vector<LineRange>> split(const std::vector<NoteLine>& prefix, int n) override;

 private:
  Backend& backend_;
  const PromptLibrary& prompts_;
  std::string note_id_;
  Transcript* transcript_;
};

/// "[**YYYY-MM-DD**] HH:MM" style rendering used in note text.
std::string bracket_date(const DateTime& t);

}  // namespace ehrcheck
