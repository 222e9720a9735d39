#pragma once

// Per-note orchestration of the full pipeline and report output.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ehrcheck/extraction.hpp"
#include "ehrcheck/item_search.hpp"
#include "ehrcheck/query_engine.hpp"
#include "ehrcheck/segmenter.hpp"

namespace ehrcheck {

enum class Label { Consistent, Inconsistent, Unverifiable };
std::string_view to_string(Label l);
Label parse_label(std::string_view text);

struct PlanOutcome {
  QueryPlan plan;
  std::string sql;
  Verdict verdict = Verdict::Inconsistent;
};

/// One entity: all values read for a surface on one line.
struct EntityResult {
  std::string surface;
  EntityType type = EntityType::Type2;
  int line_no = 0;
  int ordinal = 1;
  std::vector<std::string> values;
  Label label = Label::Unverifiable;
  std::string reason;  // Unverifiable only
  std::optional<TimeTag> time;
  std::optional<TablePair> pair;
  std::vector<PlanOutcome> plans;
  std::optional<ErrorAttribution> attribution;
};

struct VerificationReport {
  std::string note_id;
  NoteCategory category = NoteCategory::DischargeSummary;
  std::string config_digest;
  std::vector<EntityResult> entities;
  /// Set when the note as a whole could not be processed.
  std::optional<std::string> error;
};

struct VerifierConfig {
  SegmentOptions segment;
  ItemSearchOptions search;
  std::vector<std::string> section_patterns = default_section_patterns();
  bool llm_splitter = true;
  std::vector<ConditionId> mask_order = default_mask_order();
  ExecPath path = ExecPath::SqlPath;
  /// Describes the backend for the digest (kind, model, temperature).
  std::string backend_label = "scripted";

  nlohmann::json to_json(ProfileName profile) const;
  /// Hash of to_json; parallelism is deliberately not part of it.
  std::string digest(ProfileName profile) const;
};

struct VerifierDeps {
  const RecordStore& store;
  const ItemIndex& index;
  const ExpansionLexicon& lexicon;
  Backend& backend;
  const PromptLibrary& prompts;
};

/// Per-entity stage failures become Unverifiable entities; only errors
/// outside entity processing propagate.
VerificationReport verify_note(const Note& note, const VerifierDeps& deps, const VerifierConfig& cfg,
                               Transcript* audit = nullptr);

struct CorpusRun {
  std::vector<VerificationReport> reports;  // ordered by note id
  std::vector<nlohmann::json> audits;       // same order
};

/// Notes are processed concurrently; one note's failure is recorded in its
/// report and never stops the others. Throws std::invalid_argument if
/// parallelism < 1.
CorpusRun verify_corpus(const std::vector<Note>& notes, const VerifierDeps& deps, const VerifierConfig& cfg,
                        int parallelism);

inline constexpr int kReportSchemaVersion = 1;

nlohmann::json report_to_json(const VerificationReport& r);
/// Reads the fields the evaluator needs. Throws ParseError.
VerificationReport report_from_json(const nlohmann::json& j);
/// Label counts overall, per category, per Unverifiable reason and per
/// error column.
nlohmann::json summarize(const std::vector<VerificationReport>& reports);

/// Writes reports/<id>.json, audit/<id>.json and summary.json under `dir`.
void write_run(const std::filesystem::path& dir, const CorpusRun& run);

}  // namespace ehrcheck
