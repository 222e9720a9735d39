#pragma once

// Clinical notes: ingestion from JSONL, stable line numbering, and
// header-delimited section filtering.

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "ehrcheck/cell.hpp"

namespace ehrcheck {

enum class NoteCategory { DischargeSummary, PhysicianNote, NursingNote };

std::string_view to_string(NoteCategory c);
/// Lenient: "Discharge summary", "discharge_summary", "Physician ", "Nursing/other", ...
NoteCategory parse_note_category(std::string_view text);

struct NoteLine {
  int line_no = 0;
  std::string text;

  friend bool operator==(const NoteLine&, const NoteLine&) = default;
};

struct LineRange {
  int first = 0;
  int last = 0;

  friend bool operator==(const LineRange&, const LineRange&) = default;
};

struct Note {
  std::string note_id;
  NoteCategory category = NoteCategory::DischargeSummary;
  std::int64_t admission_key = 0;
  DateTime admit_time{};
  DateTime chart_time{};
  std::vector<NoteLine> lines;

  std::size_t token_count() const;
  /// Lines joined with '\n'.
  std::string text() const;
  const NoteLine* find_line(int line_no) const;

  friend bool operator==(const Note&, const Note&) = default;
};

/// Reads one JSON object per line (noteId, category, hadm_id, admittime,
/// charttime, text). Throws ParseError naming the input line on the first bad
/// record.
std::vector<Note> ingest_notes(std::istream& in);

struct NoteIngestError {
  long line = 0;
  std::string message;
};

/// Like ingest_notes but skips bad records and reports them.
std::vector<Note> ingest_notes_lenient(std::istream& in, std::vector<NoteIngestError>& errors);

/// Parses one JSON record. Throws ParseError.
Note note_from_json_text(std::string_view text);
void write_note_jsonl(std::ostream& out, const Note& note);

/// Header name of a line if it opens a section: a name followed by ':' and
/// nothing else, or an all-caps name of two or more words followed by ':'.
std::optional<std::string> section_header(std::string_view line);

/// Removes every section whose header matches one of the patterns
/// (case-insensitive globs with `*` and `?`, compared with the header name).
/// A section spans its header line up to the next header. Surviving lines
/// keep their numbers and text.
Note apply_section_filter(const Note& note, const std::vector<std::string>& patterns);

/// One pattern per line; blank lines and `#` comments skipped.
std::vector<std::string> read_section_patterns(std::istream& in);
/// The bundled default list (data/section_filters.txt).
std::vector<std::string> default_section_patterns();

}  // namespace ehrcheck
