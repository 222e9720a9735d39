#include "ehrcheck/notes.hpp"

#include <cctype>
#include <sstream>

#include "json.hpp"

#include "ehrcheck/assets.hpp"
#include "ehrcheck/errors.hpp"
#include "ehrcheck/text_util.hpp"

namespace ehrcheck {

using nlohmann::json;

std::string_view to_string(NoteCategory c) {
  switch (c) {
    case NoteCategory::DischargeSummary: return "DischargeSummary";
    case NoteCategory::PhysicianNote: return "PhysicianNote";
    case NoteCategory::NursingNote: return "NursingNote";
  }
  return "?";
}

NoteCategory parse_note_category(std::string_view text) {
  std::string k;
  for (char c : text)
    if (std::isalnum(static_cast<unsigned char>(c))) k.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (k == "dischargesummary" || k == "discharge") return NoteCategory::DischargeSummary;
  if (k == "physician" || k == "physiciannote") return NoteCategory::PhysicianNote;
  if (k == "nursing" || k == "nursingnote" || k == "nursingother") return NoteCategory::NursingNote;
  throw ParseError("unknown note category '" + std::string(text) + "'");
}

std::size_t Note::token_count() const {
  std::size_t n = 0;
  for (const auto& l : lines) n += count_tokens(l.text);
  return n;
}

std::string Note::text() const {
  std::string s;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) s += '\n';
    s += lines[i].text;
  }
  return s;
}

const NoteLine* Note::find_line(int line_no) const {
  for (const auto& l : lines)
    if (l.line_no == line_no) return &l;
  return nullptr;
}

namespace {

DateTime required_time(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_string()) throw ParseError(std::string("missing ") + field);
  auto t = DateTime::parse(trim(j[field].get<std::string>()));
  if (!t) throw ParseError(std::string("bad ") + field + " '" + j[field].get<std::string>() + "'");
  return *t;
}

}  // namespace

Note note_from_json_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("record is not a JSON object");
  Note n;
  if (!j.contains("noteId")) throw ParseError("missing noteId");
  n.note_id = j["noteId"].is_string() ? j["noteId"].get<std::string>() : j["noteId"].dump();
  if (n.note_id.empty()) throw ParseError("empty noteId");
  if (!j.contains("category") || !j["category"].is_string()) throw ParseError("missing category");
  n.category = parse_note_category(j["category"].get<std::string>());
  if (!j.contains("hadm_id")) throw ParseError("missing hadm_id");
  const auto& h = j["hadm_id"];
  if (h.is_number_integer()) {
    n.admission_key = h.get<std::int64_t>();
  } else if (h.is_string()) {
    try {
      std::size_t pos = 0;
      n.admission_key = std::stoll(h.get<std::string>(), &pos);
      if (pos != h.get<std::string>().size()) throw ParseError("bad hadm_id");
    } catch (const std::logic_error&) {
      throw ParseError("bad hadm_id '" + h.get<std::string>() + "'");
    }
  } else {
    throw ParseError("bad hadm_id");
  }
  n.admit_time = required_time(j, "admittime");
  n.chart_time = required_time(j, "charttime");
  if (n.chart_time.instant() < n.admit_time.instant()) throw ParseError("charttime earlier than admittime in " + n.note_id);
  if (!j.contains("text") || !j["text"].is_string()) throw ParseError("missing text");
  auto lines = split_lines(j["text"].get<std::string>());
  for (std::size_t i = 0; i < lines.size(); ++i) n.lines.push_back(NoteLine{static_cast<int>(i) + 1, std::move(lines[i])});
  return n;
}

std::vector<Note> ingest_notes(std::istream& in) {
  std::vector<Note> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(note_from_json_text(line));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

std::vector<Note> ingest_notes_lenient(std::istream& in, std::vector<NoteIngestError>& errors) {
  std::vector<Note> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(note_from_json_text(line));
    } catch (const ParseError& e) {
      errors.push_back({lineno, e.what()});
    }
  }
  return out;
}

void write_note_jsonl(std::ostream& out, const Note& note) {
  json j;
  j["noteId"] = note.note_id;
  j["category"] = to_string(note.category);
  j["hadm_id"] = note.admission_key;
  j["admittime"] = note.admit_time.to_string();
  j["charttime"] = note.chart_time.to_string();
  // Gaps left by filtering are written as empty lines so numbering survives.
  std::vector<std::string_view> slots(note.lines.empty() ? 0 : static_cast<std::size_t>(note.lines.back().line_no));
  for (const auto& l : note.lines) slots[static_cast<std::size_t>(l.line_no) - 1] = l.text;
  std::string text;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (i) text += '\n';
    text += slots[i];
  }
  j["text"] = text;
  out << j.dump() << '\n';
}

std::optional<std::string> section_header(std::string_view line) {
  auto t = trim(line);
  auto colon = t.find(':');
  if (colon == std::string_view::npos || colon == 0) return std::nullopt;
  auto name = trim(t.substr(0, colon));
  auto rest = trim(t.substr(colon + 1));
  if (name.empty() || name.size() > 60) return std::nullopt;
  bool has_letter = false, all_caps = true;
  for (char c : name) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      has_letter = true;
      if (std::islower(static_cast<unsigned char>(c))) all_caps = false;
    } else if (!(c == ' ' || c == '/' || c == '&' || c == '-' || c == '(' || c == ')')) {
      return std::nullopt;
    }
  }
  if (!has_letter) return std::nullopt;
  if (rest.empty()) return std::string(name);
  if (all_caps && count_tokens(name) >= 2) return std::string(name);
  return std::nullopt;
}

Note apply_section_filter(const Note& note, const std::vector<std::string>& patterns) {
  if (patterns.empty()) return note;
  std::vector<std::string> pats;
  for (auto p : patterns) {
    auto t = trim(p);
    if (!t.empty() && t.back() == ':') t.remove_suffix(1);
    if (!trim(t).empty()) pats.emplace_back(trim(t));
  }
  auto matches = [&pats](const std::string& name) {
    for (const auto& p : pats)
      if (glob_match_ci(p, name)) return true;
    return false;
  };
  Note out = note;
  out.lines.clear();
  bool removing = false;
  for (const auto& l : note.lines) {
    // A line whose label matches a pattern opens a removed section even when
    // text follows the colon ("PMH: HTN, DM").
    auto colon = l.text.find(':');
    if (colon != std::string::npos && matches(std::string(trim(std::string_view(l.text).substr(0, colon))))) {
      removing = true;
    } else if (auto h = section_header(l.text)) {
      removing = matches(*h);
    }
    if (!removing) out.lines.push_back(l);
  }
  return out;
}

std::vector<std::string> read_section_patterns(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.emplace_back(t);
  }
  return out;
}

std::vector<std::string> default_section_patterns() {
  auto text = embedded_asset("section_filters.txt");
  if (!text) return {};
  std::istringstream in{std::string(*text)};
  return read_section_patterns(in);
}

}  // namespace ehrcheck
