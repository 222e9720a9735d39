#include "ehrcheck/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>
#include <sstream>

#include "ehrcheck/record_store.hpp"
#include "ehrcheck/text_util.hpp"

namespace ehrcheck {

using nlohmann::json;

std::string entity_key(const EntityMention& m) { return m.surface + "@" + std::to_string(m.line_no); }

std::string row_key(const EntityMention& m, const PseudoRow& row) { return entity_key(m) + "#" + std::to_string(row.ordinal); }

json mention_to_json(const EntityMention& m) {
  json j{{"surface", m.surface}, {"entity_type", static_cast<int>(m.type)}, {"line", m.line_no}, {"ordinal", m.ordinal},
         {"values", m.raw_values}};
  if (m.raw_unit) j["unit"] = *m.raw_unit;
  if (m.raw_time_expr) j["time"] = *m.raw_time_expr;
  if (m.organism) j["organism"] = *m.organism;
  if (m.specimen) j["specimen"] = *m.specimen;
  if (!m.description.empty()) j["description"] = m.description;
  return j;
}

std::string_view to_string(TimeRegime r) {
  switch (r) {
    case TimeRegime::ExactTimestamp: return "ExactTimestamp";
    case TimeRegime::Narrative: return "Narrative";
    case TimeRegime::Unspecified: return "Unspecified";
  }
  return "?";
}

std::string_view to_string(AnchorKind a) {
  switch (a) {
    case AnchorKind::Admission: return "Admission";
    case AnchorKind::Discharge: return "Discharge";
    case AnchorKind::ChartDate: return "ChartDate";
    case AnchorKind::HospitalDay: return "HospitalDay";
    case AnchorKind::Yesterday: return "Yesterday";
    case AnchorKind::Literal: return "Literal";
  }
  return "?";
}

json time_tag_to_json(const TimeTag& t) {
  json j{{"regime", to_string(t.regime)}, {"in_current_stay", t.in_current_stay}};
  if (t.anchor) {
    json a{{"kind", to_string(t.anchor->kind)}};
    if (t.anchor->kind == AnchorKind::HospitalDay) a["day"] = t.anchor->hospital_day;
    if (t.anchor->kind == AnchorKind::Literal) a["literal"] = t.anchor->literal.to_string();
    j["anchor"] = a;
  }
  return j;
}

void Transcript::add(StageRecord r) {
  std::lock_guard lock(mu_);
  records_.push_back(std::move(r));
}

std::vector<StageRecord> Transcript::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

json Transcript::to_json() const {
  json out = json::array();
  for (const auto& r : records())
    out.push_back(json{{"stage", r.stage}, {"key", r.key}, {"prompt", r.prompt}, {"answer", r.answer},
                       {"parsed", r.parsed}, {"log", r.log}});
  return out;
}

namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

/// `number` occurs in `line` not glued to other digits.
bool contains_number(std::string_view line, std::string_view number) {
  for (std::size_t pos = line.find(number); pos != std::string_view::npos; pos = line.find(number, pos + 1)) {
    bool left_ok = pos == 0 || !(is_digit(line[pos - 1]) || (line[pos - 1] == '.' && pos >= 2 && is_digit(line[pos - 2])));
    auto end = pos + number.size();
    bool right_ok = end >= line.size() || !(is_digit(line[end]) || (line[end] == '.' && end + 1 < line.size() && is_digit(line[end + 1])));
    if (left_ok && right_ok) return true;
  }
  return false;
}

/// Splits on commas outside parentheses and brackets.
std::vector<std::string> split_top_level(std::string_view s) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(' || c == '[' || c == '{') ++depth;
    if ((c == ')' || c == ']' || c == '}') && depth > 0) --depth;
    if (c == ',' && depth == 0) {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty()) out.emplace_back(trim(cur));
  return out;
}

bool is_absent(std::string_view v) {
  auto t = to_lower(trim(v));
  return t.empty() || t == "nan" || t == "none" || t == "null" || t == "n/a" || t == "[]";
}

std::string strip_quotes(std::string_view s) {
  auto t = trim(s);
  while (!t.empty() && (t.front() == '`' || t.front() == '\'' || t.front() == '"')) t.remove_prefix(1);
  while (!t.empty() && (t.back() == '`' || t.back() == '\'' || t.back() == '"')) t.remove_suffix(1);
  return std::string(trim(t));
}

std::string numbered_text(const std::vector<NoteLine>& lines) {
  std::string s;
  for (const auto& l : lines) s += std::to_string(l.line_no) + ": " + l.text + "\n";
  return s;
}

std::string note_time(const DateTime& t) { return t.to_string(); }

std::string call(StageContext& ctx, const std::string& stage, const std::string& note_id, const std::string& key,
                 const std::map<std::string, std::string>& values, StageRecord& rec) {
  auto prompt = ctx.prompts.render(stage, values, note_id, key);
  rec.stage = stage;
  rec.key = key;
  rec.prompt = prompt.rendered_text;
  rec.answer = ctx.backend.complete(prompt);
  return rec.answer;
}

void record(StageContext& ctx, StageRecord rec) {
  if (ctx.transcript) ctx.transcript->add(std::move(rec));
}

std::optional<int> clock_seconds(const std::smatch& mt, int hi, int mi, int si, int api) {
  if (!mt[hi].matched) return std::nullopt;
  int h = std::stoi(mt[hi].str()), m = std::stoi(mt[mi].str());
  int s = mt[si].matched ? std::stoi(mt[si].str()) : 0;
  if (mt[api].matched) {
    char ap = static_cast<char>(std::tolower(static_cast<unsigned char>(mt[api].str()[0])));
    if (h < 1 || h > 12) return std::nullopt;
    if (ap == 'p' && h != 12) h += 12;
    if (ap == 'a' && h == 12) h = 0;
  }
  if (h > 23 || m > 59 || s > 59) return std::nullopt;
  return h * 3600 + m * 60 + s;
}

std::optional<Date> make_date(int y, int mo, int d) {
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

int year_of(Date d) { return static_cast<int>(std::chrono::year_month_day{d}.year()); }

std::string clean_time_text(std::string_view text) {
  auto s = replace_all(std::string(text), "[**", "");
  s = replace_all(std::move(s), "**]", "");
  return s;
}

/// Absolute YYYY-MM-DD with an optional clock time.
std::optional<DateTime> parse_literal(std::string_view text) {
  static const std::regex re(
      R"((\d{4})-(\d{1,2})-(\d{1,2})(?:[ T]+(?:at\s+)?(\d{1,2}):(\d{2})(?::(\d{2}))?\s*([AaPp][Mm])?)?)");
  auto s = clean_time_text(text);
  std::smatch mt;
  if (!std::regex_search(s, mt, re)) return std::nullopt;
  auto d = make_date(std::stoi(mt[1].str()), std::stoi(mt[2].str()), std::stoi(mt[3].str()));
  if (!d) return std::nullopt;
  DateTime t = DateTime::on(*d);
  if (mt[4].matched) {
    auto secs = clock_seconds(mt, 4, 5, 6, 7);
    if (!secs) return std::nullopt;
    t.seconds = *secs;
  }
  return t;
}

}  // namespace

std::string bracket_date(const DateTime& t) {
  std::string s = "[**" + t.date_string() + "**]";
  if (t.has_time()) {
    int secs = *t.seconds;
    int h = secs / 3600, m = (secs / 60) % 60;
    char buf[16];
    std::snprintf(buf, sizeof buf, " %02d:%02d", h, m);
    s += buf;
  }
  return s;
}

std::optional<TimeAnchor> parse_narrative_anchor(std::string_view text) {
  auto s = to_lower(clean_time_text(text));
  static const std::regex hd(R"((?:^|[^a-z])(?:hd|hospital day|hosp day|day)\s*#?\s*(\d{1,3})(?:[^0-9]|$))");
  std::smatch mt;
  if (std::regex_search(s, mt, hd)) {
    int k = std::stoi(mt[1].str());
    if (k >= 1) return TimeAnchor{AnchorKind::HospitalDay, k, {}};
  }
  if (contains_word_ci(s, "yesterday") || contains_ci(s, "last night")) return TimeAnchor{AnchorKind::Yesterday, 0, {}};
  if (contains_ci(s, "admission") || contains_word_ci(s, "admit") || contains_word_ci(s, "admitted") ||
      contains_ci(s, "presentation"))
    return TimeAnchor{AnchorKind::Admission, 0, {}};
  if (contains_ci(s, "discharge")) return TimeAnchor{AnchorKind::Discharge, 0, {}};
  if (contains_word_ci(s, "today") || contains_ci(s, "this morning") || contains_word_ci(s, "tonight") ||
      contains_ci(s, "this am") || contains_ci(s, "chart date"))
    return TimeAnchor{AnchorKind::ChartDate, 0, {}};
  return std::nullopt;
}

std::optional<DateTime> resolve_time_text(std::string_view text, const DateTime& admit, const DateTime& chart) {
  if (auto t = parse_literal(text)) return t;
  auto s = clean_time_text(text);
  static const std::regex md(
      R"((?:^|[^\d-])(\d{1,2})[-/](\d{1,2})(?:[^\d/-]|$)(?:\s*(?:at\s+)?(\d{1,2}):(\d{2})(?::(\d{2}))?\s*([AaPp][Mm])?)?)");
  std::smatch mt;
  if (std::regex_search(s, mt, md)) {
    auto d = make_date(year_of(chart.date), std::stoi(mt[1].str()), std::stoi(mt[2].str()));
    if (d) {
      DateTime t = DateTime::on(*d);
      if (mt[3].matched) {
        auto secs = clock_seconds(mt, 3, 4, 5, 6);
        if (!secs) return std::nullopt;
        t.seconds = *secs;
      }
      return t;
    }
  }
  if (auto a = parse_narrative_anchor(s)) {
    switch (a->kind) {
      case AnchorKind::HospitalDay: return DateTime::on(add_days(admit.date, a->hospital_day - 1));
      case AnchorKind::Yesterday: return DateTime::on(add_days(chart.date, -1));
      case AnchorKind::Admission: return DateTime::on(admit.date);
      case AnchorKind::Discharge:
      case AnchorKind::ChartDate: return DateTime::on(chart.date);
      case AnchorKind::Literal: break;
    }
  }
  return std::nullopt;
}

// ---- NER ----

std::optional<std::vector<EntityMention>> parse_ner_answer(std::string_view answer, const SubText& sub,
                                                           std::vector<std::string>& log) {
  static const std::regex item_re(R"(^(.+?)\s+-\s+category\s*([123])\s*(?:\((.*)\))?\s*\.?$)", std::regex::icase);
  static const std::regex num_re(R"(^\s*([-+]?\d+(?:\.\d+)?)\s*(.*)$)");
  bool any_answer = false;
  std::vector<EntityMention> out;
  std::map<std::string, std::set<int>> used;  // (surface|value) -> lines taken
  auto place = [&](const std::string& surface, const std::string& value) -> int {
    auto key = to_lower(surface) + "|" + value;
    auto scan = [&](bool core_only) -> int {
      for (const auto& l : sub.lines) {
        if (core_only && (l.line_no < sub.core.first || l.line_no > sub.core.last)) continue;
        if (!contains_word_ci(l.text, surface)) continue;
        if (!value.empty() && !contains_number(l.text, value)) continue;
        if (used[key].count(l.line_no)) continue;
        return l.line_no;
      }
      return 0;
    };
    int line = scan(true);
    if (!line) line = scan(false);
    if (line) used[key].insert(line);
    return line;
  };

  for (const auto& raw : split_lines(answer)) {
    auto line = trim(raw);
    if (!starts_with_ci(line, "answer:")) continue;
    any_answer = true;
    auto body = trim(line.substr(7));
    if (body.empty() || iequals(body, "nothing") || iequals(body, "nothing.")) continue;
    for (const auto& item : split_top_level(body)) {
      std::smatch mt;
      if (!std::regex_match(item, mt, item_re)) {
        log.push_back("ner: item does not match the grammar: '" + item + "'");
        continue;
      }
      EntityMention m;
      m.surface = std::string(trim(mt[1].str()));
      m.type = static_cast<EntityType>(std::stoi(mt[2].str()));
      std::vector<std::string> values;
      if (mt[3].matched) {
        auto detail = std::string(trim(mt[3].str()));
        auto colon = detail.find(':');
        auto label = to_lower(trim(std::string_view(detail).substr(0, colon == std::string::npos ? 0 : colon)));
        auto rest = colon == std::string::npos ? detail : std::string(trim(std::string_view(detail).substr(colon + 1)));
        if (label.find("numeric") != std::string::npos || label.find("value") != std::string::npos) {
          for (auto part : split(replace_all(rest, "/", ","), ',')) {
            std::smatch nm;
            auto p = std::string(trim(part));
            if (p.empty()) continue;
            if (!std::regex_match(p, nm, num_re)) {
              log.push_back("ner: '" + p + "' is not a number for " + m.surface);
              continue;
            }
            auto d = Decimal::parse(nm[1].str());
            if (!d) continue;
            values.push_back(nm[1].str());
            auto unit = trim(nm[2].str());
            if (!unit.empty() && !m.raw_unit) m.raw_unit = std::string(unit);
          }
        } else if (label.find("description") != std::string::npos) {
          m.description = rest;
        }
      }
      if (m.type == EntityType::Type1 && values.empty()) {
        log.push_back("ner: category 1 item without a numeric value: '" + item + "'");
        continue;
      }
      if (m.type != EntityType::Type1) values.clear();
      if (values.empty()) values.emplace_back();
      for (const auto& v : values) {
        EntityMention one = m;
        if (!v.empty()) one.raw_values = {v};
        one.line_no = place(one.surface, v);
        if (!one.line_no) {
          log.push_back("ner: '" + one.surface + (v.empty() ? "" : " " + v) + "' not found in the sub-text");
          continue;
        }
        out.push_back(std::move(one));
      }
    }
  }
  if (!any_answer) return std::nullopt;
  return out;
}

std::vector<EntityMention> merge_mentions(std::vector<EntityMention> mentions) {
  std::stable_sort(mentions.begin(), mentions.end(),
                   [](const EntityMention& a, const EntityMention& b) { return a.line_no < b.line_no; });
  std::vector<EntityMention> out;
  std::set<std::tuple<std::string, int, std::string>> seen;
  for (auto& m : mentions) {
    auto key = std::make_tuple(to_lower(m.surface), m.line_no, m.raw_values.empty() ? std::string() : m.raw_values[0]);
    if (!seen.insert(key).second) continue;
    out.push_back(std::move(m));
  }
  std::map<std::string, std::vector<int>> lines;
  for (auto& m : out) {
    auto& ls = lines[to_lower(m.surface)];
    if (ls.empty() || ls.back() != m.line_no) ls.push_back(m.line_no);
    m.ordinal = static_cast<int>(ls.size());
  }
  return out;
}

std::vector<EntityMention> recognize_entities(const SubText& sub, StageContext& ctx) {
  StageRecord rec;
  auto key = std::to_string(sub.core.first) + "-" + std::to_string(sub.core.last);
  call(ctx, "ner", sub.parent_note_id, key, {{"CLINICAL_NOTE", sub.text}}, rec);
  auto parsed = parse_ner_answer(rec.answer, sub, rec.log);
  std::vector<EntityMention> out;
  if (!parsed) {
    rec.log.push_back("ner: no Answer line; sub-text yields no entities");
  } else {
    out = std::move(*parsed);
  }
  rec.parsed = json::array();
  for (const auto& m : out) rec.parsed.push_back(mention_to_json(m));
  record(ctx, std::move(rec));
  return out;
}

// ---- time filter ----

TimeAnswer parse_time_answer(std::string_view answer, std::vector<std::string>& log) {
  TimeAnswer out;
  auto lower = to_lower(answer);
  auto section = [&](int k) -> std::optional<std::string> {
    auto tag = "[answer " + std::to_string(k) + "]";
    auto pos = lower.find(tag);
    if (pos == std::string::npos) return std::nullopt;
    auto start = pos + tag.size();
    auto next = lower.find("[answer", start);
    return std::string(trim(answer.substr(start, next == std::string::npos ? std::string::npos : next - start)));
  };
  auto a1 = section(1), a3 = section(3);
  if (auto tpos = lower.find("time:"); tpos != std::string::npos) {
    auto end = answer.find('\n', tpos);
    out.time_text = strip_quotes(answer.substr(tpos + 5, end == std::string::npos ? std::string::npos : end - tpos - 5));
    if (is_absent(out.time_text)) out.time_text.clear();
  }
  auto fail = [&](const std::string& why) {
    log.push_back("time_filter: " + why + "; treated as unspecified");
    out.tag = TimeTag::unspecified();
    out.parsed = false;
    return out;
  };
  if (!a1 || !a3) return fail("missing [Answer 1] or [Answer 3]");
  bool in_stay;
  if (starts_with_ci(*a1, "yes")) in_stay = true;
  else if (starts_with_ci(*a1, "no")) in_stay = false;
  else return fail("[Answer 1] is neither Yes nor No");

  int option = 0;
  auto o = to_lower(*a3);
  for (char c : o)
    if (c >= '1' && c <= '3') {
      option = c - '0';
      break;
    } else if (!std::isspace(static_cast<unsigned char>(c)) && c != '(' && c != '.') {
      break;
    }
  if (!option) {
    if (o.find("indeterminate") != std::string::npos || o.find("unspecified") != std::string::npos) option = 1;
    else if (o.find("narrative") != std::string::npos) option = 3;
    else if (o.find("date") != std::string::npos || o.find("exact") != std::string::npos) option = 2;
  }
  if (!option) return fail("[Answer 3] names no option");

  TimeTag tag;
  tag.in_current_stay = in_stay;
  if (option == 2) {
    auto lit = parse_literal(out.time_text);
    if (!lit) {
      if (!in_stay) {
        out.tag = tag;
        out.parsed = true;
        return out;
      }
      return fail("written date '" + out.time_text + "' does not parse");
    }
    tag.regime = TimeRegime::ExactTimestamp;
    tag.anchor = TimeAnchor{AnchorKind::Literal, 0, *lit};
  } else if (option == 3) {
    auto a = parse_narrative_anchor(out.time_text);
    if (!a) {
      if (!in_stay) {
        out.tag = tag;
        out.parsed = true;
        return out;
      }
      return fail("narrative time '" + out.time_text + "' names no anchor");
    }
    tag.regime = TimeRegime::Narrative;
    tag.anchor = *a;
  }
  out.tag = tag;
  out.parsed = true;
  return out;
}

TimeTag filter_time(const EntityMention& m, const SubText& sub, const Note& note, StageContext& ctx) {
  StageRecord rec;
  call(ctx, "time_filter", note.note_id, entity_key(m),
       {{"ENTITY", m.surface}, {"ADMISSION", note_time(note.admit_time)}, {"CHARTTIME", note_time(note.chart_time)},
        {"CLINICAL_NOTE", sub.text}},
       rec);
  auto parsed = parse_time_answer(rec.answer, rec.log);
  rec.parsed = time_tag_to_json(parsed.tag);
  rec.parsed["time_text"] = parsed.time_text;
  record(ctx, std::move(rec));
  return parsed.tag;
}

// ---- table identification ----

std::optional<std::vector<TablePair>> parse_table_answer(std::string_view answer, const SchemaProfile& profile,
                                                         std::vector<std::string>& log) {
  auto lower = to_lower(answer);
  auto pos = lower.find("selected-table:");
  if (pos == std::string::npos) {
    log.push_back("table_identification: no Selected-Table line");
    return std::nullopt;
  }
  auto end = answer.find('\n', pos);
  auto body = std::string(trim(answer.substr(pos + 15, end == std::string::npos ? std::string::npos : end - pos - 15)));
  std::vector<TablePair> out;
  static const std::regex brace(R"(\{([^}]*)\})");
  bool any = false;
  for (std::sregex_iterator it(body.begin(), body.end(), brace), e; it != e; ++it) {
    any = true;
    auto parts = split((*it)[1].str(), ',');
    TablePair p;
    std::vector<std::string> names;
    for (auto& s : parts)
      if (!trim(s).empty()) names.push_back(to_lower(strip_quotes(s)));
    if (names.empty() || names.size() > 2) {
      log.push_back("table_identification: malformed pair '" + (*it)[0].str() + "'");
      continue;
    }
    p.event_table = names[0];
    if (names.size() == 2) p.dict_table = names[1];
    if (!profile.is_legal(p)) {
      log.push_back("table_identification: illegal pair " + to_string(p) + " dropped");
      continue;
    }
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  if (!any && !contains_ci(body, "none")) {
    log.push_back("table_identification: unreadable selection '" + body + "'");
    return std::nullopt;
  }
  return out;
}

std::vector<TablePair> identify_tables(const EntityMention& m, const SubText& sub, StageContext& ctx) {
  std::string tables;
  for (const auto& p : ctx.profile.legal_pairs) tables += to_string(p) + "\n";
  StageRecord rec;
  call(ctx, "table_identification", sub.parent_note_id, entity_key(m),
       {{"ENTITY", m.surface}, {"TABLES", tables}, {"CLINICAL_NOTE", sub.text}}, rec);
  auto parsed = parse_table_answer(rec.answer, ctx.profile, rec.log);
  std::vector<TablePair> out = parsed.value_or(std::vector<TablePair>{});
  rec.parsed = json::array();
  for (const auto& p : out) rec.parsed.push_back(to_string(p));
  record(ctx, std::move(rec));
  return out;
}

// ---- pseudo rows ----

std::vector<std::pair<std::string, ColumnRole>> pseudo_columns(const TablePair& pair, const SchemaProfile& profile) {
  std::vector<std::pair<std::string, ColumnRole>> out;
  const auto& ev = profile.table(pair.event_table);
  if (pair.dict_table) {
    if (auto c = profile.table(*pair.dict_table).role_column(ColumnRole::Label)) out.emplace_back(to_upper(*c), ColumnRole::Label);
  } else if (auto c = ev.role_column(ColumnRole::Label)) {
    out.emplace_back(to_upper(*c), ColumnRole::Label);
  }
  for (auto role : {ColumnRole::Value, ColumnRole::Unit, ColumnRole::PointTime, ColumnRole::StartTime, ColumnRole::EndTime,
                    ColumnRole::Organism, ColumnRole::Specimen})
    if (auto c = ev.role_column(role)) out.emplace_back(to_upper(*c), role);
  return out;
}

std::vector<PseudoRow> parse_pseudo_rows(std::string_view answer, const TablePair& pair, const SchemaProfile& profile,
                                         std::vector<std::string>& log) {
  auto cols = pseudo_columns(pair, profile);
  auto role_for_key = [&](std::string key) -> std::optional<ColumnRole> {
    key = to_upper(key);
    if (auto dot = key.rfind('.'); dot != std::string::npos) key = key.substr(dot + 1);
    for (const auto& [name, role] : cols)
      if (name == key) return role;
    return std::nullopt;
  };
  static const std::regex head(R"(^\s*Mentioned\s*\[(\d+)\]\s*[.:]?\s*(.*)$)", std::regex::icase);
  static const std::regex key_re(R"(([A-Za-z][A-Za-z0-9_.]*)\s*:)");
  std::vector<PseudoRow> rows;
  std::set<int> seen;
  for (const auto& raw : split_lines(answer)) {
    std::smatch mt;
    if (!std::regex_match(raw, mt, head)) continue;
    int k = std::stoi(mt[1].str());
    std::string body = mt[2].str();
    struct KeyAt {
      std::size_t start, value_start;
      ColumnRole role;
    };
    std::vector<KeyAt> keys;
    for (std::sregex_iterator it(body.begin(), body.end(), key_re), e; it != e; ++it) {
      auto pos = static_cast<std::size_t>(it->position());
      auto before = trim(std::string_view(body).substr(0, pos));
      if (!before.empty() && before.back() != ',') continue;
      auto role = role_for_key((*it)[1].str());
      if (!role) continue;
      keys.push_back({pos, pos + static_cast<std::size_t>(it->length()), *role});
    }
    PseudoRow row;
    row.pair = pair;
    row.ordinal = k;
    row.evidence_quote = std::string(trim(raw));
    for (std::size_t i = 0; i < keys.size(); ++i) {
      auto end = i + 1 < keys.size() ? keys[i + 1].start : body.size();
      auto v = trim(std::string_view(body).substr(keys[i].value_start, end - keys[i].value_start));
      while (!v.empty() && v.back() == ',') v = trim(v.substr(0, v.size() - 1));
      if (is_absent(v)) continue;
      row.cells.emplace(keys[i].role, std::string(v));
    }
    if (row.cells.empty()) {
      log.push_back("pseudo_table: row [" + std::to_string(k) + "] has no usable cells");
      continue;
    }
    if (!seen.insert(k).second) {
      log.push_back("pseudo_table: duplicate row [" + std::to_string(k) + "] ignored");
      continue;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) log.push_back("pseudo_table: no Mentioned rows");
  return rows;
}

namespace {

json row_to_json(const PseudoRow& r) {
  json cells = json::object();
  for (const auto& [role, v] : r.cells) cells[std::string(to_string(role))] = v;
  json j{{"pair", to_string(r.pair)}, {"ordinal", r.ordinal}, {"cells", cells}};
  if (!r.confirmed.empty()) {
    json c = json::object();
    for (const auto& [role, ok] : r.confirmed) c[std::string(to_string(role))] = ok;
    j["confirmed"] = c;
  }
  return j;
}

std::string column_name(const PseudoRow& row, ColumnRole role, const SchemaProfile& profile) {
  for (const auto& [name, r] : pseudo_columns(row.pair, profile))
    if (r == role) return name;
  return std::string(to_string(role));
}

std::string qualified(const PseudoRow& row, ColumnRole role, const SchemaProfile& profile) {
  auto table = role == ColumnRole::Label && row.pair.dict_table ? *row.pair.dict_table : row.pair.event_table;
  auto t = table;
  if (!t.empty()) t[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
  return t + "." + column_name(row, role, profile);
}

}  // namespace

std::vector<PseudoRow> build_pseudo_rows(const EntityMention& m, const SubText& sub, const TablePair& pair,
                                         StageContext& ctx) {
  std::string columns;
  for (const auto& [name, role] : pseudo_columns(pair, ctx.profile)) columns += name + "\n";
  StageRecord rec;
  call(ctx, "pseudo_table", sub.parent_note_id, entity_key(m),
       {{"TABLE", to_string(pair)}, {"ENTITY", m.surface}, {"COLUMNS", columns}, {"CLINICAL_NOTE", sub.text}}, rec);
  auto rows = parse_pseudo_rows(rec.answer, pair, ctx.profile, rec.log);
  rec.parsed = json::array();
  for (const auto& r : rows) rec.parsed.push_back(row_to_json(r));
  record(ctx, std::move(rec));
  return rows;
}

// ---- self-correction ----

std::map<int, bool> parse_verdicts(std::string_view answer, std::vector<std::string>& log) {
  static const std::regex head(R"(^\s*\[(\d+)\])");
  std::map<int, bool> out;
  int current = 0;
  for (const auto& raw : split_lines(answer)) {
    std::smatch mt;
    if (std::regex_search(raw, mt, head)) {
      current = std::stoi(mt[1].str());
      out.emplace(current, false);
    }
    auto t = trim(raw);
    if (current && starts_with_ci(t, "answer:")) {
      auto v = trim(t.substr(7));
      if (starts_with_ci(v, "yes")) out[current] = true;
      else if (!starts_with_ci(v, "no")) log.push_back("self_correction: malformed verdict for [" + std::to_string(current) + "]");
    }
  }
  return out;
}

PseudoRow self_correct(const PseudoRow& row, const EntityMention& m, const SubText& sub, const Note& note,
                       StageContext& ctx) {
  if (row.cells.empty()) return row;
  std::vector<ColumnRole> order;
  std::string questions;
  int k = 0;
  for (const auto& [role, v] : row.cells) {
    order.push_back(role);
    questions += "[" + std::to_string(++k) + "] Is it directly mentioned that " + m.surface + "'s " +
                 column_name(row, role, ctx.profile) + " is `" + v + "'?\n";
  }
  StageRecord rec;
  call(ctx, "self_correction", note.note_id, row_key(m, row),
       {{"ENTITY", m.surface}, {"ADMISSION", note_time(note.admit_time)}, {"CHARTTIME", note_time(note.chart_time)},
        {"CLINICAL_NOTE", sub.text}, {"QUESTIONS", questions}},
       rec);
  auto verdicts = parse_verdicts(rec.answer, rec.log);
  PseudoRow out = row;
  out.cells.clear();
  out.confirmed.clear();
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto role = order[i];
    const auto& text = row.cells.at(role);
    auto it = verdicts.find(static_cast<int>(i) + 1);
    bool yes = it != verdicts.end() && it->second;
    bool present = contains_ci(sub.text, text);
    if (yes && !present) rec.log.push_back("self_correction: '" + text + "' confirmed but not in the sub-text");
    bool keep = yes && present;
    out.confirmed[role] = keep;
    if (keep) out.cells.emplace(role, text);
  }
  rec.parsed = row_to_json(out);
  record(ctx, std::move(rec));
  return out;
}

// ---- reformat ----

std::map<std::string, std::string> parse_reformat_answer(std::string_view answer) {
  static const std::regex line_re(R"(^\s*(?:[A-Za-z_][A-Za-z0-9_]*\.)?([A-Za-z_][A-Za-z0-9_]*)\s*[=:]\s*(.*?)\s*$)");
  std::map<std::string, std::string> out;
  for (const auto& raw : split_lines(answer)) {
    std::smatch mt;
    if (!std::regex_match(raw, mt, line_re)) continue;
    out.emplace(to_upper(mt[1].str()), strip_quotes(mt[2].str()));
  }
  return out;
}

ReformattedRow reformat_values(const PseudoRow& row, const EntityMention& m, const Note& note, StageContext& ctx) {
  ReformattedRow out;
  out.pair = row.pair;
  out.ordinal = row.ordinal;
  if (row.cells.empty()) return out;
  const auto& ev = ctx.profile.table(row.pair.event_table);
  std::string schema, given;
  for (const auto& [role, v] : row.cells) {
    auto q = qualified(row, role, ctx.profile);
    auto kind = is_time_role(role) ? ValueKind::DateTime : role == ColumnRole::Value ? ValueKind::Decimal : ValueKind::Text;
    schema += q + " (" + std::string(to_string(kind)) + ")\n";
    given += q + ": " + v + "\n";
  }
  StageRecord rec;
  call(ctx, "reformat", note.note_id, row_key(m, row),
       {{"SCHEMA", schema}, {"ADMISSION", note_time(note.admit_time)}, {"CHARTTIME", note_time(note.chart_time)},
        {"GIVEN_DATA", given}},
       rec);
  auto answer = parse_reformat_answer(rec.answer);
  for (const auto& [role, raw] : row.cells) {
    auto col = column_name(row, role, ctx.profile);
    auto it = answer.find(col);
    std::optional<std::string> suggested;
    if (it != answer.end() && !is_absent(it->second)) suggested = it->second;
    if (is_time_role(role)) {
      std::optional<DateTime> t;
      if (suggested) t = DateTime::parse(*suggested);
      if (!t) t = resolve_time_text(raw, note.admit_time, note.chart_time);
      if (!t) {
        rec.log.push_back("reformat: time '" + raw + "' cannot be resolved; dropped");
        out.time_dropped = true;
        continue;
      }
      out.cells.emplace(role, *t);
    } else if (role == ColumnRole::Value) {
      std::optional<Decimal> d;
      if (suggested) d = Decimal::parse(trim(*suggested));
      if (!d) {
        static const std::regex lead(R"(^\s*([-+]?\d+(?:\.\d+)?))");
        std::smatch mt;
        if (std::regex_search(raw, mt, lead)) d = Decimal::parse(mt[1].str());
      }
      if (!d) {
        rec.log.push_back("reformat: value '" + raw + "' is not a number; dropped");
        continue;
      }
      out.cells.emplace(role, *d);
    } else {
      auto kind = ev.role_column(role) ? ev.column(*ev.role_column(role)).kind : ValueKind::Text;
      auto text = std::string(trim(suggested.value_or(raw)));
      if (kind == ValueKind::Text || role == ColumnRole::Label) {
        out.cells.emplace(role, text);
      } else if (auto c = parse_cell(kind, text)) {
        out.cells.emplace(role, *c);
      } else {
        rec.log.push_back("reformat: '" + text + "' does not fit " + col + "; dropped");
      }
    }
  }
  json cells = json::object();
  for (const auto& [role, v] : out.cells) cells[std::string(to_string(role))] = cell_to_string(v);
  rec.parsed = json{{"cells", cells}, {"time_dropped", out.time_dropped}};
  record(ctx, std::move(rec));
  return out;
}

// ---- segmentation ----

std::optional<std::vector<LineRange>> LlmSplitter::split(const std::vector<NoteLine>& prefix, int n) {
  if (prefix.empty()) return std::nullopt;
  StageRecord rec;
  rec.stage = "segmentation";
  rec.key = std::to_string(prefix.front().line_no) + "-" + std::to_string(prefix.back().line_no);
  auto prompt = prompts_.render("segmentation", {{"N", std::to_string(n)}, {"CLINICAL_NOTE", numbered_text(prefix)}},
                                note_id_, rec.key);
  rec.prompt = prompt.rendered_text;
  std::optional<std::vector<LineRange>> out;
  try {
    rec.answer = backend_.complete(prompt);
    out = parse_section_ranges(rec.answer);
    if (!out) rec.log.push_back("segmentation: answer is not a bracketed section list");
  } catch (const BackendError& e) {
    rec.log.push_back(std::string("segmentation: ") + e.what());
  }
  rec.parsed = out ? json(format_section_ranges(*out)) : json(nullptr);
  if (transcript_) transcript_->add(std::move(rec));
  return out;
}

// ---- formatting ----

std::string format_ner_item(const std::string& surface, EntityType type, const std::vector<std::string>& values,
                            const std::string& description) {
  std::string s = surface + " - category " + std::to_string(static_cast<int>(type));
  if (type == EntityType::Type1) {
    s += " (numeric value: ";
    for (std::size_t i = 0; i < values.size(); ++i) s += (i ? ", " : "") + values[i];
    s += ")";
  } else if (type == EntityType::Type3 && !description.empty()) {
    s += " (description: " + description + ")";
  }
  return s;
}

std::string format_time_answer(bool in_stay, const std::string& quote, const std::string& time_text, int option) {
  static const char* names[] = {"", "Indeterminate", "Written date", "Narrative"};
  return std::string("[Answer 1] ") + (in_stay ? "Yes" : "No") + "\n[Answer 2] Note: `" + quote + "'\nTime: `" +
         (time_text.empty() ? "none" : time_text) + "'\n[Answer 3] " + std::to_string(option) + ". " + names[option] + "\n";
}

std::string format_table_answer(const std::vector<TablePair>& pairs) {
  if (pairs.empty()) return "Selected-Table: [none]\n";
  std::string s = "Selected-Table: [";
  for (std::size_t i = 0; i < pairs.size(); ++i) s += (i ? ", " : "") + to_string(pairs[i]);
  return s + "]\n";
}

std::string format_pseudo_row(int k, const std::vector<std::pair<std::string, std::string>>& cells) {
  std::string s = "Mentioned [" + std::to_string(k) + "]. ";
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? ", " : "") + cells[i].first + ": " + cells[i].second;
  return s + "\n";
}

std::string format_verdicts(const std::vector<std::pair<std::string, bool>>& questions) {
  std::string s;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    s += "[" + std::to_string(i + 1) + "] Is it directly mentioned that " + questions[i].first + "?\n";
    s += std::string("Answer: ") + (questions[i].second ? "Yes" : "No") + "\n";
  }
  return s;
}

std::string format_reformat_answer(const std::string& table, const std::vector<std::pair<std::string, std::string>>& cells) {
  std::string s;
  for (const auto& [col, v] : cells) s += table + "." + col + " = " + v + "\n";
  return s;
}

}  // namespace ehrcheck
