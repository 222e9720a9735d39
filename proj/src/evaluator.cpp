#include "ehrcheck/evaluator.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "ehrcheck/errors.hpp"
#include "ehrcheck/text_util.hpp"

namespace ehrcheck {

using nlohmann::json;

json gold_to_json(const GoldRecord& g) {
  json entities = json::array();
  for (const auto& e : g.entities)
    entities.push_back(json{{"entity", e.surface},
                            {"entity_type", static_cast<int>(e.type)},
                            {"position", e.line_no},
                            {"tag", e.label == Label::Consistent ? "consistent" : "inconsistent"},
                            {"errors", e.errors},
                            {"error_columns", e.error_columns},
                            {"missing", e.missing},
                            {"time", e.time}});
  return json{{"noteId", g.note_id}, {"category", to_string(g.category)}, {"entities", entities}};
}

GoldRecord gold_from_json(const json& j) {
  try {
    GoldRecord g;
    g.note_id = j.at("noteId").is_string() ? j["noteId"].get<std::string>() : j["noteId"].dump();
    g.category = parse_note_category(j.at("category").get<std::string>());
    for (const auto& ej : j.at("entities")) {
      GoldEntity e;
      e.surface = ej.at("entity").get<std::string>();
      int type = ej.at("entity_type").get<int>();
      if (type < 1 || type > 3) throw ParseError("entity_type must be 1, 2 or 3");
      e.type = static_cast<EntityType>(type);
      e.line_no = ej.at("position").get<int>();
      e.label = parse_label(ej.at("tag").get<std::string>());
      if (e.label == Label::Unverifiable) throw ParseError("gold tag must be consistent or inconsistent");
      e.errors = ej.value("errors", 0);
      e.error_columns = ej.value("error_columns", std::vector<std::string>{});
      e.missing = ej.value("missing", false);
      if (ej.contains("time")) e.time = ej["time"].is_string() ? ej["time"].get<std::string>() : ej["time"].dump();
      g.entities.push_back(std::move(e));
    }
    return g;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed gold record: ") + e.what());
  }
}

std::vector<GoldRecord> read_gold(std::istream& in) {
  std::vector<GoldRecord> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(gold_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), lineno);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

void write_gold(std::ostream& out, const std::vector<GoldRecord>& golds) {
  for (const auto& g : golds) out << gold_to_json(g).dump() << '\n';
}

MatchRule parse_match_rule(std::string_view text) {
  auto t = to_lower(trim(text));
  if (t == "surface-line" || t == "surface+line") return MatchRule::SurfaceAndLine;
  if (t == "surface") return MatchRule::SurfaceOnly;
  throw ConfigError("unknown match rule '" + std::string(text) + "'");
}

namespace {

std::string normalize_surface(std::string_view s) {
  std::istringstream in(to_lower(s));
  std::string out, tok;
  while (in >> tok) {
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

double pct(int num, int den) { return den == 0 ? 0.0 : 100.0 * num / den; }

}  // namespace

MetricTriple score_note(const GoldRecord& gold, const VerificationReport& report, MatchRule rule) {
  if (gold.note_id != report.note_id)
    throw EvaluationError("note id mismatch: gold " + gold.note_id + " vs report " + report.note_id);
  std::vector<const GoldEntity*> g;
  for (const auto& e : gold.entities)
    if (e.type != EntityType::Type3) g.push_back(&e);
  std::vector<const EntityResult*> r;
  for (const auto& e : report.entities)
    if (e.type != EntityType::Type3) r.push_back(&e);

  MetricTriple m;
  m.gold = static_cast<int>(g.size());
  m.recognized = static_cast<int>(r.size());
  std::vector<bool> used(r.size(), false);
  for (const auto* ge : g) {
    auto key = normalize_surface(ge->surface);
    // Prefer a partner with the same label so duplicate keys never cost a match.
    std::optional<std::size_t> pick;
    for (int pass = 0; pass < 2 && !pick; ++pass) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (used[i] || normalize_surface(r[i]->surface) != key) continue;
        if (rule == MatchRule::SurfaceAndLine && r[i]->line_no != ge->line_no) continue;
        if (pass == 0 && r[i]->label != ge->label) continue;
        pick = i;
        break;
      }
    }
    if (!pick) continue;
    used[*pick] = true;
    ++m.matched;
    if (r[*pick]->label == ge->label) ++m.correct;
  }
  m.recall = pct(m.correct, m.gold);
  m.precision = pct(m.correct, m.recognized);
  if (m.matched > 0) m.intersection = pct(m.correct, m.matched);
  return m;
}

namespace {

struct Accumulator {
  double recall = 0, precision = 0, intersection = 0;
  int notes = 0, inotes = 0;

  void add(const MetricTriple& t) {
    recall += t.recall;
    precision += t.precision;
    ++notes;
    if (t.intersection) {
      intersection += *t.intersection;
      ++inotes;
    }
  }

  AveragedMetrics result() const {
    AveragedMetrics a;
    a.notes = notes;
    a.intersection_notes = inotes;
    if (notes) {
      a.recall = recall / notes;
      a.precision = precision / notes;
    }
    if (inotes) a.intersection = intersection / inotes;
    return a;
  }
};

}  // namespace

CorpusMetrics score_corpus(const std::vector<GoldRecord>& golds, const std::vector<VerificationReport>& reports,
                           MatchRule rule) {
  std::map<std::string, const VerificationReport*> by_id;
  for (const auto& r : reports) by_id[r.note_id] = &r;
  std::set<std::string> gold_ids;
  std::vector<std::string> missing_reports, missing_gold;
  for (const auto& g : golds) {
    gold_ids.insert(g.note_id);
    if (!by_id.count(g.note_id)) missing_reports.push_back(g.note_id);
  }
  for (const auto& r : reports)
    if (!gold_ids.count(r.note_id)) missing_gold.push_back(r.note_id);
  if (!missing_reports.empty() || !missing_gold.empty()) {
    std::string msg = "unmatched notes:";
    for (const auto& id : missing_reports) msg += " " + id + " (no report)";
    for (const auto& id : missing_gold) msg += " " + id + " (no gold)";
    throw EvaluationError(msg);
  }
  CorpusMetrics out;
  std::map<NoteCategory, Accumulator> cats;
  Accumulator total;
  for (const auto& g : golds) {
    auto t = score_note(g, *by_id.at(g.note_id), rule);
    cats[g.category].add(t);
    total.add(t);
    out.per_note[g.note_id] = t;
  }
  for (const auto& [c, acc] : cats) out.by_category[c] = acc.result();
  out.total = total.result();
  return out;
}

namespace {

json averaged_json(const AveragedMetrics& a) {
  return json{{"recall", a.recall},
              {"precision", a.precision},
              {"intersection", a.intersection ? json(*a.intersection) : json(nullptr)},
              {"notes", a.notes},
              {"intersection_notes", a.intersection_notes}};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

json metrics_to_json(const CorpusMetrics& m) {
  json cats = json::object();
  for (const auto& [c, a] : m.by_category) cats[std::string(to_string(c))] = averaged_json(a);
  json notes = json::object();
  for (const auto& [id, t] : m.per_note)
    notes[id] = json{{"recall", t.recall},
                     {"precision", t.precision},
                     {"intersection", t.intersection ? json(*t.intersection) : json(nullptr)},
                     {"correct", t.correct},
                     {"gold", t.gold},
                     {"recognized", t.recognized},
                     {"matched", t.matched}};
  return json{{"total", averaged_json(m.total)}, {"by_category", cats}, {"per_note", notes}};
}

std::string format_metrics_table(const CorpusMetrics& m) {
  std::vector<std::pair<std::string, AveragedMetrics>> rows;
  for (const auto& [c, a] : m.by_category) rows.emplace_back(std::string(to_string(c)), a);
  rows.emplace_back("Total", m.total);
  std::size_t w = 8;
  for (const auto& r : rows) w = std::max(w, r.first.size());
  std::ostringstream out;
  auto cell = [](const std::string& s, std::size_t width) { return std::string(width - std::min(width, s.size()), ' ') + s; };
  out << std::string(w - 8, ' ') << "Category" << cell("Notes", 7) << cell("Recall", 10) << cell("Precision", 11)
      << cell("Intersection", 14) << '\n';
  for (const auto& [name, a] : rows)
    out << std::string(w - name.size(), ' ') << name << cell(std::to_string(a.notes), 7) << cell(fmt(a.recall), 10)
        << cell(fmt(a.precision), 11) << cell(a.intersection ? fmt(*a.intersection) : "-", 14) << '\n';
  return out.str();
}

}  // namespace ehrcheck
