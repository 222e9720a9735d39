#include "ehrcheck/verifier.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <omp.h>

#include "ehrcheck/errors.hpp"
#include "ehrcheck/sql_dialect.hpp"
#include "ehrcheck/text_util.hpp"

namespace ehrcheck {

using nlohmann::json;

std::string_view to_string(Label l) {
  switch (l) {
    case Label::Consistent: return "Consistent";
    case Label::Inconsistent: return "Inconsistent";
    case Label::Unverifiable: return "Unverifiable";
  }
  return "?";
}

Label parse_label(std::string_view text) {
  auto t = to_lower(trim(text));
  if (t == "consistent" || t == "c") return Label::Consistent;
  if (t == "inconsistent" || t == "i") return Label::Inconsistent;
  if (t == "unverifiable" || t == "u") return Label::Unverifiable;
  throw ParseError("unknown label '" + std::string(text) + "'");
}

json VerifierConfig::to_json(ProfileName profile) const {
  json order = json::array();
  for (auto id : mask_order) order.push_back(ehrcheck::to_string(id));
  return json{{"profile", ehrcheck::to_string(profile)},
              {"max_tokens", segment.max_tokens},
              {"splits", segment.splits},
              {"overlap_tokens", segment.overlap_tokens},
              {"threshold", search.threshold},
              {"set_cosine", search.set_cosine},
              {"section_patterns", section_patterns},
              {"llm_splitter", llm_splitter},
              {"mask_order", order},
              {"exec_path", ehrcheck::to_string(path)},
              {"backend", backend_label}};
}

std::string VerifierConfig::digest(ProfileName profile) const { return hex64(fnv1a(to_json(profile).dump())); }

namespace {

const SubText* subtext_for(const std::vector<SubText>& subs, int line) {
  for (const auto& s : subs)
    if (line >= s.core.first && line <= s.core.last) return &s;
  for (const auto& s : subs)
    if (line >= s.full.first && line <= s.full.last) return &s;
  return nullptr;
}

struct PairOutcome {
  std::optional<std::string> unverifiable;  // reason
  std::string detail;
  std::vector<PlanOutcome> plans;
  Verdict verdict = Verdict::Inconsistent;
};

PairOutcome check_pair(const EntityResult& e, const EntityMention& m, TimeTag tag, const TablePair& pair,
                       const std::vector<ItemHit>& hits, const SubText& sub, const Note& note, const VerifierDeps& deps,
                       const VerifierConfig& cfg, StageContext& ctx) {
  PairOutcome out;
  const auto& profile = deps.store.profile();
  auto rows = build_pseudo_rows(m, sub, pair, ctx);
  if (rows.empty()) {
    out.unverifiable = "stage-parse-failure";
    out.detail = "no pseudo-table rows for " + to_string(pair);
    return out;
  }
  std::vector<QueryPlan> plans;
  for (const auto& row : rows) {
    auto corrected = self_correct(row, m, sub, note, ctx);
    auto ref = reformat_values(corrected, m, note, ctx);
    auto row_tag = ref.time_dropped ? TimeTag::unspecified() : tag;
    auto window = compute_window(row_tag, note);
    try {
      plans.push_back(build_plan(ref, e.type, hits, window, note, profile));
    } catch (const Unverifiable& u) {
      out.unverifiable = u.reason();
      out.detail = u.what();
      return out;
    }
  }
  out.verdict = Verdict::Consistent;
  for (auto& p : plans) {
    PlanOutcome po;
    po.verdict = verify(p, deps.store, cfg.path);
    po.sql = render_sql(p, profile);
    po.plan = std::move(p);
    if (po.verdict == Verdict::Inconsistent) out.verdict = Verdict::Inconsistent;
    out.plans.push_back(std::move(po));
  }
  return out;
}

ErrorAttribution combine_localizations(const std::vector<PlanOutcome>& plans, const VerifierDeps& deps,
                                       const VerifierConfig& cfg) {
  ErrorAttribution out;
  bool any_missing = false;
  for (const auto& p : plans) {
    if (p.verdict != Verdict::Inconsistent) continue;
    auto a = localize(p.plan, deps.store, cfg.path, cfg.mask_order);
    any_missing = any_missing || a.missing;
    out.compound = out.compound || a.compound;
    for (auto& c : a.error_columns)
      if (std::find(out.error_columns.begin(), out.error_columns.end(), c) == out.error_columns.end())
        out.error_columns.push_back(c);
    for (auto& w : a.witnesses) out.witnesses.push_back(std::move(w));
  }
  out.missing = out.error_columns.empty() && any_missing;
  if (out.missing) out.compound = false;
  return out;
}

void process_entity(EntityResult& e, const EntityMention& m, const std::vector<SubText>& subs, const Note& note,
                    const VerifierDeps& deps, const VerifierConfig& cfg, StageContext& ctx) {
  if (e.type == EntityType::Type3) {
    e.label = Label::Unverifiable;
    e.reason = "type3";
    return;
  }
  const SubText* sub = subtext_for(subs, m.line_no);
  if (!sub) {
    e.reason = "stage-parse-failure";
    return;
  }
  auto tag = filter_time(m, *sub, note, ctx);
  e.time = tag;
  if (!tag.in_current_stay) {
    e.reason = "history";
    return;
  }
  auto pairs = identify_tables(m, *sub, ctx);
  if (pairs.empty()) {
    e.reason = "no-table";
    return;
  }
  auto hits = deps.index.search(m.surface, deps.lexicon, cfg.search);
  std::optional<PairOutcome> first_inconsistent;
  std::optional<TablePair> inconsistent_pair;
  std::optional<std::string> first_reason;
  for (const auto& pair : pairs) {
    auto po = check_pair(e, m, tag, pair, hits, *sub, note, deps, cfg, ctx);
    if (po.unverifiable) {
      if (!first_reason) first_reason = po.unverifiable;
      continue;
    }
    if (po.verdict == Verdict::Consistent) {
      e.label = Label::Consistent;
      e.pair = pair;
      e.plans = std::move(po.plans);
      return;
    }
    if (!first_inconsistent) {
      first_inconsistent = std::move(po);
      inconsistent_pair = pair;
    }
  }
  if (first_inconsistent) {
    e.label = Label::Inconsistent;
    e.pair = inconsistent_pair;
    e.plans = std::move(first_inconsistent->plans);
    e.attribution = combine_localizations(e.plans, deps, cfg);
    return;
  }
  e.label = Label::Unverifiable;
  e.reason = first_reason.value_or("stage-parse-failure");
}

}  // namespace

VerificationReport verify_note(const Note& note, const VerifierDeps& deps, const VerifierConfig& cfg, Transcript* audit) {
  VerificationReport report;
  report.note_id = note.note_id;
  report.category = note.category;
  report.config_digest = cfg.digest(deps.store.profile().name);

  StageContext ctx{deps.backend, deps.prompts, deps.store.profile(), audit};
  auto filtered = apply_section_filter(note, cfg.section_patterns);
  SegmentResult seg;
  if (cfg.llm_splitter) {
    LlmSplitter splitter(deps.backend, deps.prompts, note.note_id, audit);
    seg = segment(filtered, cfg.segment, splitter);
  } else {
    EqualSplitter splitter;
    seg = segment(filtered, cfg.segment, splitter);
  }

  std::vector<EntityMention> mentions;
  for (const auto& sub : seg.subtexts) {
    try {
      auto found = recognize_entities(sub, ctx);
      mentions.insert(mentions.end(), found.begin(), found.end());
    } catch (const BackendError& e) {
      if (audit) audit->add(StageRecord{"ner", sub.parent_note_id, "", "", nullptr, {e.what()}});
    }
  }
  mentions = merge_mentions(std::move(mentions));

  // Group the per-value mentions of one reading into one entity.
  std::vector<std::pair<EntityResult, EntityMention>> entities;
  std::map<std::pair<std::string, int>, std::size_t> index;
  for (const auto& m : mentions) {
    auto key = std::make_pair(to_lower(m.surface), m.line_no);
    auto it = index.find(key);
    if (it == index.end()) {
      EntityResult e;
      e.surface = m.surface;
      e.type = m.type;
      e.line_no = m.line_no;
      e.ordinal = m.ordinal;
      index.emplace(key, entities.size());
      entities.emplace_back(std::move(e), m);
      it = index.find(key);
    }
    if (!m.raw_values.empty()) entities[it->second].first.values.push_back(m.raw_values.front());
  }

  for (auto& [e, m] : entities) {
    try {
      process_entity(e, m, seg.subtexts, note, deps, cfg, ctx);
    } catch (const BackendError& ex) {
      e.label = Label::Unverifiable;
      e.reason = "stage-parse-failure";
      if (audit) audit->add(StageRecord{"entity", entity_key(m), "", "", nullptr, {ex.what()}});
    } catch (const std::invalid_argument& ex) {
      e.label = Label::Unverifiable;
      e.reason = "stage-parse-failure";
      if (audit) audit->add(StageRecord{"entity", entity_key(m), "", "", nullptr, {ex.what()}});
    } catch (const SchemaError& ex) {
      e.label = Label::Unverifiable;
      e.reason = "stage-parse-failure";
      if (audit) audit->add(StageRecord{"entity", entity_key(m), "", "", nullptr, {ex.what()}});
    }
    if (e.label != Label::Unverifiable) e.reason.clear();
    report.entities.push_back(std::move(e));
  }
  std::sort(report.entities.begin(), report.entities.end(), [](const EntityResult& a, const EntityResult& b) {
    if (a.line_no != b.line_no) return a.line_no < b.line_no;
    return to_lower(a.surface) < to_lower(b.surface);
  });
  return report;
}

CorpusRun verify_corpus(const std::vector<Note>& notes, const VerifierDeps& deps, const VerifierConfig& cfg,
                        int parallelism) {
  if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
  std::vector<std::size_t> order(notes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return notes[a].note_id < notes[b].note_id; });
  CorpusRun run;
  run.reports.resize(notes.size());
  run.audits.resize(notes.size());
  const long n = static_cast<long>(notes.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(parallelism)
  for (long i = 0; i < n; ++i) {
    const auto& note = notes[order[static_cast<std::size_t>(i)]];
    Transcript audit;
    VerificationReport r;
    try {
      r = verify_note(note, deps, cfg, &audit);
    } catch (const std::exception& e) {
      r = VerificationReport{};
      r.note_id = note.note_id;
      r.category = note.category;
      r.config_digest = cfg.digest(deps.store.profile().name);
      r.error = e.what();
    }
    run.reports[static_cast<std::size_t>(i)] = std::move(r);
    run.audits[static_cast<std::size_t>(i)] = json{{"note_id", note.note_id}, {"stages", audit.to_json()}};
  }
  return run;
}

json report_to_json(const VerificationReport& r) {
  json entities = json::array();
  for (const auto& e : r.entities) {
    json j{{"surface", e.surface},
           {"entity_type", static_cast<int>(e.type)},
           {"line", e.line_no},
           {"ordinal", e.ordinal},
           {"values", e.values},
           {"label", to_string(e.label)},
           {"reason", e.reason.empty() ? json(nullptr) : json(e.reason)}};
    j["time"] = e.time ? time_tag_to_json(*e.time) : json(nullptr);
    j["table"] = e.pair ? json(to_string(*e.pair)) : json(nullptr);
    json plans = json::array();
    for (const auto& p : e.plans)
      plans.push_back(json{{"plan", plan_to_json(p.plan)}, {"sql", p.sql}, {"verdict", to_string(p.verdict)}});
    j["plans"] = plans;
    j["attribution"] = e.attribution ? attribution_to_json(*e.attribution) : json(nullptr);
    entities.push_back(std::move(j));
  }
  return json{{"schema_version", kReportSchemaVersion},
              {"note_id", r.note_id},
              {"category", to_string(r.category)},
              {"config_digest", r.config_digest},
              {"error", r.error ? json(*r.error) : json(nullptr)},
              {"entities", entities}};
}

VerificationReport report_from_json(const json& j) {
  try {
    VerificationReport r;
    if (j.value("schema_version", 0) != kReportSchemaVersion) throw ParseError("unsupported report schema version");
    r.note_id = j.at("note_id").get<std::string>();
    r.category = parse_note_category(j.at("category").get<std::string>());
    r.config_digest = j.value("config_digest", std::string());
    if (j.contains("error") && !j["error"].is_null()) r.error = j["error"].get<std::string>();
    for (const auto& ej : j.at("entities")) {
      EntityResult e;
      e.surface = ej.at("surface").get<std::string>();
      int type = ej.at("entity_type").get<int>();
      if (type < 1 || type > 3) throw ParseError("entity_type must be 1, 2 or 3");
      e.type = static_cast<EntityType>(type);
      e.line_no = ej.at("line").get<int>();
      e.ordinal = ej.value("ordinal", 1);
      e.values = ej.value("values", std::vector<std::string>{});
      e.label = parse_label(ej.at("label").get<std::string>());
      if (ej.contains("reason") && !ej["reason"].is_null()) e.reason = ej["reason"].get<std::string>();
      if (ej.contains("attribution") && !ej["attribution"].is_null()) {
        ErrorAttribution a;
        a.missing = ej["attribution"].value("missing", false);
        a.compound = ej["attribution"].value("compound", false);
        for (const auto& c : ej["attribution"].value("error_columns", json::array()))
          a.error_columns.push_back({c.at("table").get<std::string>(), c.at("column").get<std::string>()});
        e.attribution = a;
      }
      r.entities.push_back(std::move(e));
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
}

json summarize(const std::vector<VerificationReport>& reports) {
  std::map<std::string, int> labels, reasons, columns;
  std::map<std::string, std::map<std::string, int>> by_category;
  int missing = 0, compound = 0, errored = 0, entities = 0;
  for (const auto& r : reports) {
    if (r.error) ++errored;
    for (const auto& e : r.entities) {
      ++entities;
      auto l = std::string(to_string(e.label));
      ++labels[l];
      ++by_category[std::string(to_string(r.category))][l];
      if (!e.reason.empty()) ++reasons[e.reason];
      if (e.attribution) {
        if (e.attribution->missing) ++missing;
        if (e.attribution->compound) ++compound;
        for (const auto& c : e.attribution->error_columns) ++columns[to_string(c)];
      }
    }
  }
  return json{{"notes", reports.size()},    {"notes_with_errors", errored}, {"entities", entities},
              {"labels", labels},           {"by_category", by_category},   {"unverifiable_reasons", reasons},
              {"error_columns", columns},   {"missing", missing},           {"compound", compound}};
}

void write_run(const std::filesystem::path& dir, const CorpusRun& run) {
  std::filesystem::create_directories(dir / "reports");
  std::filesystem::create_directories(dir / "audit");
  auto write = [](const std::filesystem::path& p, const json& j) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << j.dump(2) << '\n';
  };
  for (std::size_t i = 0; i < run.reports.size(); ++i) {
    write(dir / "reports" / (run.reports[i].note_id + ".json"), report_to_json(run.reports[i]));
    if (i < run.audits.size()) write(dir / "audit" / (run.reports[i].note_id + ".json"), run.audits[i]);
  }
  write(dir / "summary.json", summarize(run.reports));
}

}  // namespace ehrcheck
