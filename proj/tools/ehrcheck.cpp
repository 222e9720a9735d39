// ehrcheck: command-line entry points (ingest, verify, localize, evaluate,
// gen-fixtures).
//
// Exit codes: 0 success, 1 run failure (I/O, bad input, failed notes),
// 2 usage or configuration error.

#include <sqlite3.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ehrcheck/errors.hpp"
#include "ehrcheck/evaluator.hpp"
#include "ehrcheck/item_search.hpp"
#include "ehrcheck/llm_gateway.hpp"
#include "ehrcheck/notes.hpp"
#include "ehrcheck/query_engine.hpp"
#include "ehrcheck/record_store.hpp"
#include "ehrcheck/sql_dialect.hpp"
#include "ehrcheck/synth_fixtures.hpp"
#include "ehrcheck/text_util.hpp"
#include "ehrcheck/verifier.hpp"

#ifndef EHRCHECK_VERSION
#define EHRCHECK_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ehrcheck;

namespace {

// Run failures that are not usage errors.
struct RunFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Stopwatch {
 public:
  void lap(const std::string& name) {
    auto now = std::chrono::steady_clock::now();
    timings_[name] = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
  }
  json to_json() const { return timings_; }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  json timings_ = json::object();
};

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json versions() {
  return json{{"ehrcheck", EHRCHECK_VERSION},
              {"report_schema", kReportSchemaVersion},
              {"sqlite", sqlite3_libversion()},
              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
              {"cli11", CLI11_VERSION}};
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw RunFailure("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_manifest(const fs::path& dir, const std::string& command, const std::vector<std::string>& argv, json extra,
                    const Stopwatch& sw) {
  json m{{"command", command}, {"argv", argv}, {"started_at", utc_now()}, {"versions", versions()},
         {"timings_ms", sw.to_json()}};
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_json(dir / ("manifest-" + command + ".json"), m);
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw RunFailure("cannot open " + p.string());
  return in;
}

// ---- shared options ----

struct ProfileOpts {
  std::string profile = "mimic";
  std::string overrides;

  void add(CLI::App* app) {
    app->add_option("--profile", profile, "Schema profile: mimic or omop")
        ->check(CLI::IsMember({"mimic", "omop"}))
        ->capture_default_str();
    app->add_option("--profile-overrides", overrides, "Key-value file overriding table and column names")
        ->check(CLI::ExistingFile);
  }
  SchemaProfile load() const {
    auto p = load_profile(parse_profile_name(profile));
    if (!overrides.empty()) {
      auto in = open_in(overrides);
      apply_profile_overrides(p, in);
      validate(p);
    }
    return p;
  }
};

std::vector<ConditionId> parse_mask_order(const std::string& text) {
  if (text.empty()) return default_mask_order();
  std::vector<ConditionId> out;
  for (auto part : split(text, ',')) {
    auto t = trim(part);
    if (!t.empty()) out.push_back(parse_condition_id(t));
  }
  return out;
}

ExecPath parse_exec_path(const std::string& s) {
  if (s == "sql") return ExecPath::SqlPath;
  if (s == "scan") return ExecPath::ScanPath;
  throw ConfigError("execution path must be sql or scan, got '" + s + "'");
}

// ---- ingest ----

struct IngestOpts {
  ProfileOpts profile;
  std::string db, notes, out;
};

int cmd_ingest(const IngestOpts& o, const std::vector<std::string>& argv) {
  Stopwatch sw;
  auto store = load_store(o.profile.load(), o.db);
  sw.lap("load_store");
  json tables = json::object();
  for (const auto& t : store.profile().tables) tables[t.name] = store.rows(t.name).size();
  ItemIndex index(store);
  sw.lap("item_index");
  json summary{{"profile", to_string(store.profile().name)}, {"tables", tables}, {"searchable_labels", index.size()}};
  std::vector<NoteIngestError> errors;
  if (!o.notes.empty()) {
    auto in = open_in(o.notes);
    auto notes = ingest_notes_lenient(in, errors);
    sw.lap("ingest_notes");
    json by_cat = json::object();
    for (const auto& n : notes) by_cat[std::string(to_string(n.category))] = by_cat.value(std::string(to_string(n.category)), 0) + 1;
    json errs = json::array();
    for (const auto& e : errors) errs.push_back(json{{"line", e.line}, {"message", e.message}});
    summary["notes"] = json{{"count", notes.size()}, {"by_category", by_cat}, {"errors", errs}};
  }
  std::cout << summary.dump(2) << '\n';
  if (!o.out.empty()) {
    write_json(fs::path(o.out) / "ingest.json", summary);
    write_manifest(o.out, "ingest", argv, json::object(), sw);
  }
  for (const auto& e : errors) std::cerr << "notes line " << e.line << ": " << e.message << '\n';
  return errors.empty() ? 0 : 1;
}

// ---- verify ----

struct VerifyOpts {
  ProfileOpts profile;
  std::string db, notes, out = "out";
  std::string backend = "scripted", script, endpoint, model, cache;
  double temperature = 0.0;
  int max_concurrent = 4, timeout_ms = 60000, retries = 3;
  double threshold = 0.5;
  bool set_cosine = false;
  int max_tokens = 1000, splits = 3, overlap = 50;
  std::string splitter = "llm", mask_order, exec_path = "sql";
  int parallelism = 1;
  std::string sections, lexicon, prompts;
  bool no_section_filter = false;
};

int cmd_verify(const VerifyOpts& o, const std::vector<std::string>& argv) {
  Stopwatch sw;
  BackendConfig bc;
  bc.kind = o.backend == "remote" ? BackendConfig::Kind::Remote : BackendConfig::Kind::Scripted;
  bc.script_path = o.script;
  bc.endpoint_url = o.endpoint;
  bc.model = o.model;
  bc.temperature = o.temperature;
  bc.max_concurrent_requests = o.max_concurrent;
  bc.timeout_ms = o.timeout_ms;
  bc.retry.max_attempts = o.retries;
  bc.cache_path = o.cache;
  bc.validate();
  if (bc.kind == BackendConfig::Kind::Remote && !std::getenv(bc.api_key_env.c_str()))
    std::cerr << "warning: " << bc.api_key_env << " is not set; requests are sent without a key\n";

  VerifierConfig cfg;
  cfg.segment = {o.max_tokens, o.splits, o.overlap};
  if (cfg.segment.max_tokens < 1 || cfg.segment.splits < 2 || cfg.segment.overlap_tokens < 0)
    throw ConfigError("need max-tokens >= 1, splits >= 2 and overlap >= 0");
  if (o.threshold < 0.0 || o.threshold > 1.0) throw ConfigError("threshold must lie in [0, 1]");
  if (o.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  cfg.search.threshold = o.threshold;
  cfg.search.set_cosine = o.set_cosine;
  cfg.llm_splitter = o.splitter == "llm";
  cfg.mask_order = parse_mask_order(o.mask_order);
  cfg.path = parse_exec_path(o.exec_path);
  if (o.no_section_filter) {
    cfg.section_patterns.clear();
  } else if (!o.sections.empty()) {
    auto in = open_in(o.sections);
    cfg.section_patterns = read_section_patterns(in);
  }
  cfg.backend_label = bc.kind == BackendConfig::Kind::Scripted
                          ? "scripted"
                          : "remote:" + bc.model + ":t=" + std::to_string(bc.temperature);

  auto lexicon = ExpansionLexicon::bundled();
  if (!o.lexicon.empty()) {
    auto in = open_in(o.lexicon);
    lexicon = ExpansionLexicon::read(in);
  }
  auto prompts = o.prompts.empty() ? PromptLibrary::bundled() : PromptLibrary::with_overrides(o.prompts);
  auto backend = make_backend(bc);
  sw.lap("setup");

  auto profile = o.profile.load();
  auto store = load_store(profile, o.db);
  sw.lap("load_store");
  ItemIndex index(store);
  sw.lap("item_index");
  std::vector<NoteIngestError> note_errors;
  auto in = open_in(o.notes);
  auto notes = ingest_notes_lenient(in, note_errors);
  sw.lap("ingest_notes");

  VerifierDeps deps{store, index, lexicon, *backend, prompts};
  auto run = verify_corpus(notes, deps, cfg, o.parallelism);
  sw.lap("verify");
  write_run(o.out, run);
  sw.lap("write");

  int failed = 0;
  for (const auto& r : run.reports)
    if (r.error) {
      ++failed;
      std::cerr << "note " << r.note_id << ": " << *r.error << '\n';
    }
  for (const auto& e : note_errors) std::cerr << "notes line " << e.line << ": " << e.message << '\n';

  json extra{{"config", cfg.to_json(profile.name)},
             {"config_digest", cfg.digest(profile.name)},
             {"parallelism", o.parallelism},
             {"notes", notes.size()},
             {"failed_notes", failed},
             {"unparsed_note_lines", note_errors.size()}};
  write_manifest(o.out, "verify", argv, extra, sw);

  auto summary = summarize(run.reports);
  std::cout << "notes " << notes.size() << ", entities " << summary["entities"].get<int>() << " ->";
  for (const auto& [label, n] : summary["labels"].items()) std::cout << ' ' << label << '=' << n.get<int>();
  std::cout << "\nreports written to " << o.out << '\n';
  return failed == 0 && note_errors.empty() ? 0 : 1;
}

// ---- localize ----

struct LocalizeOpts {
  ProfileOpts profile;
  std::string db, plan, mask_order, exec_path = "sql", out;
};

int cmd_localize(const LocalizeOpts& o, const std::vector<std::string>& argv) {
  Stopwatch sw;
  auto store = load_store(o.profile.load(), o.db);
  sw.lap("load_store");
  json doc;
  try {
    auto in = open_in(o.plan);
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw RunFailure(std::string("plan file: ") + e.what());
  }
  std::vector<QueryPlan> plans;
  try {
    if (doc.is_array()) {
      for (const auto& p : doc) plans.push_back(plan_from_json(p));
    } else {
      plans.push_back(plan_from_json(doc));
    }
  } catch (const ParseError& e) {
    throw RunFailure(std::string("plan file: ") + e.what());
  }
  auto path = parse_exec_path(o.exec_path);
  auto order = parse_mask_order(o.mask_order);
  json results = json::array();
  for (const auto& p : plans) {
    check_plan(p, store.profile());
    auto verdict = verify(p, store, path);
    json r{{"plan", plan_to_json(p)},
           {"sql", render_sql(p, store.profile())},
           {"verdict", to_string(verdict)},
           {"attribution", nullptr}};
    if (verdict == Verdict::Inconsistent) r["attribution"] = attribution_to_json(localize(p, store, path, order));
    results.push_back(r);
  }
  sw.lap("localize");
  std::cout << results.dump(2) << '\n';
  if (!o.out.empty()) {
    write_json(fs::path(o.out) / "localize.json", results);
    write_manifest(o.out, "localize", argv, json::object(), sw);
  }
  return 0;
}

// ---- evaluate ----

struct EvaluateOpts {
  std::string gold, reports, match = "surface-line", out;
};

std::vector<VerificationReport> read_reports(const fs::path& dir) {
  fs::path d = fs::is_directory(dir / "reports") ? dir / "reports" : dir;
  if (!fs::is_directory(d)) throw RunFailure("report directory " + d.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(d))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<VerificationReport> out;
  for (const auto& f : files) {
    try {
      auto in = open_in(f);
      out.push_back(report_from_json(json::parse(in)));
    } catch (const std::exception& e) {
      throw RunFailure(f.string() + ": " + e.what());
    }
  }
  return out;
}

int cmd_evaluate(const EvaluateOpts& o, const std::vector<std::string>& argv) {
  Stopwatch sw;
  auto rule = parse_match_rule(o.match);
  auto in = open_in(o.gold);
  auto gold = read_gold(in);
  auto reports = read_reports(o.reports);
  sw.lap("load");
  auto metrics = score_corpus(gold, reports, rule);
  sw.lap("score");
  std::cout << format_metrics_table(metrics);
  if (!o.out.empty()) {
    write_json(fs::path(o.out) / "metrics.json", metrics_to_json(metrics));
    write_manifest(o.out, "evaluate", argv, json{{"match", o.match}}, sw);
  }
  return 0;
}

// ---- gen-fixtures ----

struct GenOpts {
  std::string profile = "mimic", out;
  InjectionSpec spec;
};

int cmd_gen(const GenOpts& o, const std::vector<std::string>& argv) {
  Stopwatch sw;
  o.spec.validate();
  std::vector<ProfileName> profiles;
  if (o.profile == "both") {
    profiles = {ProfileName::MimicStyle, ProfileName::OmopStyle};
  } else {
    profiles = {parse_profile_name(o.profile)};
  }
  json counts = json::object();
  for (auto p : profiles) {
    auto fx = generate(o.spec, p);
    fs::path dir = profiles.size() > 1 ? fs::path(o.out) / (p == ProfileName::MimicStyle ? "mimic" : "omop")
                                       : fs::path(o.out);
    write_fixtures(fx, dir);
    std::size_t entities = 0;
    for (const auto& g : fx.gold) entities += g.entities.size();
    counts[std::string(to_string(p))] = json{{"notes", fx.notes.size()},
                                             {"entities", entities},
                                             {"injections", fx.injections.size()},
                                             {"dir", dir.string()}};
  }
  sw.lap("generate");
  const auto& s = o.spec;
  json spec{{"seed", s.seed},
            {"notes", s.notes},
            {"entities_per_note", s.entities_per_note},
            {"time_shift", s.time_shift},
            {"value_perturb", s.value_perturb},
            {"unit_swap", s.unit_swap},
            {"missing_entity", s.missing_entity},
            {"compound", s.compound},
            {"time_shift_hours", s.time_shift_hours}};
  write_manifest(o.out, "gen-fixtures", argv, json{{"spec", spec}, {"outputs", counts}}, sw);
  std::cout << counts.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consistency checking of clinical notes against EHR tables", "ehrcheck"};
  app.set_version_flag("--version", EHRCHECK_VERSION);
  app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
  app.require_subcommand(1);
  std::vector<std::string> args(argv, argv + argc);

  std::function<int()> run;

  IngestOpts ing;
  auto* c_ing = app.add_subcommand("ingest", "Load and validate a database directory and notes");
  ing.profile.add(c_ing);
  c_ing->add_option("--db", ing.db, "Directory of <table>.csv files")->required()->check(CLI::ExistingDirectory);
  c_ing->add_option("--notes", ing.notes, "Notes JSONL")->check(CLI::ExistingFile);
  c_ing->add_option("--out", ing.out, "Write ingest.json and a manifest here");
  c_ing->callback([&] { run = [&] { return cmd_ingest(ing, args); }; });

  VerifyOpts ver;
  auto* c_ver = app.add_subcommand("verify", "Run the verification pipeline over a note corpus");
  ver.profile.add(c_ver);
  c_ver->add_option("--db", ver.db, "Directory of <table>.csv files")->required()->check(CLI::ExistingDirectory);
  c_ver->add_option("--notes", ver.notes, "Notes JSONL")->required()->check(CLI::ExistingFile);
  c_ver->add_option("--out", ver.out, "Output directory")->capture_default_str();
  c_ver->add_option("--backend", ver.backend, "scripted or remote")
      ->check(CLI::IsMember({"scripted", "remote"}))
      ->capture_default_str();
  c_ver->add_option("--script", ver.script, "Scripted backend answers (JSON)")->check(CLI::ExistingFile);
  c_ver->add_option("--endpoint", ver.endpoint, "Remote chat-completions base URL");
  c_ver->add_option("--model", ver.model, "Remote model name");
  c_ver->add_option("--temperature", ver.temperature)->capture_default_str();
  c_ver->add_option("--max-concurrent", ver.max_concurrent, "Concurrent remote requests")->capture_default_str();
  c_ver->add_option("--timeout-ms", ver.timeout_ms)->capture_default_str();
  c_ver->add_option("--retries", ver.retries, "Attempts per remote request")->capture_default_str();
  c_ver->add_option("--cache", ver.cache, "Remote response cache (JSONL)");
  c_ver->add_option("--threshold", ver.threshold, "Item-search cosine threshold")->capture_default_str();
  c_ver->add_flag("--set-cosine", ver.set_cosine, "Binary bigram vectors instead of counts");
  c_ver->add_option("--max-tokens", ver.max_tokens, "Segment size l")->capture_default_str();
  c_ver->add_option("--splits", ver.splits, "Topic splits n per round")->capture_default_str();
  c_ver->add_option("--overlap", ver.overlap, "Overlap tokens between segments")->capture_default_str();
  c_ver->add_option("--splitter", ver.splitter, "llm or equal")
      ->check(CLI::IsMember({"llm", "equal"}))
      ->capture_default_str();
  c_ver->add_option("--mask-order", ver.mask_order, "Comma-separated condition ids tried when localizing");
  c_ver->add_option("--path", ver.exec_path, "sql or scan")->check(CLI::IsMember({"sql", "scan"}))->capture_default_str();
  c_ver->add_option("--parallelism", ver.parallelism, "Notes verified concurrently")->capture_default_str();
  c_ver->add_option("--sections", ver.sections, "Section filter patterns file")->check(CLI::ExistingFile);
  c_ver->add_flag("--no-section-filter", ver.no_section_filter);
  c_ver->add_option("--lexicon", ver.lexicon, "Abbreviation lexicon TSV")->check(CLI::ExistingFile);
  c_ver->add_option("--prompts", ver.prompts, "Directory of prompt template overrides")->check(CLI::ExistingDirectory);
  c_ver->callback([&] { run = [&] { return cmd_verify(ver, args); }; });

  LocalizeOpts loc;
  auto* c_loc = app.add_subcommand("localize", "Verify a query plan and attribute a failure to columns");
  loc.profile.add(c_loc);
  c_loc->add_option("--db", loc.db, "Directory of <table>.csv files")->required()->check(CLI::ExistingDirectory);
  c_loc->add_option("--plan", loc.plan, "Plan JSON (object or array)")->required()->check(CLI::ExistingFile);
  c_loc->add_option("--mask-order", loc.mask_order, "Comma-separated condition ids");
  c_loc->add_option("--path", loc.exec_path, "sql or scan")->check(CLI::IsMember({"sql", "scan"}))->capture_default_str();
  c_loc->add_option("--out", loc.out, "Write localize.json and a manifest here");
  c_loc->callback([&] { run = [&] { return cmd_localize(loc, args); }; });

  EvaluateOpts ev;
  auto* c_ev = app.add_subcommand("evaluate", "Score reports against gold annotations");
  c_ev->add_option("--gold", ev.gold, "Gold JSONL")->required()->check(CLI::ExistingFile);
  c_ev->add_option("--reports", ev.reports, "Run directory or directory of report JSON files")->required();
  c_ev->add_option("--match", ev.match, "surface-line or surface")
      ->check(CLI::IsMember({"surface-line", "surface"}))
      ->capture_default_str();
  c_ev->add_option("--out", ev.out, "Write metrics.json and a manifest here");
  c_ev->callback([&] { run = [&] { return cmd_evaluate(ev, args); }; });

  GenOpts gen;
  auto* c_gen = app.add_subcommand("gen-fixtures", "Generate a synthetic database, notes, script and gold");
  c_gen->add_option("--profile", gen.profile, "mimic, omop or both")
      ->check(CLI::IsMember({"mimic", "omop", "both"}))
      ->capture_default_str();
  c_gen->add_option("--out", gen.out, "Output directory")->required();
  c_gen->add_option("--seed", gen.spec.seed)->capture_default_str();
  c_gen->add_option("--notes", gen.spec.notes)->capture_default_str();
  c_gen->add_option("--entities-per-note", gen.spec.entities_per_note)->capture_default_str();
  c_gen->add_option("--time-shift", gen.spec.time_shift)->capture_default_str();
  c_gen->add_option("--value-perturb", gen.spec.value_perturb)->capture_default_str();
  c_gen->add_option("--unit-swap", gen.spec.unit_swap)->capture_default_str();
  c_gen->add_option("--missing-entity", gen.spec.missing_entity)->capture_default_str();
  c_gen->add_option("--compound", gen.spec.compound)->capture_default_str();
  c_gen->add_option("--shift-hours", gen.spec.time_shift_hours, "Hours cycled over exact-time shifts")
      ->delimiter(',');
  c_gen->callback([&] { run = [&] { return cmd_gen(gen, args); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return 2;
  }

  try {
    return run();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
