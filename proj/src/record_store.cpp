#include "ehrcheck/record_store.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <unordered_map>
#include <unordered_set>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ehrcheck/csv.hpp"
#include "ehrcheck/errors.hpp"
#include "ehrcheck/sql_dialect.hpp"
#include "ehrcheck/text_util.hpp"

namespace ehrcheck {

std::string_view to_string(ExecPath path) { return path == ExecPath::SqlPath ? "SqlPath" : "ScanPath"; }

std::vector<std::string> RowSet::sorted_keys() const {
  auto k = keys;
  std::sort(k.begin(), k.end());
  return k;
}

std::optional<CellValue> parse_cell(ValueKind kind, std::string_view text) {
  switch (kind) {
    case ValueKind::Text: return CellValue{std::string(text)};
    case ValueKind::Decimal:
      if (auto d = Decimal::parse(text)) return CellValue{*d};
      return std::nullopt;
    case ValueKind::DateTime:
      if (auto d = DateTime::parse(trim(text))) return CellValue{*d};
      return std::nullopt;
    case ValueKind::Integer: {
      auto t = trim(text);
      if (t.empty()) return std::nullopt;
      std::size_t i = (t.front() == '-' || t.front() == '+') ? 1 : 0;
      if (i == t.size()) return std::nullopt;
      for (std::size_t k = i; k < t.size(); ++k)
        if (t[k] < '0' || t[k] > '9') return std::nullopt;
      try {
        return CellValue{static_cast<std::int64_t>(std::stoll(std::string(t)))};
      } catch (const std::out_of_range&) {
        return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

namespace {

bool kind_matches(ValueKind kind, const CellValue& v) {
  if (is_null(v)) return true;
  switch (kind) {
    case ValueKind::Text: return std::holds_alternative<std::string>(v);
    case ValueKind::Decimal: return std::holds_alternative<Decimal>(v);
    case ValueKind::DateTime: return std::holds_alternative<DateTime>(v);
    case ValueKind::Integer: return std::holds_alternative<std::int64_t>(v);
  }
  return false;
}

/// Join/hash key for a cell; the kind tag keeps 1 and "1" apart.
std::string cell_key(const CellValue& v) { return std::to_string(v.index()) + ":" + cell_to_string(v); }

struct Table {
  const TableSpec* spec = nullptr;
  std::vector<Row> rows;
};

struct JoinIndex {
  Join join;
  const Table* dict = nullptr;
  std::size_t child_col = 0;
  std::vector<std::size_t> label_cols;
  std::unordered_map<std::string, std::vector<std::size_t>> by_key;
};

/// Plan conditions resolved to column indexes for the scan.
struct CompiledPlan {
  const Table* ev = nullptr;
  std::size_t adm_col = 0;
  std::int64_t adm = 0;
  std::vector<std::pair<std::size_t, CellValue>> eq;
  WindowKind time_kind = WindowKind::None;
  bool interval = false;
  std::size_t time_col = 0, end_col = 0;
  Date lo{}, hi{};
  std::int64_t instant = 0;
  std::vector<const JoinIndex*> joins;
  std::optional<std::size_t> event_label_col;
  std::unordered_set<std::string> labels;
};

const DateTime* as_time(const CellValue& v) { return std::get_if<DateTime>(&v); }

bool time_ok(const CompiledPlan& p, const Row& r) {
  if (p.time_kind == WindowKind::None) return true;
  const DateTime* s = as_time(r[p.time_col]);
  if (!s) return false;
  if (!p.interval) {
    switch (p.time_kind) {
      case WindowKind::ExactDate: return s->date == p.lo;
      case WindowKind::ExactDateTime: return s->instant() == p.instant;
      case WindowKind::DayRange: return p.lo <= s->date && s->date <= p.hi;
      case WindowKind::None: return true;
    }
  }
  const DateTime* e = as_time(r[p.end_col]);
  if (!e) e = s;
  if (p.time_kind == WindowKind::ExactDateTime) return !(e->instant() < p.instant || s->instant() > p.instant);
  return !(e->date < p.lo || s->date > p.hi);
}

bool label_in(const CompiledPlan& p, const CellValue& v) {
  const auto* s = std::get_if<std::string>(&v);
  return s && p.labels.count(*s) > 0;
}

/// A matched row: event row index plus the dictionary row per join
/// (npos when a LEFT JOIN found nothing).
struct Match {
  std::size_t ev_row;
  std::vector<std::size_t> dict_rows;
};

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

void match_row(const CompiledPlan& p, std::size_t i, std::vector<Match>& out) {
  const Row& r = p.ev->rows[i];
  const auto* adm = std::get_if<std::int64_t>(&r[p.adm_col]);
  if (!adm || *adm != p.adm) return;
  for (const auto& [col, val] : p.eq)
    if (is_null(r[col]) || !(r[col] == val)) return;
  if (!time_ok(p, r)) return;
  if (p.joins.empty()) {
    if (label_in(p, r[*p.event_label_col])) out.push_back(Match{i, {}});
    return;
  }
  // Enumerate join combinations; the first join is inner, later ones left.
  std::vector<std::vector<std::size_t>> options;
  for (std::size_t k = 0; k < p.joins.size(); ++k) {
    const auto* ji = p.joins[k];
    std::vector<std::size_t> opts;
    const CellValue& key = r[ji->child_col];
    if (!is_null(key)) {
      auto it = ji->by_key.find(cell_key(key));
      if (it != ji->by_key.end()) opts = it->second;
    }
    if (opts.empty()) {
      if (k == 0) return;
      opts.push_back(kNone);
    }
    options.push_back(std::move(opts));
  }
  std::vector<std::size_t> pick(options.size(), 0);
  while (true) {
    bool hit = false;
    std::vector<std::size_t> rows(options.size());
    for (std::size_t k = 0; k < options.size(); ++k) {
      rows[k] = options[k][pick[k]];
      if (rows[k] == kNone) continue;
      const Row& d = p.joins[k]->dict->rows[rows[k]];
      for (auto c : p.joins[k]->label_cols) hit = hit || label_in(p, d[c]);
    }
    if (hit) out.push_back(Match{i, rows});
    std::size_t k = 0;
    while (k < pick.size() && ++pick[k] == options[k].size()) pick[k++] = 0;
    if (k == pick.size()) break;
  }
}

std::vector<Match> scan_serial(const CompiledPlan& p) {
  std::vector<Match> out;
  for (std::size_t i = 0; i < p.ev->rows.size(); ++i) match_row(p, i, out);
  return out;
}

std::vector<Match> scan_parallel(const CompiledPlan& p) {
  const auto n = static_cast<std::int64_t>(p.ev->rows.size());
  std::vector<std::vector<Match>> parts;
#pragma omp parallel
  {
#ifdef _OPENMP
    const int tid = omp_get_thread_num();
    const int nt = omp_get_num_threads();
#else
    const int tid = 0;
    const int nt = 1;
#endif
#pragma omp single
    parts.resize(nt);
    std::vector<Match> local;
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) match_row(p, static_cast<std::size_t>(i), local);
    parts[tid] = std::move(local);
  }
  // Static scheduling hands out contiguous ascending chunks in thread order,
  // so concatenation preserves row order.
  std::vector<Match> out;
  for (auto& part : parts) out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  return out;
}

}  // namespace

struct RecordStore::Impl {
  SchemaProfile profile;
  std::vector<Table> tables;
  std::vector<JoinIndex> join_indexes;
  bool frozen = false;
  sqlite3* db = nullptr;
  mutable std::mutex db_mutex;

  ~Impl() {
    if (db) sqlite3_close(db);
  }

  Table& table(std::string_view name) {
    for (auto& t : tables)
      if (iequals(t.spec->name, name)) return t;
    throw SchemaError("unknown table '" + std::string(name) + "'");
  }
  const Table& table(std::string_view name) const { return const_cast<Impl*>(this)->table(name); }

  void exec(const std::string& sql) {
    char* err = nullptr;
    if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "sqlite error";
      sqlite3_free(err);
      throw std::runtime_error("sqlite: " + msg + " in: " + sql);
    }
  }

  void build_sql();
  void build_join_indexes();
  CompiledPlan compile(const QueryPlan& plan) const;
  RowSet materialize(const CompiledPlan& p, const QueryPlan& plan, const std::vector<Match>& matches) const;
  RowSet run_sql(const QueryPlan& plan) const;
};

void RecordStore::Impl::build_sql() {
  if (sqlite3_open_v2(":memory:", &db, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX, nullptr) !=
      SQLITE_OK)
    throw std::runtime_error("sqlite: cannot open in-memory database");
  exec("BEGIN");
  for (const auto& t : tables) {
    std::string ddl = "CREATE TABLE " + t.spec->name + " (";
    std::string ins = "INSERT INTO " + t.spec->name + " VALUES (";
    for (std::size_t i = 0; i < t.spec->columns.size(); ++i) {
      const auto& c = t.spec->columns[i];
      const char* type = c.kind == ValueKind::Integer ? "INTEGER" : c.kind == ValueKind::Decimal ? "REAL" : "TEXT";
      ddl += (i ? ", " : "") + c.name + " " + type;
      ins += i ? ", ?" : "?";
    }
    exec(ddl + ")");
    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(db, (ins + ")").c_str(), -1, &stmt, nullptr) != SQLITE_OK)
      throw std::runtime_error(std::string("sqlite: ") + sqlite3_errmsg(db));
    for (const auto& r : t.rows) {
      sqlite3_reset(stmt);
      for (std::size_t i = 0; i < r.size(); ++i) {
        const int pos = static_cast<int>(i) + 1;
        const CellValue& v = r[i];
        if (is_null(v)) {
          sqlite3_bind_null(stmt, pos);
        } else if (const auto* n = std::get_if<std::int64_t>(&v)) {
          sqlite3_bind_int64(stmt, pos, *n);
        } else {
          // Decimals go in as text and take the column's REAL affinity, so
          // stored values and SQL literals share one text-to-real conversion.
          std::string s = cell_to_string(v);
          sqlite3_bind_text(stmt, pos, s.c_str(), static_cast<int>(s.size()), SQLITE_TRANSIENT);
        }
      }
      if (sqlite3_step(stmt) != SQLITE_DONE) {
        std::string msg = sqlite3_errmsg(db);
        sqlite3_finalize(stmt);
        throw std::runtime_error("sqlite: " + msg);
      }
    }
    sqlite3_finalize(stmt);
    if (auto adm = t.spec->role_column(ColumnRole::AdmissionKey))
      exec("CREATE INDEX idx_" + t.spec->name + "_adm ON " + t.spec->name + "(" + *adm + ")");
    if (t.spec->dictionary)
      if (auto key = t.spec->role_column(ColumnRole::ItemKey))
        exec("CREATE INDEX idx_" + t.spec->name + "_key ON " + t.spec->name + "(" + *key + ")");
  }
  exec("COMMIT");
}

void RecordStore::Impl::build_join_indexes() {
  for (const auto& j : profile.joins) {
    JoinIndex ji;
    ji.join = j;
    ji.dict = &table(j.dict_table);
    ji.child_col = *table(j.child_table).spec->column_index(j.child_column);
    const auto key_col = *ji.dict->spec->column_index(j.dict_column);
    for (const auto& c : ji.dict->spec->role_columns(ColumnRole::Label)) ji.label_cols.push_back(*ji.dict->spec->column_index(c));
    for (std::size_t i = 0; i < ji.dict->rows.size(); ++i) {
      const CellValue& k = ji.dict->rows[i][key_col];
      if (!is_null(k)) ji.by_key[cell_key(k)].push_back(i);
    }
    join_indexes.push_back(std::move(ji));
  }
}

CompiledPlan RecordStore::Impl::compile(const QueryPlan& plan) const {
  check_plan(plan, profile);
  CompiledPlan p;
  p.ev = &table(plan.pair.event_table);
  const auto& spec = *p.ev->spec;
  p.adm_col = *spec.column_index(*spec.role_column(ColumnRole::AdmissionKey));
  p.adm = plan.admission_key;
  for (const auto& c : plan.conditions) {
    if (plan.is_masked(c.id)) continue;
    p.eq.emplace_back(*spec.column_index(condition_columns(plan, profile, c.id).front()), c.value);
  }
  if (plan.time_active()) {
    p.time_kind = plan.window.kind;
    p.interval = spec.has_interval_time();
    auto cols = condition_columns(plan, profile, ConditionId::Time);
    p.time_col = *spec.column_index(cols.front());
    if (p.interval) p.end_col = *spec.column_index(cols.back());
    if (plan.window.kind == WindowKind::DayRange) {
      p.lo = plan.window.lo.date;
      p.hi = plan.window.hi.date;
    } else {
      p.lo = p.hi = plan.window.exact.date;
      p.instant = plan.window.exact.instant();
    }
  }
  for (const auto& j : plan_joins(plan, profile))
    for (const auto& ji : join_indexes)
      if (ji.join == j) p.joins.push_back(&ji);
  if (p.joins.empty()) p.event_label_col = *spec.column_index(*spec.role_column(ColumnRole::Label));
  p.labels.insert(plan.item_labels.begin(), plan.item_labels.end());
  return p;
}

RowSet RecordStore::Impl::materialize(const CompiledPlan& p, const QueryPlan& plan, const std::vector<Match>& matches) const {
  RowSet rs;
  rs.table = plan.pair.event_table;
  rs.provenance = ExecPath::ScanPath;
  const auto& spec = *p.ev->spec;
  for (const auto& c : spec.columns) rs.columns.push_back(spec.name + "." + c.name);
  for (const auto* ji : p.joins)
    for (const auto& c : ji->dict->spec->columns) rs.columns.push_back(ji->join.alias + "." + c.name);
  const auto pk = *spec.column_index(spec.primary_key);
  for (const auto& m : matches) {
    Row row = p.ev->rows[m.ev_row];
    std::string key = cell_to_string(row[pk]);
    for (std::size_t k = 0; k < p.joins.size(); ++k) {
      const auto& dspec = *p.joins[k]->dict->spec;
      if (m.dict_rows[k] == kNone) {
        row.insert(row.end(), dspec.columns.size(), CellValue{Null{}});
        key += "|-";
      } else {
        const Row& d = p.joins[k]->dict->rows[m.dict_rows[k]];
        row.insert(row.end(), d.begin(), d.end());
        key += "|" + cell_to_string(d[*dspec.column_index(dspec.primary_key)]);
      }
    }
    rs.rows.push_back(std::move(row));
    rs.keys.push_back(std::move(key));
  }
  return rs;
}

RowSet RecordStore::Impl::run_sql(const QueryPlan& plan) const {
  const std::string sql = render_sql(plan, profile, SelectStyle::Qualified);
  const auto& spec = table(plan.pair.event_table).spec;
  std::vector<const TableSpec*> parts{spec};
  std::vector<std::string> aliases{spec->name};
  for (const auto& j : plan_joins(plan, profile)) {
    parts.push_back(table(j.dict_table).spec);
    aliases.push_back(j.alias);
  }
  RowSet rs;
  rs.table = plan.pair.event_table;
  rs.provenance = ExecPath::SqlPath;
  std::vector<ValueKind> kinds;
  std::vector<int> pk_cols;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (const auto& c : parts[k]->columns) {
      if (c.name == parts[k]->primary_key) pk_cols.push_back(static_cast<int>(kinds.size()));
      rs.columns.push_back(aliases[k] + "." + c.name);
      kinds.push_back(c.kind);
    }
  }

  std::lock_guard lock(db_mutex);
  sqlite3_stmt* stmt = nullptr;
  if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK)
    throw std::runtime_error(std::string("sqlite: ") + sqlite3_errmsg(db) + " in: " + sql);
  int rc;
  while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
    Row row;
    row.reserve(kinds.size());
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      const int col = static_cast<int>(i);
      if (sqlite3_column_type(stmt, col) == SQLITE_NULL) {
        row.emplace_back(Null{});
        continue;
      }
      if (kinds[i] == ValueKind::Integer) {
        row.emplace_back(static_cast<std::int64_t>(sqlite3_column_int64(stmt, col)));
        continue;
      }
      std::string text(reinterpret_cast<const char*>(sqlite3_column_text(stmt, col)));
      auto v = parse_cell(kinds[i], text);
      if (!v) {
        sqlite3_finalize(stmt);
        throw std::runtime_error("sqlite returned unparseable cell '" + text + "' for " + rs.columns[i]);
      }
      row.push_back(std::move(*v));
    }
    std::string key;
    for (std::size_t k = 0; k < pk_cols.size(); ++k) {
      const auto& cell = row[pk_cols[k]];
      key += (k ? "|" : "") + (k > 0 && is_null(cell) ? std::string("-") : cell_to_string(cell));
    }
    rs.rows.push_back(std::move(row));
    rs.keys.push_back(std::move(key));
  }
  sqlite3_finalize(stmt);
  if (rc != SQLITE_DONE) throw std::runtime_error(std::string("sqlite: ") + sqlite3_errmsg(db));
  return rs;
}

RecordStore::RecordStore(SchemaProfile profile) : impl_(std::make_unique<Impl>()) {
  validate(profile);
  impl_->profile = std::move(profile);
  impl_->tables.reserve(impl_->profile.tables.size());
  for (const auto& t : impl_->profile.tables) impl_->tables.push_back(Table{&t, {}});
}

RecordStore::~RecordStore() = default;
RecordStore::RecordStore(RecordStore&&) noexcept = default;
RecordStore& RecordStore::operator=(RecordStore&&) noexcept = default;

const SchemaProfile& RecordStore::profile() const { return impl_->profile; }
bool RecordStore::frozen() const { return impl_->frozen; }

const std::vector<Row>& RecordStore::rows(std::string_view table) const { return impl_->table(table).rows; }

void RecordStore::insert_row(std::string_view table, Row row) {
  if (impl_->frozen) throw std::logic_error("record store is frozen");
  auto& t = impl_->table(table);
  if (row.size() != t.spec->columns.size())
    throw SchemaError(t.spec->name + ": row has " + std::to_string(row.size()) + " cells, expected " +
                      std::to_string(t.spec->columns.size()));
  for (std::size_t i = 0; i < row.size(); ++i)
    if (!kind_matches(t.spec->columns[i].kind, row[i]))
      throw SchemaError(t.spec->name + "." + t.spec->columns[i].name + ": cell of the wrong kind");
  t.rows.push_back(std::move(row));
}

std::size_t RecordStore::ingest_csv(std::string_view table, std::istream& in) {
  if (impl_->frozen) throw std::logic_error("record store is frozen");
  auto& t = impl_->table(table);
  const auto& spec = *t.spec;
  CsvReader reader(in);
  std::vector<CsvField> rec;
  if (!reader.next(rec)) throw ParseError(spec.name + ": missing header row", 1);
  std::vector<int> source(spec.columns.size(), -1);
  for (std::size_t i = 0; i < rec.size(); ++i) {
    auto idx = spec.column_index(trim(rec[i].text));
    if (idx) source[*idx] = static_cast<int>(i);
  }
  for (std::size_t c = 0; c < spec.columns.size(); ++c)
    if (source[c] < 0) throw SchemaError(spec.name + ": CSV header lacks required column " + spec.columns[c].name);
  const std::size_t width = rec.size();

  std::vector<Row> parsed;
  while (reader.next(rec)) {
    const long line = reader.record_line();
    if (rec.size() == 1 && rec[0].text.empty() && !rec[0].quoted) continue;  // blank line
    if (rec.size() != width)
      throw ParseError(spec.name + ": expected " + std::to_string(width) + " fields, found " + std::to_string(rec.size()), line);
    Row row(spec.columns.size());
    for (std::size_t c = 0; c < spec.columns.size(); ++c) {
      const auto& f = rec[static_cast<std::size_t>(source[c])];
      if (f.text.empty() && !f.quoted) {
        row[c] = Null{};
        continue;
      }
      auto v = parse_cell(spec.columns[c].kind, f.text);
      if (!v)
        throw ParseError(spec.name + "." + spec.columns[c].name + ": cannot parse '" + f.text + "' as " +
                             std::string(to_string(spec.columns[c].kind)),
                         line);
      row[c] = std::move(*v);
    }
    parsed.push_back(std::move(row));
  }
  t.rows.insert(t.rows.end(), std::make_move_iterator(parsed.begin()), std::make_move_iterator(parsed.end()));
  return parsed.size();
}

void RecordStore::freeze() {
  if (impl_->frozen) return;
  impl_->build_sql();
  impl_->build_join_indexes();
  impl_->frozen = true;
}

RowSet RecordStore::scan(const QueryPlan& plan, bool parallel) const {
  if (!impl_->frozen) throw std::logic_error("record store must be frozen before queries");
  auto p = impl_->compile(plan);
  auto matches = parallel ? scan_parallel(p) : scan_serial(p);
  return impl_->materialize(p, plan, matches);
}

RowSet RecordStore::execute_plan(const QueryPlan& plan, ExecPath path) const {
  if (!impl_->frozen) throw std::logic_error("record store must be frozen before queries");
  if (path == ExecPath::ScanPath) return scan(plan, true);
  return impl_->run_sql(plan);
}

std::string RecordStore::execution_sql(const QueryPlan& plan) const {
  return render_sql(plan, impl_->profile, SelectStyle::Qualified);
}

RecordStore load_store(const SchemaProfile& profile, const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("database directory not found: " + dir.string());
  RecordStore store(profile);
  for (const auto& t : profile.tables) {
    auto path = dir / (t.name + ".csv");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
      store.ingest_csv(t.name, in);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  store.freeze();
  return store;
}

void write_store_csv(const RecordStore& store, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& t : store.profile().tables) {
    std::ofstream out(dir / (t.name + ".csv"), std::ios::binary);
    std::vector<std::optional<std::string>> header;
    for (const auto& c : t.columns) header.emplace_back(c.name);
    write_csv_record(out, header);
    for (const auto& r : store.rows(t.name)) {
      std::vector<std::optional<std::string>> fields;
      for (const auto& v : r) fields.push_back(is_null(v) ? std::nullopt : std::optional<std::string>(cell_to_string(v)));
      write_csv_record(out, fields);
    }
  }
}

}  // namespace ehrcheck
