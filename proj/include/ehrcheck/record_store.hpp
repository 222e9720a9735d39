#pragma once

// In-memory EHR tables with two execution paths for query plans: rendered SQL
// against an embedded SQLite database, and a brute-force row scan.

#include <cstddef>
#include <filesystem>
#include <istream>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ehrcheck/cell.hpp"
#include "ehrcheck/query_plan.hpp"
#include "ehrcheck/schema.hpp"

namespace ehrcheck {

enum class ExecPath { SqlPath, ScanPath };

std::string_view to_string(ExecPath path);

using Row = std::vector<CellValue>;

struct RowSet {
  std::string table;
  ExecPath provenance = ExecPath::ScanPath;
  /// Qualified column names ("alias.column"): event table first, then each
  /// joined dictionary.
  std::vector<std::string> columns;
  std::vector<Row> rows;
  /// Primary-key tuple per row (event key, then each joined dictionary key).
  std::vector<std::string> keys;

  bool empty() const { return rows.empty(); }
  std::size_t size() const { return rows.size(); }
  std::vector<std::string> sorted_keys() const;
  /// Multiset equality on primary-key tuples; row order is ignored.
  bool same_rows(const RowSet& other) const { return sorted_keys() == other.sorted_keys(); }
};

class RecordStore {
 public:
  explicit RecordStore(SchemaProfile profile);
  ~RecordStore();
  RecordStore(RecordStore&&) noexcept;
  RecordStore& operator=(RecordStore&&) noexcept;

  /// Parses an RFC-4180 CSV with a header row. Header names match table
  /// columns case-insensitively; extra columns are ignored, missing ones are
  /// an error. Empty unquoted fields are null. Throws ParseError (with the
  /// line number) or SchemaError.
  std::size_t ingest_csv(std::string_view table, std::istream& in);
  /// Appends one typed row in column order. Throws SchemaError on a kind
  /// mismatch.
  void insert_row(std::string_view table, Row row);

  /// Ends the write phase and builds the SQL mirror and join indexes.
  void freeze();
  bool frozen() const;

  const SchemaProfile& profile() const;
  const std::vector<Row>& rows(std::string_view table) const;

  RowSet execute_plan(const QueryPlan& plan, ExecPath path) const;
  /// ScanPath with an explicit kernel choice (the parallel kernel and its
  /// serial reference return identical row sets).
  RowSet scan(const QueryPlan& plan, bool parallel) const;
  /// The SQL text actually executed for `plan`.
  std::string execution_sql(const QueryPlan& plan) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Loads `<table>.csv` for every table of the profile found in `dir`
/// (absent files leave the table empty) and freezes the store.
RecordStore load_store(const SchemaProfile& profile, const std::filesystem::path& dir);

/// Writes every table of the store as `<table>.csv` into `dir`.
void write_store_csv(const RecordStore& store, const std::filesystem::path& dir);

/// Parses a CSV cell of the given kind; nullopt on failure.
std::optional<CellValue> parse_cell(ValueKind kind, std::string_view text);

}  // namespace ehrcheck
