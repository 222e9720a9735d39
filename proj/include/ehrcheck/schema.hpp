#pragma once

// Schema profiles (MIMIC-style and OMOP-style), column roles, and the
// cross-schema column mapping.

#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ehrcheck {

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ValueKind { Text, Decimal, DateTime, Integer };

enum class ColumnRole {
  Label,
  Value,
  Unit,
  PointTime,
  StartTime,
  EndTime,
  Organism,
  Specimen,
  SubjectKey,
  AdmissionKey,
  ItemKey,
  ConceptDomain,
};

std::string_view to_string(ColumnRole role);
std::string_view to_string(ValueKind kind);

/// PointTime, StartTime and EndTime form one family: the mapping may turn a
/// point time into an interval.
bool is_time_role(ColumnRole role);

struct ColumnSpec {
  std::string name;
  ValueKind kind = ValueKind::Text;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

struct TableSpec {
  std::string name;
  std::vector<ColumnSpec> columns;
  std::multimap<ColumnRole, std::string> roles;
  std::string primary_key;
  bool dictionary = false;

  std::optional<std::size_t> column_index(std::string_view column) const;
  bool has_column(std::string_view column) const { return column_index(column).has_value(); }
  const ColumnSpec& column(std::string_view column) const;
  std::optional<std::string> role_column(ColumnRole role) const;
  std::vector<std::string> role_columns(ColumnRole role) const;
  std::optional<ColumnRole> role_of(std::string_view column) const;
  bool has_interval_time() const { return role_column(ColumnRole::StartTime).has_value(); }

  friend bool operator==(const TableSpec&, const TableSpec&) = default;
};

/// A dictionary join. `alias` differs from `dict_table` when one dictionary
/// is joined twice (microbiology joins D_items for specimen and organism).
struct Join {
  std::string child_table;
  std::string child_column;
  std::string dict_table;
  std::string dict_column;
  std::string alias;

  friend bool operator==(const Join&, const Join&) = default;
};

/// An (event table, dictionary) pair a mention can be verified against.
struct TablePair {
  std::string event_table;
  std::optional<std::string> dict_table;

  friend bool operator==(const TablePair&, const TablePair&) = default;
  friend auto operator<=>(const TablePair&, const TablePair&) = default;
};

std::string to_string(const TablePair& pair);

enum class ProfileName { MimicStyle, OmopStyle };

std::string_view to_string(ProfileName name);
ProfileName parse_profile_name(std::string_view text);

struct ItemSource {
  std::string table;
  std::vector<std::string> label_columns;

  friend bool operator==(const ItemSource&, const ItemSource&) = default;
};

struct SchemaProfile {
  ProfileName name = ProfileName::MimicStyle;
  std::vector<TableSpec> tables;
  std::vector<Join> joins;
  std::vector<TablePair> legal_pairs;
  /// Item search sources in display order.
  std::vector<ItemSource> item_sources;
  /// Optional concept-domain value required for hits used with an event
  /// table (OMOP only).
  std::map<std::string, std::string> domain_for_event_table;

  const TableSpec* find_table(std::string_view name) const;
  const TableSpec& table(std::string_view name) const;
  std::vector<Join> joins_for(std::string_view child) const;
  bool is_legal(const TablePair& pair) const;
  std::vector<std::string> event_tables() const;

  friend bool operator==(const SchemaProfile&, const SchemaProfile&) = default;
};

SchemaProfile load_profile(ProfileName name);

/// Applies `table.column = new_name` overrides (one per line, `#` comments)
/// for local database variants. Roles, joins and item sources follow the
/// renamed column.
void apply_profile_overrides(SchemaProfile& profile, std::istream& in);

/// Throws SchemaError describing the first violated invariant.
void validate(const SchemaProfile& profile);

struct ColumnRef {
  std::string table;
  std::string column;

  friend bool operator==(const ColumnRef&, const ColumnRef&) = default;
  friend auto operator<=>(const ColumnRef&, const ColumnRef&) = default;
};

std::string to_string(const ColumnRef& ref);

/// MIMIC column <-> OMOP column correspondence. A MIMIC column with no OMOP
/// counterpart is recorded with an empty target.
struct SchemaMapping {
  struct Pair {
    ColumnRef mimic;
    std::optional<ColumnRef> omop;
  };
  std::vector<Pair> pairs;
};

const SchemaMapping& standard_mapping();

/// Returns every counterpart of `src` (either direction). An empty result
/// means the column is known but has no counterpart. Throws SchemaError for
/// columns the mapping does not know.
std::vector<ColumnRef> translate_column(const SchemaMapping& mapping, const ColumnRef& src);

}  // namespace ehrcheck
