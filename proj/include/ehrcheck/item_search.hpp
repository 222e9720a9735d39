#pragma once

// Item search: expands an entity name through abbreviation and brand-name
// lexicons, then retrieves dictionary labels by character-bigram cosine.

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ehrcheck/record_store.hpp"
#include "ehrcheck/schema.hpp"

namespace ehrcheck {

/// Lowercase, every non-alphanumeric run becomes one space, trimmed.
std::string normalize_for_bigrams(std::string_view s);

/// Sparse bigram frequency vector over the normalized text, sorted by code.
struct BigramVector {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> counts;
  double norm = 0.0;      // multiset norm
  double set_norm = 0.0;  // sqrt(number of distinct bigrams)
  std::string normalized;
};

BigramVector bigrams(std::string_view text);

/// Cosine of the bigram vectors (multiset counts, or presence only when
/// `set_cosine`). Strings shorter than two normalized characters score 0
/// unless they are equal and nonempty.
double bigram_cosine(std::string_view a, std::string_view b, bool set_cosine = false);
double bigram_cosine(const BigramVector& a, const BigramVector& b, bool set_cosine = false);

class ExpansionLexicon {
 public:
  enum class Kind { Abbreviation, Brand };

  void add(Kind kind, std::string_view from, std::string_view to);
  /// Direct images of `term` (case-insensitive), in insertion order.
  std::vector<std::string> images(std::string_view term) const;
  std::size_t size() const { return entries_.size(); }

  /// Lines `kind<TAB>from<TAB>to` with kind `abbrev` or `brand`; blank lines
  /// and `#` comments skipped. Throws ParseError with the line number.
  static ExpansionLexicon read(std::istream& in);
  /// data/lexicon.tsv as compiled in.
  static ExpansionLexicon bundled();

 private:
  struct Entry {
    Kind kind;
    std::string from, to;
  };
  std::vector<Entry> entries_;
  std::multimap<std::string, std::size_t> by_from_;
};

/// The entity itself followed by its one-hop lexicon images, deduplicated
/// case-insensitively.
std::vector<std::string> expand(std::string_view entity, const ExpansionLexicon& lex);

struct ItemHit {
  std::string source_table;  // dictionary table, or prescriptions
  std::string label_column;
  std::string item_key;      // cell text of the dictionary key (the label itself for prescriptions)
  std::string label;
  std::string domain;        // OMOP concept domain, empty otherwise
  double score = 0.0;
  std::string source_variant;

  friend bool operator==(const ItemHit&, const ItemHit&) = default;
};

struct ItemSearchOptions {
  double threshold = 0.5;
  bool set_cosine = false;
  bool parallel = true;
};

/// Precomputed bigram vectors of every searchable label of a store.
class ItemIndex {
 public:
  explicit ItemIndex(const RecordStore& store);

  /// Hits scoring above the threshold, in item-source order, then by
  /// descending score, label and key.
  std::vector<ItemHit> search(std::string_view entity, const ExpansionLexicon& lex, const ItemSearchOptions& opts) const;
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::size_t source_rank;
    std::string source_table, label_column, item_key, label, domain;
    BigramVector vec;
  };
  std::vector<Entry> entries_;
};

std::vector<ItemHit> search_items(std::string_view entity, const ExpansionLexicon& lex, const RecordStore& store,
                                  double threshold);

/// Hits usable with a table pair: from its dictionary (or prescriptions
/// itself) and, under OMOP, from the event table's concept domain.
std::vector<ItemHit> hits_for_pair(const std::vector<ItemHit>& hits, const TablePair& pair, const SchemaProfile& profile);

}  // namespace ehrcheck
