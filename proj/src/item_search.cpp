#include "ehrcheck/item_search.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include <omp.h>

#include "ehrcheck/assets.hpp"
#include "ehrcheck/errors.hpp"
#include "ehrcheck/text_util.hpp"

namespace ehrcheck {

std::string normalize_for_bigrams(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(u)));
    } else {
      pending_space = true;
    }
  }
  return out;
}

namespace {

std::uint32_t symbol(char c) {
  if (c == ' ') return 0;
  if (c >= '0' && c <= '9') return 1 + static_cast<std::uint32_t>(c - '0');
  if (c >= 'a' && c <= 'z') return 11 + static_cast<std::uint32_t>(c - 'a');
  return 37 + static_cast<unsigned char>(c);  // non-ASCII bytes
}

}  // namespace

BigramVector bigrams(std::string_view text) {
  BigramVector v;
  v.normalized = normalize_for_bigrams(text);
  std::map<std::uint32_t, std::uint32_t> counts;
  for (std::size_t i = 0; i + 1 < v.normalized.size(); ++i)
    ++counts[symbol(v.normalized[i]) * 512 + symbol(v.normalized[i + 1])];
  double sq = 0.0;
  for (const auto& [code, n] : counts) {
    v.counts.emplace_back(code, n);
    sq += static_cast<double>(n) * n;
  }
  v.norm = std::sqrt(sq);
  v.set_norm = std::sqrt(static_cast<double>(v.counts.size()));
  return v;
}

double bigram_cosine(const BigramVector& a, const BigramVector& b, bool set_cosine) {
  if (a.normalized.size() < 2 || b.normalized.size() < 2)
    return !a.normalized.empty() && a.normalized == b.normalized ? 1.0 : 0.0;
  double dot = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.counts.size() && j < b.counts.size()) {
    if (a.counts[i].first < b.counts[j].first) {
      ++i;
    } else if (b.counts[j].first < a.counts[i].first) {
      ++j;
    } else {
      dot += set_cosine ? 1.0 : static_cast<double>(a.counts[i].second) * b.counts[j].second;
      ++i;
      ++j;
    }
  }
  double denom = set_cosine ? a.set_norm * b.set_norm : a.norm * b.norm;
  if (denom == 0.0) return 0.0;
  return std::min(1.0, dot / denom);
}

double bigram_cosine(std::string_view a, std::string_view b, bool set_cosine) {
  return bigram_cosine(bigrams(a), bigrams(b), set_cosine);
}

void ExpansionLexicon::add(Kind kind, std::string_view from, std::string_view to) {
  auto f = std::string(trim(from)), t = std::string(trim(to));
  if (f.empty() || t.empty()) return;
  by_from_.emplace(to_lower(f), entries_.size());
  entries_.push_back({kind, std::move(f), std::move(t)});
}

std::vector<std::string> ExpansionLexicon::images(std::string_view term) const {
  std::vector<std::size_t> idx;
  auto [lo, hi] = by_from_.equal_range(to_lower(trim(term)));
  for (auto it = lo; it != hi; ++it) idx.push_back(it->second);
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(entries_[i].to);
  return out;
}

ExpansionLexicon ExpansionLexicon::read(std::istream& in) {
  ExpansionLexicon lex;
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto parts = split(line, '\t');
    if (parts.size() != 3) throw ParseError("lexicon entry needs kind, from and to separated by tabs", n);
    auto kind = to_lower(trim(parts[0]));
    Kind k;
    if (kind == "abbrev" || kind == "abbreviation") k = Kind::Abbreviation;
    else if (kind == "brand") k = Kind::Brand;
    else throw ParseError("unknown lexicon kind '" + kind + "'", n);
    if (trim(parts[1]).empty() || trim(parts[2]).empty()) throw ParseError("empty lexicon term", n);
    lex.add(k, parts[1], parts[2]);
  }
  return lex;
}

ExpansionLexicon ExpansionLexicon::bundled() {
  auto text = embedded_asset("lexicon.tsv");
  if (!text) return {};
  std::istringstream in{std::string(*text)};
  return read(in);
}

std::vector<std::string> expand(std::string_view entity, const ExpansionLexicon& lex) {
  std::vector<std::string> out{std::string(trim(entity))};
  std::set<std::string> seen{to_lower(out[0])};
  for (auto& img : lex.images(entity))
    if (seen.insert(to_lower(img)).second) out.push_back(std::move(img));
  return out;
}

ItemIndex::ItemIndex(const RecordStore& store) {
  const auto& profile = store.profile();
  for (std::size_t rank = 0; rank < profile.item_sources.size(); ++rank) {
    const auto& src = profile.item_sources[rank];
    const auto& table = profile.table(src.table);
    auto key_col = table.dictionary ? table.role_column(ColumnRole::ItemKey) : std::nullopt;
    auto domain_col = table.role_column(ColumnRole::ConceptDomain);
    const auto& rows = store.rows(src.table);
    for (const auto& col : src.label_columns) {
      auto li = *table.column_index(col);
      std::set<std::string> seen_labels;  // event-table labels repeat per row
      for (const auto& row : rows) {
        if (!std::holds_alternative<std::string>(row[li])) continue;
        const auto& label = std::get<std::string>(row[li]);
        std::string key = key_col ? cell_to_string(row[*table.column_index(*key_col)]) : label;
        if (!key_col && !seen_labels.insert(label).second) continue;
        std::string domain = domain_col ? cell_to_string(row[*table.column_index(*domain_col)]) : std::string();
        entries_.push_back({rank, src.table, col, std::move(key), label, std::move(domain), bigrams(label)});
      }
    }
  }
}

std::vector<ItemHit> ItemIndex::search(std::string_view entity, const ExpansionLexicon& lex,
                                       const ItemSearchOptions& opts) const {
  std::vector<BigramVector> variants;
  auto names = expand(entity, lex);
  for (const auto& v : names) variants.push_back(bigrams(v));
  const auto n = static_cast<long>(entries_.size());
  std::vector<double> best(entries_.size(), 0.0);
  std::vector<int> which(entries_.size(), 0);
  auto score_one = [&](long i) {
    for (std::size_t k = 0; k < variants.size(); ++k) {
      double s = bigram_cosine(variants[k], entries_[static_cast<std::size_t>(i)].vec, opts.set_cosine);
      if (s > best[static_cast<std::size_t>(i)]) {
        best[static_cast<std::size_t>(i)] = s;
        which[static_cast<std::size_t>(i)] = static_cast<int>(k);
      }
    }
  };
  if (opts.parallel) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) score_one(i);
  } else {
    for (long i = 0; i < n; ++i) score_one(i);
  }
  std::vector<std::pair<std::size_t, ItemHit>> hits;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!(best[i] > opts.threshold)) continue;
    const auto& e = entries_[i];
    hits.emplace_back(e.source_rank,
                      ItemHit{e.source_table, e.label_column, e.item_key, e.label, e.domain, best[i], names[static_cast<std::size_t>(which[i])]});
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    if (a.second.score != b.second.score) return a.second.score > b.second.score;
    if (a.second.label != b.second.label) return a.second.label < b.second.label;
    if (a.second.item_key != b.second.item_key) return a.second.item_key < b.second.item_key;
    return a.second.label_column < b.second.label_column;
  });
  std::vector<ItemHit> out;
  for (auto& [r, h] : hits) out.push_back(std::move(h));
  return out;
}

std::vector<ItemHit> search_items(std::string_view entity, const ExpansionLexicon& lex, const RecordStore& store,
                                  double threshold) {
  ItemSearchOptions opts;
  opts.threshold = threshold;
  return ItemIndex(store).search(entity, lex, opts);
}

std::vector<ItemHit> hits_for_pair(const std::vector<ItemHit>& hits, const TablePair& pair, const SchemaProfile& profile) {
  const auto& source = pair.dict_table ? *pair.dict_table : pair.event_table;
  std::string domain;
  if (auto it = profile.domain_for_event_table.find(pair.event_table); it != profile.domain_for_event_table.end())
    domain = it->second;
  std::vector<ItemHit> out;
  for (const auto& h : hits)
    if (iequals(h.source_table, source) && (domain.empty() || iequals(h.domain, domain))) out.push_back(h);
  return out;
}

}  // namespace ehrcheck
