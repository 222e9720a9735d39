#pragma once

// Recall, precision and intersection of verification reports against gold
// labels, per note and macro-averaged.

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ehrcheck/verifier.hpp"

namespace ehrcheck {

/// Gold and report sets that cannot be aligned.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GoldEntity {
  std::string surface;
  EntityType type = EntityType::Type1;
  int line_no = 0;
  Label label = Label::Consistent;  // Consistent or Inconsistent
  int errors = 0;
  std::vector<std::string> error_columns;  // "table.column"
  /// The event is absent from the admission altogether.
  bool missing = false;
  std::string time = "NaN";
};

struct GoldRecord {
  std::string note_id;
  NoteCategory category = NoteCategory::DischargeSummary;
  std::vector<GoldEntity> entities;
};

nlohmann::json gold_to_json(const GoldRecord& g);
/// Throws ParseError.
GoldRecord gold_from_json(const nlohmann::json& j);
/// One record per line.
std::vector<GoldRecord> read_gold(std::istream& in);
void write_gold(std::ostream& out, const std::vector<GoldRecord>& golds);

enum class MatchRule { SurfaceAndLine, SurfaceOnly };
MatchRule parse_match_rule(std::string_view text);

struct MetricTriple {
  double recall = 0;
  double precision = 0;
  /// Empty when no entity was correctly recognized.
  std::optional<double> intersection;
  int correct = 0;
  int gold = 0;
  int recognized = 0;
  int matched = 0;
};

/// Type3 entities are ignored on both sides. Throws EvaluationError when the
/// note ids differ.
MetricTriple score_note(const GoldRecord& gold, const VerificationReport& report,
                        MatchRule rule = MatchRule::SurfaceAndLine);

struct AveragedMetrics {
  double recall = 0;
  double precision = 0;
  std::optional<double> intersection;
  int notes = 0;
  int intersection_notes = 0;
};

struct CorpusMetrics {
  std::map<NoteCategory, AveragedMetrics> by_category;
  AveragedMetrics total;
  std::map<std::string, MetricTriple> per_note;
};

/// Unweighted mean over notes. Throws EvaluationError naming notes that have
/// no counterpart.
CorpusMetrics score_corpus(const std::vector<GoldRecord>& golds, const std::vector<VerificationReport>& reports,
                           MatchRule rule = MatchRule::SurfaceAndLine);

nlohmann::json metrics_to_json(const CorpusMetrics& m);
std::string format_metrics_table(const CorpusMetrics& m);

}  // namespace ehrcheck
